//! Deterministic tabular multi-agent reinforcement learning simulator.
//!
//! The crate is generic over the value scalar (any [`scalar::Scalar`],
//! i.e. `f32` or `f64`); the aliases below fix `f64` for the common case
//! and are what the CLI and experiment harness use.

pub mod envs;
pub mod harness;
pub mod learners;
pub mod mdp;
pub mod model;
pub mod oracle;
pub mod plot;
pub mod scalar;
pub mod schedule;

/// Tabular game with `f64` rewards.
pub type Game = mdp::TabularGame<f64>;
/// Game builder with `f64` rewards.
pub type GameBuilder = mdp::GameBuilder<f64>;
/// Single-agent experience with `f64` reward.
pub type Exp = mdp::Experience<f64>;
/// `f64` hyperparameter bundle.
pub type Hyperparams = learners::Hyperparams<f64>;
/// Independent QSS learner over `f64`.
pub type Iqss = learners::IqssLearner<f64>;
/// Independent Q learner over `f64`.
pub type Indq = learners::IndqLearner<f64>;
/// Centralized learner over `f64`.
pub type Central = learners::CentralLearner<f64>;
/// Decayed-count transition model over `f64`.
pub type Model = model::TransitionModel<f64>;
/// Exact joint solution over `f64`.
pub type Solution = oracle::JointSolution<f64>;
