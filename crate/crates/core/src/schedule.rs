//! Interaction protocols deciding, per environment step, who explores, who
//! acts greedily, who records experience, and who is still learning.
//!
//! All functions here are pure in `(t, config)`; the harness queries them
//! every step. Steps are 1-indexed. Agents are 0-indexed, and the collector
//! rotation runs 0, 1, ..., K-1 so that the first collector is the agent
//! with no seniors.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::learners::Behavior;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Synchronous: all agents explore, record, and learn every step.
    Sma,
    /// Round-robin: one collector per turn records; seniors act greedily.
    Roma,
    /// Round-robin with early stopping and pre-collection.
    RomaEspc,
}

impl Mode {
    pub fn is_round_robin(&self) -> bool {
        matches!(self, Mode::Roma | Mode::RomaEspc)
    }
}

#[derive(Debug, Error)]
pub enum ScheduleError {
    #[error("step index must be >= 1, got {0}")]
    BadStep(usize),
    #[error("invalid schedule config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy)]
pub struct ScheduleConfig {
    pub mode: Mode,
    pub t_max: usize,
    /// Turn length for the round-robin modes.
    pub t_u: usize,
    /// Number of rotation rounds (ROMA-ESPC only).
    pub n_rounds: usize,
}

impl ScheduleConfig {
    pub fn sma(t_max: usize) -> Self {
        ScheduleConfig { mode: Mode::Sma, t_max, t_u: 1, n_rounds: 1 }
    }

    pub fn roma(t_max: usize, t_u: usize) -> Self {
        ScheduleConfig { mode: Mode::Roma, t_max, t_u, n_rounds: 1 }
    }

    /// ROMA-ESPC derives the turn length from `t_max`, the agent count, and
    /// the round count: each agent owns `t_star = t_max / K` learning steps
    /// split over `n_rounds` turns.
    pub fn roma_espc(t_max: usize, n_rounds: usize, num_agents: usize) -> Result<Self, ScheduleError> {
        if num_agents == 0 || n_rounds == 0 {
            return Err(ScheduleError::Invalid("agents and n_rounds must be positive".into()));
        }
        if t_max % num_agents != 0 {
            return Err(ScheduleError::Invalid(format!(
                "t_max = {t_max} must be divisible by the number of agents {num_agents}"
            )));
        }
        let t_star = t_max / num_agents;
        if t_star % n_rounds != 0 {
            return Err(ScheduleError::Invalid(format!(
                "t_star = {t_star} must be divisible by n_rounds = {n_rounds}"
            )));
        }
        Ok(ScheduleConfig { mode: Mode::RomaEspc, t_max, t_u: t_star / n_rounds, n_rounds })
    }

    pub fn t_star(&self, num_agents: usize) -> usize {
        self.t_max / num_agents
    }

    pub fn validate(&self, num_agents: usize) -> Result<(), ScheduleError> {
        if self.t_u == 0 {
            return Err(ScheduleError::Invalid("t_u must be positive".into()));
        }
        if self.mode == Mode::RomaEspc {
            // Reconstructible from the constructor's divisibility rules.
            if self.t_max % num_agents != 0 || self.t_star(num_agents) % self.n_rounds != 0 {
                return Err(ScheduleError::Invalid(
                    "ROMA-ESPC needs t_max divisible by K and t_star by n_rounds".into(),
                ));
            }
            if self.t_u != self.t_star(num_agents) / self.n_rounds {
                return Err(ScheduleError::Invalid("t_u inconsistent with t_star/n_rounds".into()));
            }
        }
        Ok(())
    }
}

/// Per-step assignment of behaviors, recording, and learning.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepDirective {
    pub behaviors: Vec<Behavior>,
    pub recording_agents: BTreeSet<usize>,
    pub learning_agents: BTreeSet<usize>,
}

/// Collector for step `t` (1-indexed): rotation 0, 1, ..., K-1, each agent
/// holding the token for `t_u` consecutive steps.
pub fn collector_at(t: usize, cfg: &ScheduleConfig, num_agents: usize) -> Result<usize, ScheduleError> {
    if t == 0 {
        return Err(ScheduleError::BadStep(t));
    }
    Ok(((t - 1) / cfg.t_u) % num_agents)
}

/// Seniors are agents with a lower index than the collector, juniors a
/// higher index.
pub fn roles_at(collector: usize, num_agents: usize) -> (BTreeSet<usize>, BTreeSet<usize>) {
    let seniors = (0..collector).collect();
    let juniors = (collector + 1..num_agents).collect();
    (seniors, juniors)
}

/// Full step directive for `t`.
pub fn directive_at(
    t: usize,
    cfg: &ScheduleConfig,
    num_agents: usize,
) -> Result<StepDirective, ScheduleError> {
    if t == 0 {
        return Err(ScheduleError::BadStep(t));
    }
    let all: BTreeSet<usize> = (0..num_agents).collect();
    match cfg.mode {
        Mode::Sma => Ok(StepDirective {
            behaviors: vec![Behavior::Explore; num_agents],
            recording_agents: all.clone(),
            learning_agents: all,
        }),
        Mode::Roma | Mode::RomaEspc => {
            let c = collector_at(t, cfg, num_agents)?;
            let (seniors, _) = roles_at(c, num_agents);
            let behaviors = (0..num_agents)
                .map(|i| if seniors.contains(&i) { Behavior::Greedy } else { Behavior::Explore })
                .collect();
            let mut recording: BTreeSet<usize> = BTreeSet::new();
            recording.insert(c);
            let learning = if cfg.mode == Mode::RomaEspc {
                // Pre-collection: the next collector records too.
                recording.insert((c + 1) % num_agents);
                // Early stopping: agent i learns only through (i+1) * t_star.
                let t_star = cfg.t_star(num_agents);
                (0..num_agents).filter(|&i| t <= (i + 1) * t_star).collect()
            } else {
                all
            };
            Ok(StepDirective { behaviors, recording_agents: recording, learning_agents: learning })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collector_rotation() {
        let cfg = ScheduleConfig::roma(3000, 100);
        assert_eq!(collector_at(1, &cfg, 3).unwrap(), 0);
        assert_eq!(collector_at(100, &cfg, 3).unwrap(), 0);
        assert_eq!(collector_at(101, &cfg, 3).unwrap(), 1);
        assert_eq!(collector_at(201, &cfg, 3).unwrap(), 2);
        assert_eq!(collector_at(301, &cfg, 3).unwrap(), 0); // wraps
        assert!(collector_at(0, &cfg, 3).is_err());
    }

    #[test]
    fn roles_split_on_index() {
        let (s, j) = roles_at(0, 3);
        assert!(s.is_empty());
        assert_eq!(j, BTreeSet::from([1, 2]));
        let (s, j) = roles_at(2, 3);
        assert_eq!(s, BTreeSet::from([0, 1]));
        assert!(j.is_empty());
        let (s, j) = roles_at(1, 3);
        assert_eq!(s, BTreeSet::from([0]));
        assert_eq!(j, BTreeSet::from([2]));
    }

    #[test]
    fn sma_everyone_explores_records_learns() {
        let cfg = ScheduleConfig::sma(100);
        let d = directive_at(17, &cfg, 5).unwrap();
        assert_eq!(d.behaviors, vec![Behavior::Explore; 5]);
        assert_eq!(d.recording_agents.len(), 5);
        assert_eq!(d.learning_agents.len(), 5);
    }

    #[test]
    fn roma_seniors_greedy_one_recorder() {
        let cfg = ScheduleConfig::roma(4000, 100);
        // Step in agent 2's turn with K = 4.
        let t = 201;
        assert_eq!(collector_at(t, &cfg, 4).unwrap(), 2);
        let d = directive_at(t, &cfg, 4).unwrap();
        assert_eq!(d.behaviors[0], Behavior::Greedy);
        assert_eq!(d.behaviors[1], Behavior::Greedy);
        assert_eq!(d.behaviors[2], Behavior::Explore);
        assert_eq!(d.behaviors[3], Behavior::Explore);
        assert_eq!(d.recording_agents, BTreeSet::from([2]));
        assert_eq!(d.learning_agents.len(), 4);
    }

    #[test]
    fn espc_shrinks_learners_and_precollects() {
        let cfg = ScheduleConfig::roma_espc(3000, 2, 3).unwrap();
        assert_eq!(cfg.t_u, 500); // t_star = 1000, 2 rounds
        let d = directive_at(1500, &cfg, 3).unwrap();
        // Agent 0 stopped learning at t = 1000.
        assert_eq!(d.learning_agents, BTreeSet::from([1, 2]));
        let c = collector_at(1500, &cfg, 3).unwrap();
        assert_eq!(d.recording_agents, BTreeSet::from([c, (c + 1) % 3]));
        // Agent K-1 learns through t_max.
        let d = directive_at(3000, &cfg, 3).unwrap();
        assert!(d.learning_agents.contains(&2));
    }

    #[test]
    fn espc_rejects_bad_divisibility() {
        assert!(ScheduleConfig::roma_espc(1000, 3, 3).is_err());
        assert!(ScheduleConfig::roma_espc(999, 1, 2).is_err());
    }

    #[test]
    fn roma_turns_partition_the_budget() {
        let cfg = ScheduleConfig::roma(3000, 100);
        let k = 3;
        let mut steps_as_collector = vec![0usize; k];
        for t in 1..=cfg.t_max {
            steps_as_collector[collector_at(t, &cfg, k).unwrap()] += 1;
        }
        assert_eq!(steps_as_collector, vec![1000, 1000, 1000]);
    }
}
