//! Seeded experiment orchestration: builds game, learners, and scheduler
//! from a config, runs the interaction/learning loop, periodically evaluates
//! the frozen greedy joint policy, and persists metrics as CSV.
//!
//! Determinism contract: one run is one isolated world seeded with
//! `base_seed + run`; the same config always produces a byte-identical
//! metrics file.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use thiserror::Error;

use crate::envs::{
    build_single_agent_chain, build_staged_game, build_two_optima_matrix_game, StagedGameSpec,
};
use crate::learners::{
    Behavior, CentralLearner, CentralMode, DecentralizedLearner, Hyperparams, IndqLearner,
    IqssLearner, Learner,
};
use crate::mdp::{Experience, GlobalTransition, JointAction, SimRng, StateId, TabularGame};
use crate::oracle::{joint_value_iteration, JointSolution};
use crate::schedule::{directive_at, Mode, ScheduleConfig};

pub const METRICS_HEADER: &str = "run,seed,t,eval_return,reached_optimum,aligned";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid config:\n{}", .0.join("\n"))]
    Config(Vec<String>),
    #[error("runtime error: {0}")]
    Runtime(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LearnerKind {
    Iqss,
    Indq,
    Cenq,
    Cqss,
}

impl LearnerKind {
    pub fn is_centralized(&self) -> bool {
        matches!(self, LearnerKind::Cenq | LearnerKind::Cqss)
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            LearnerKind::Iqss => "iqss",
            LearnerKind::Indq => "indq",
            LearnerKind::Cenq => "cenq",
            LearnerKind::Cqss => "cqss",
        }
    }
}

#[derive(Debug, Clone)]
pub enum GameConfig {
    TwoOptima,
    Staged(StagedGameSpec),
    Chain(usize),
    File(PathBuf),
}

impl GameConfig {
    pub fn build(&self) -> Result<TabularGame<f64>, HarnessError> {
        match self {
            GameConfig::TwoOptima => Ok(build_two_optima_matrix_game()),
            GameConfig::Staged(spec) => build_staged_game(spec)
                .map_err(|e| HarnessError::Config(vec![format!("game: {e}")])),
            GameConfig::Chain(n) => build_single_agent_chain(*n)
                .map_err(|e| HarnessError::Config(vec![format!("game: {e}")])),
            GameConfig::File(path) => TabularGame::load(path)
                .map_err(|e| HarnessError::Config(vec![format!("game file: {e}")])),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub game: GameConfig,
    pub mode: Mode,
    pub learner: LearnerKind,
    pub hp: Hyperparams<f64>,
    pub t_max: usize,
    pub t_u: usize,
    pub n_rounds: usize,
    pub eval_every: usize,
    pub eval_episodes: usize,
    pub num_runs: usize,
    pub base_seed: u64,
    /// Output stem, e.g. `roma-iqss`.
    pub name: String,
}

impl ExperimentConfig {
    pub fn new(game: GameConfig, mode: Mode, learner: LearnerKind, t_max: usize) -> Self {
        let mode_name = match mode {
            Mode::Sma => "sma",
            Mode::Roma => "roma",
            Mode::RomaEspc => "roma_espc",
        };
        ExperimentConfig {
            game,
            mode,
            learner,
            hp: Hyperparams::default(),
            t_max,
            t_u: 500,
            n_rounds: 1,
            eval_every: (t_max / 100).max(1),
            eval_episodes: 1,
            num_runs: 15,
            base_seed: 0,
            name: format!("{mode_name}-{}", learner.as_str()),
        }
    }

    pub fn schedule(&self, num_agents: usize) -> Result<ScheduleConfig, HarnessError> {
        let cfg = match self.mode {
            Mode::Sma => ScheduleConfig::sma(self.t_max),
            Mode::Roma => ScheduleConfig::roma(self.t_max, self.t_u),
            Mode::RomaEspc => ScheduleConfig::roma_espc(self.t_max, self.n_rounds, num_agents)
                .map_err(|e| HarnessError::Config(vec![format!("schedule: {e}")]))?,
        };
        cfg.validate(num_agents)
            .map_err(|e| HarnessError::Config(vec![format!("schedule: {e}")]))?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let mut issues = Vec::new();
        if let Err(e) = self.hp.validate() {
            issues.push(format!("hyperparams: {e}"));
        }
        if self.learner.is_centralized() && self.mode != Mode::Sma {
            issues.push(
                "learner: centralized baselines (cenq/cqss) are only valid with mode = sma"
                    .to_string(),
            );
        }
        if self.num_runs == 0 {
            issues.push("num_runs: must be >= 1".to_string());
        }
        if self.eval_every == 0 {
            issues.push("eval_every: must be >= 1".to_string());
        }
        if self.eval_episodes == 0 {
            issues.push("eval_episodes: must be >= 1".to_string());
        }
        if self.mode.is_round_robin() && self.t_u == 0 {
            issues.push("t_u: must be >= 1".to_string());
        }
        if issues.is_empty() {
            Ok(())
        } else {
            Err(HarnessError::Config(issues))
        }
    }

    /// Parses the flat `key = value` config format. Unknown keys and bad
    /// values are all collected into one structured error.
    pub fn from_text(text: &str) -> Result<Self, HarnessError> {
        let mut kv: BTreeMap<String, String> = BTreeMap::new();
        let mut issues = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            match line.split_once('=') {
                Some((k, v)) => {
                    kv.insert(k.trim().to_string(), v.trim().to_string());
                }
                None => issues.push(format!("line {}: expected `key = value`", i + 1)),
            }
        }

        fn take<T: std::str::FromStr>(
            kv: &mut BTreeMap<String, String>,
            key: &str,
            default: T,
            issues: &mut Vec<String>,
        ) -> T {
            match kv.remove(key) {
                None => default,
                Some(v) => v.parse().unwrap_or_else(|_| {
                    issues.push(format!("{key}: cannot parse `{v}`"));
                    default
                }),
            }
        }

        let game = match kv.remove("game").as_deref() {
            Some("two_optima") => GameConfig::TwoOptima,
            Some("staged") => {
                let agents = take(&mut kv, "agents", 3usize, &mut issues);
                let mut spec = StagedGameSpec::new(agents);
                spec.num_stages = take(&mut kv, "stages", spec.num_stages, &mut issues);
                spec.actions_per_stage =
                    take(&mut kv, "stage_actions", spec.actions_per_stage, &mut issues);
                spec.optimal_paths = StagedGameSpec::default_paths(agents, spec.num_stages);
                spec.reward_success =
                    take(&mut kv, "reward_success", spec.reward_success, &mut issues);
                spec.reward_divergent =
                    take(&mut kv, "reward_divergent", spec.reward_divergent, &mut issues);
                spec.suboptimal_reward_range = (
                    take(&mut kv, "suboptimal_low", 0.0, &mut issues),
                    take(&mut kv, "suboptimal_high", 10.0, &mut issues),
                );
                spec.rng_seed = take(&mut kv, "game_seed", 0u64, &mut issues);
                GameConfig::Staged(spec)
            }
            Some("chain") => GameConfig::Chain(take(&mut kv, "chain_n", 5usize, &mut issues)),
            Some(other) => {
                issues.push(format!("game: unknown builder `{other}`"));
                GameConfig::TwoOptima
            }
            None => match kv.remove("game_file") {
                Some(p) => GameConfig::File(PathBuf::from(p)),
                None => {
                    issues.push("game: missing (two_optima | staged | chain), or game_file".into());
                    GameConfig::TwoOptima
                }
            },
        };

        let mode = match kv.remove("mode").as_deref() {
            Some("sma") | None => Mode::Sma,
            Some("roma") => Mode::Roma,
            Some("roma_espc") => Mode::RomaEspc,
            Some(other) => {
                issues.push(format!("mode: unknown `{other}` (sma | roma | roma_espc)"));
                Mode::Sma
            }
        };
        let learner = match kv.remove("learner").as_deref() {
            Some("iqss") | None => LearnerKind::Iqss,
            Some("indq") => LearnerKind::Indq,
            Some("cenq") => LearnerKind::Cenq,
            Some("cqss") => LearnerKind::Cqss,
            Some(other) => {
                issues.push(format!("learner: unknown `{other}` (iqss | indq | cenq | cqss)"));
                LearnerKind::Iqss
            }
        };

        let t_max = take(&mut kv, "t_max", 4000usize, &mut issues);
        let mut cfg = ExperimentConfig::new(game, mode, learner, t_max);
        cfg.hp.alpha = take(&mut kv, "alpha", cfg.hp.alpha, &mut issues);
        cfg.hp.gamma = take(&mut kv, "gamma", cfg.hp.gamma, &mut issues);
        cfg.hp.epsilon = take(&mut kv, "epsilon", cfg.hp.epsilon, &mut issues);
        cfg.hp.delta = take(&mut kv, "delta", cfg.hp.delta, &mut issues);
        cfg.hp.decay = take(&mut kv, "decay", cfg.hp.decay, &mut issues);
        cfg.hp.batch_size = take(&mut kv, "batch_size", cfg.hp.batch_size, &mut issues);
        cfg.t_u = take(&mut kv, "t_u", cfg.t_u, &mut issues);
        cfg.n_rounds = take(&mut kv, "n_rounds", cfg.n_rounds, &mut issues);
        cfg.eval_every = take(&mut kv, "eval_every", cfg.eval_every, &mut issues);
        cfg.eval_episodes = take(&mut kv, "eval_episodes", cfg.eval_episodes, &mut issues);
        cfg.num_runs = take(&mut kv, "num_runs", cfg.num_runs, &mut issues);
        cfg.base_seed = take(&mut kv, "base_seed", cfg.base_seed, &mut issues);
        if let Some(name) = kv.remove("name") {
            cfg.name = name;
        }

        for key in kv.keys() {
            issues.push(format!("{key}: unknown key"));
        }
        if !issues.is_empty() {
            return Err(HarnessError::Config(issues));
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// One evaluation point of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub run: usize,
    pub seed: u64,
    pub t: usize,
    pub eval_return: f64,
    pub reached_optimum: bool,
    pub aligned: bool,
}

impl MetricsRow {
    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.run, self.seed, self.t, self.eval_return, self.reached_optimum, self.aligned
        )
    }

    pub fn from_csv_line(line: &str) -> Option<Self> {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 6 {
            return None;
        }
        Some(MetricsRow {
            run: f[0].parse().ok()?,
            seed: f[1].parse().ok()?,
            t: f[2].parse().ok()?,
            eval_return: f[3].parse().ok()?,
            reached_optimum: f[4].parse().ok()?,
            aligned: f[5].parse().ok()?,
        })
    }
}

/// The mutable learning state of one run.
pub enum World {
    Decentralized(Vec<DecentralizedLearner<f64>>),
    Centralized(CentralLearner<f64>),
}

impl World {
    fn new(cfg: &ExperimentConfig, game: &TabularGame<f64>) -> Self {
        let terminal: Vec<bool> = (0..game.num_states()).map(|s| game.is_terminal(s)).collect();
        match cfg.learner {
            LearnerKind::Iqss => World::Decentralized(
                (0..game.num_agents())
                    .map(|k| {
                        DecentralizedLearner::Iqss(IqssLearner::new(
                            game.num_states(),
                            game.num_actions(k),
                            terminal.clone(),
                            cfg.hp,
                        ))
                    })
                    .collect(),
            ),
            LearnerKind::Indq => World::Decentralized(
                (0..game.num_agents())
                    .map(|k| {
                        DecentralizedLearner::Indq(IndqLearner::new(
                            game.num_states(),
                            game.num_actions(k),
                            terminal.clone(),
                            cfg.hp,
                        ))
                    })
                    .collect(),
            ),
            LearnerKind::Cenq | LearnerKind::Cqss => {
                let mode = if cfg.learner == LearnerKind::Cenq {
                    CentralMode::CenQ
                } else {
                    CentralMode::Cqss
                };
                World::Centralized(CentralLearner::new(
                    mode,
                    game.num_states(),
                    game.actions_per_agent().to_vec(),
                    terminal,
                    cfg.hp,
                ))
            }
        }
    }

    /// Joint action under the per-agent behavior assignment.
    fn select_joint(&self, s: StateId, behaviors: &[Behavior], rng: &mut SimRng) -> JointAction {
        match self {
            World::Decentralized(learners) => JointAction(
                learners
                    .iter()
                    .zip(behaviors)
                    .map(|(l, &b)| l.select_action(s, b, rng))
                    .collect(),
            ),
            // Central baselines run under SMA only; all agents share the
            // controller's behavior.
            World::Centralized(c) => c.select_joint(s, behaviors[0], rng),
        }
    }

    /// Frozen greedy joint action.
    pub fn greedy_joint(&self, s: StateId) -> JointAction {
        match self {
            World::Decentralized(learners) => {
                JointAction(learners.iter().map(|l| l.greedy_action(s)).collect())
            }
            World::Centralized(c) => c.greedy_joint(s),
        }
    }

    /// Full induction pass on every learner, before greedy evaluation.
    pub fn freeze(&mut self) {
        if let World::Decentralized(learners) = self {
            for l in learners.iter_mut() {
                l.induce();
            }
        }
    }

    pub fn learners(&self) -> Option<&[DecentralizedLearner<f64>]> {
        match self {
            World::Decentralized(l) => Some(l),
            World::Centralized(_) => None,
        }
    }
}

/// One finished run: its metric rows plus the final world for inspection.
pub struct RunOutcome {
    pub run: usize,
    pub seed: u64,
    pub rows: Vec<MetricsRow>,
    pub world: World,
}

/// Mean undiscounted return of `episodes` greedy joint rollouts. The game
/// is deterministic and greedy policies consume no randomness, so every
/// episode is identical.
pub fn evaluate_greedy(world: &World, game: &TabularGame<f64>, episodes: usize) -> f64 {
    let mut total = 0.0;
    for _ in 0..episodes {
        let (_, ret) = greedy_rollout(world, game);
        total += ret;
    }
    total / episodes as f64
}

/// Greedy rollout returning the visited non-terminal states and the return.
pub fn greedy_rollout(world: &World, game: &TabularGame<f64>) -> (Vec<StateId>, f64) {
    let mut s = game.initial_state();
    let mut visited = Vec::new();
    let mut total = 0.0;
    for _ in 0..game.horizon() {
        if game.is_terminal(s) {
            break;
        }
        visited.push(s);
        let joint = world.greedy_joint(s);
        let (s_next, r) = game.step(s, &joint).expect("greedy action in range");
        total += r;
        s = s_next;
    }
    (visited, total)
}

/// Oracle-side flags for one evaluation point.
///
/// `aligned`: the greedy rollout return matches the optimal undiscounted
/// return. `reached_optimum`: at every state on the rollout, each agent's
/// greedy action extends to some optimal joint action.
fn eval_flags(
    world: &World,
    game: &TabularGame<f64>,
    undiscounted: &JointSolution<f64>,
    rollout_states: &[StateId],
    eval_return: f64,
) -> (bool, bool) {
    let tol = 1e-6;
    let aligned = (eval_return - undiscounted.v_star[game.initial_state()]).abs() <= tol;
    let nj = game.num_joint_actions();
    let mut reached = true;
    'states: for &s in rollout_states {
        let greedy = world.greedy_joint(s);
        for k in 0..game.num_agents() {
            let a_k = greedy.0[k];
            let extends = (0..nj).any(|j| {
                let joint = game.joint_from_index(j);
                joint.0[k] == a_k
                    && (undiscounted.v_star[s] - undiscounted.q_star[s * nj + j]).abs() <= tol
            });
            if !extends {
                reached = false;
                break 'states;
            }
        }
    }
    (aligned, reached)
}

/// Executes one seeded run of the interaction/learning loop.
pub fn run_single(
    cfg: &ExperimentConfig,
    game: &TabularGame<f64>,
    undiscounted: &JointSolution<f64>,
    run: usize,
) -> Result<RunOutcome, HarnessError> {
    let schedule = cfg.schedule(game.num_agents())?;
    let seed = cfg.base_seed + run as u64;
    let mut rng = SimRng::seed_from_u64(seed);
    let mut world = World::new(cfg, game);
    // Each agent draws a private tie-breaking salt for this run.
    if let World::Decentralized(learners) = &mut world {
        for l in learners.iter_mut() {
            let salt = rand::Rng::gen(&mut rng);
            l.set_salt(salt);
        }
    }
    let mut rows = Vec::new();

    let mut s = game.initial_state();
    let mut steps_in_episode = 0usize;
    for t in 1..=cfg.t_max {
        let directive = directive_at(t, &schedule, game.num_agents())
            .map_err(|e| HarnessError::Runtime(e.to_string()))?;
        let joint = world.select_joint(s, &directive.behaviors, &mut rng);
        let (s_next, r) = game
            .step(s, &joint)
            .map_err(|e| HarnessError::Runtime(e.to_string()))?;

        match &mut world {
            World::Decentralized(learners) => {
                // Recording agents store only their own-action projection.
                for &k in &directive.recording_agents {
                    learners[k].record(Experience {
                        s,
                        action: joint.0[k],
                        s_next,
                        reward: r,
                    });
                }
                for &k in &directive.learning_agents {
                    learners[k].learn(&mut rng);
                }
            }
            World::Centralized(central) => {
                central.record_global(GlobalTransition {
                    s,
                    joint: joint.clone(),
                    s_next,
                    reward: r,
                });
                central.learn(&mut rng);
            }
        }

        steps_in_episode += 1;
        if game.is_terminal(s_next) || steps_in_episode >= game.horizon() {
            s = game.initial_state();
            steps_in_episode = 0;
        } else {
            s = s_next;
        }

        if t % cfg.eval_every == 0 {
            world.freeze();
            let (rollout_states, _) = greedy_rollout(&world, game);
            let eval_return = evaluate_greedy(&world, game, cfg.eval_episodes);
            let (aligned, reached) =
                eval_flags(&world, game, undiscounted, &rollout_states, eval_return);
            rows.push(MetricsRow {
                run,
                seed,
                t,
                eval_return,
                reached_optimum: reached,
                aligned,
            });
        }
    }
    world.freeze();
    Ok(RunOutcome { run, seed, rows, world })
}

/// Runs all seeds of an experiment in memory.
pub fn run_all(cfg: &ExperimentConfig) -> Result<Vec<RunOutcome>, HarnessError> {
    cfg.validate()?;
    let game = cfg.game.build()?;
    let undiscounted = joint_value_iteration(&game, 1.0, 1e-9)
        .map_err(|e| HarnessError::Runtime(format!("oracle solve failed: {e}")))?;
    (0..cfg.num_runs).map(|run| run_single(cfg, &game, &undiscounted, run)).collect()
}

/// Runs the experiment and writes `<out_dir>/<name>.csv`. Returns the
/// metrics path and the run outcomes.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    out_dir: &Path,
) -> Result<(PathBuf, Vec<RunOutcome>), HarnessError> {
    let outcomes = run_all(cfg)?;
    std::fs::create_dir_all(out_dir)?;
    let path = out_dir.join(format!("{}.csv", cfg.name));
    let mut text = String::from(METRICS_HEADER);
    text.push('\n');
    for outcome in &outcomes {
        for row in &outcome.rows {
            text.push_str(&row.to_csv_line());
            text.push('\n');
        }
    }
    std::fs::write(&path, text)?;
    Ok((path, outcomes))
}

/// Per-source aggregate at one evaluation step.
#[derive(Debug, Clone)]
pub struct SummaryRow {
    pub source: String,
    pub t: usize,
    pub mean_return: f64,
    pub std_return: f64,
    pub align_rate: f64,
}

/// Aggregates every metrics CSV in `in_dir` into mean/std curves and
/// alignment rates; writes `summary.csv` and optionally a line plot SVG.
pub fn summarize(in_dir: &Path, plot: bool) -> Result<PathBuf, HarnessError> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(in_dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| {
            p.extension().is_some_and(|ext| ext == "csv")
                && p.file_name().is_some_and(|n| n != "summary.csv")
        })
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(HarnessError::Runtime(format!(
            "no metrics files found in {}",
            in_dir.display()
        )));
    }

    let mut summaries: Vec<SummaryRow> = Vec::new();
    let mut curves: Vec<(String, Vec<(usize, f64)>)> = Vec::new();
    for path in &files {
        let source = path.file_stem().unwrap().to_string_lossy().to_string();
        let text = std::fs::read_to_string(path)?;
        let mut lines = text.lines();
        let header = lines.next().unwrap_or("");
        if header != METRICS_HEADER {
            return Err(HarnessError::Runtime(format!(
                "{}: unexpected header `{header}` (want `{METRICS_HEADER}`)",
                path.display()
            )));
        }
        let mut by_t: BTreeMap<usize, Vec<MetricsRow>> = BTreeMap::new();
        for (i, line) in lines.enumerate() {
            let row = MetricsRow::from_csv_line(line).ok_or_else(|| {
                HarnessError::Runtime(format!("{}: bad row at line {}", path.display(), i + 2))
            })?;
            by_t.entry(row.t).or_default().push(row);
        }
        let mut curve = Vec::new();
        for (t, rows) in &by_t {
            let n = rows.len() as f64;
            let mean = rows.iter().map(|r| r.eval_return).sum::<f64>() / n;
            let var = rows.iter().map(|r| (r.eval_return - mean).powi(2)).sum::<f64>() / n;
            let aligned = rows.iter().filter(|r| r.aligned).count() as f64 / n;
            summaries.push(SummaryRow {
                source: source.clone(),
                t: *t,
                mean_return: mean,
                std_return: var.sqrt(),
                align_rate: aligned,
            });
            curve.push((*t, mean));
        }
        curves.push((source, curve));
    }

    let mut text = String::from("source,t,mean_return,std_return,align_rate\n");
    for row in &summaries {
        let _ = writeln!(
            text,
            "{},{},{},{},{}",
            row.source, row.t, row.mean_return, row.std_return, row.align_rate
        );
    }
    let out = in_dir.join("summary.csv");
    std::fs::write(&out, text)?;

    if plot {
        let svg = crate::plot::line_plot(&curves, "t", "mean eval return");
        std::fs::write(in_dir.join("summary.svg"), svg)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_cfg() -> ExperimentConfig {
        let mut cfg =
            ExperimentConfig::new(GameConfig::TwoOptima, Mode::Sma, LearnerKind::Iqss, 200);
        cfg.num_runs = 2;
        cfg.eval_every = 50;
        cfg
    }

    #[test]
    fn config_round_trip_from_text() {
        let text = "\
# demo
game = two_optima
mode = roma
learner = iqss
t_max = 4000
t_u = 500
epsilon = 0.8
num_runs = 15
base_seed = 7
";
        let cfg = ExperimentConfig::from_text(text).unwrap();
        assert_eq!(cfg.mode, Mode::Roma);
        assert_eq!(cfg.learner, LearnerKind::Iqss);
        assert_eq!(cfg.t_u, 500);
        assert_eq!(cfg.base_seed, 7);
        assert_eq!(cfg.name, "roma-iqss");
    }

    #[test]
    fn config_errors_list_fields() {
        let text = "\
game = staged
mode = roma
learner = cenq
alpha = banana
bogus_key = 3
";
        let err = ExperimentConfig::from_text(text).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("alpha"), "{msg}");
        assert!(msg.contains("bogus_key"), "{msg}");
    }

    #[test]
    fn centralized_requires_sma() {
        let cfg = ExperimentConfig::new(GameConfig::TwoOptima, Mode::Roma, LearnerKind::Cenq, 100);
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("centralized"), "{err}");
    }

    #[test]
    fn zero_budget_yields_header_only() {
        let mut cfg = tiny_cfg();
        cfg.t_max = 0;
        cfg.eval_every = 1;
        let dir = tempfile::tempdir().unwrap();
        let (path, outcomes) = run_experiment(&cfg, dir.path()).unwrap();
        let text = std::fs::read_to_string(path).unwrap();
        assert_eq!(text, format!("{METRICS_HEADER}\n"));
        assert!(outcomes.iter().all(|o| o.rows.is_empty()));
    }

    #[test]
    fn metrics_are_byte_identical_across_reruns() {
        let cfg = tiny_cfg();
        let dir1 = tempfile::tempdir().unwrap();
        let dir2 = tempfile::tempdir().unwrap();
        let (p1, _) = run_experiment(&cfg, dir1.path()).unwrap();
        let (p2, _) = run_experiment(&cfg, dir2.path()).unwrap();
        assert_eq!(std::fs::read(p1).unwrap(), std::fs::read(p2).unwrap());
    }

    #[test]
    fn per_agent_models_diverge() {
        // Decentralization: each agent's model reflects only its own action
        // stream, so the two models differ on a run of the two-optima game.
        let cfg = tiny_cfg();
        let outcomes = run_all(&cfg).unwrap();
        let learners = outcomes[0].world.learners().unwrap();
        let dumps: Vec<String> = learners
            .iter()
            .map(|l| match l {
                DecentralizedLearner::Iqss(l) => l.model().dump(),
                DecentralizedLearner::Indq(_) => unreachable!(),
            })
            .collect();
        assert_ne!(dumps[0], dumps[1]);
    }

    #[test]
    fn summarize_single_run_has_zero_std() {
        let mut cfg = tiny_cfg();
        cfg.num_runs = 1;
        let dir = tempfile::tempdir().unwrap();
        run_experiment(&cfg, dir.path()).unwrap();
        let out = summarize(dir.path(), false).unwrap();
        let text = std::fs::read_to_string(out).unwrap();
        for line in text.lines().skip(1) {
            let std_return: f64 = line.split(',').nth(3).unwrap().parse().unwrap();
            assert_eq!(std_return, 0.0);
        }
    }

    #[test]
    fn summarize_rejects_schema_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("bad.csv"), "nope,nope\n1,2\n").unwrap();
        let err = summarize(dir.path(), false).unwrap_err();
        assert!(err.to_string().contains("bad.csv"), "{err}");
    }
}
