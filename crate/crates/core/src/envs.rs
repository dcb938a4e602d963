//! Builders for the coordination environments and for small diagnostic games
//! used by oracle-based tests.
//!
//! All builders are pure: the same spec and seed produce the identical game.

use rand::{Rng, SeedableRng};

use crate::mdp::{ActionId, GameBuilder, GameError, SimRng, StateId, TabularGame};
use crate::scalar::Scalar;

/// Two-agent, one-shot matrix game with two aligned optima.
///
/// Actions are L = 0 and R = 1. (L,L) and (R,R) pay `100`; mixed pairs pay
/// `-200`. States: `start` plus four terminal destinations labeled by the
/// joint choice.
pub fn build_two_optima_matrix_game<F: Scalar>() -> TabularGame<F> {
    let mut b = GameBuilder::new(2, 5, vec![2, 2], 0, 1);
    b.set_label(0, "start");
    let dests = [(0, 0, 1, "dest_LL"), (0, 1, 2, "dest_LR"), (1, 0, 3, "dest_RL"), (1, 1, 4, "dest_RR")];
    for &(a0, a1, s, name) in &dests {
        let r = if a0 == a1 { 100.0 } else { -200.0 };
        b.set_terminal(s);
        b.set_label(s, name);
        b.add_transition(0, &[a0, a1], s, F::from_f64_lossy(r)).unwrap();
    }
    b.build().expect("two-optima game is well-formed")
}

/// Specification of the multi-stage coordination game.
///
/// Exactly two joint strategies (the two optimal paths) pay
/// `reward_success` at the end. Reaching the end on a mixture of the two
/// paths pays `reward_divergent`. Trajectories that leave both paths end in
/// a terminal whose reward is drawn once, at build time, from
/// `suboptimal_reward_range`.
#[derive(Debug, Clone)]
pub struct StagedGameSpec {
    pub num_agents: usize,
    pub num_stages: usize,
    pub actions_per_stage: usize,
    /// Two joint-action sequences, `optimal_paths[p][stage][agent]`.
    pub optimal_paths: [Vec<Vec<ActionId>>; 2],
    pub reward_success: f64,
    pub reward_divergent: f64,
    pub suboptimal_reward_range: (f64, f64),
    pub rng_seed: u64,
}

impl StagedGameSpec {
    /// Default spec: 3 stages, 3 actions per stage, rewards 100 / -200 /
    /// [0, 10]. The two optimal paths are symmetric minimal deviations from
    /// the all-zeros joint action: at each stage a small set of
    /// distinguished agents plays action 1 on path A or action 2 on path B
    /// while everyone else plays 0. The first stage distinguishes two agents
    /// (agents 0 and 1), so committing to an optimum is a genuine
    /// simultaneous-coordination choice; later stages distinguish one agent
    /// each, rotating through the team. Both paths are mirror images under
    /// swapping actions 1 and 2, so neither enjoys a head start from
    /// default behavior and the all-zeros joint action is plainly off-path.
    pub fn new(num_agents: usize) -> Self {
        let num_stages = 3;
        let [path_a, path_b] = Self::default_paths(num_agents, num_stages);
        StagedGameSpec {
            num_agents,
            num_stages,
            actions_per_stage: 3,
            optimal_paths: [path_a, path_b],
            reward_success: 100.0,
            reward_divergent: -200.0,
            suboptimal_reward_range: (0.0, 10.0),
            rng_seed: 0,
        }
    }

    /// The default symmetric minimal-deviation paths for an arbitrary shape
    /// (see [`StagedGameSpec::new`]).
    pub fn default_paths(num_agents: usize, num_stages: usize) -> [Vec<Vec<ActionId>>; 2] {
        let mut path_a = vec![vec![0; num_agents]; num_stages];
        let mut path_b = vec![vec![0; num_agents]; num_stages];
        for m in 0..num_stages {
            let deviators: &[usize] =
                if m == 0 { &[0, 1 % num_agents] } else { &[(m + 1) % num_agents] };
            for &d in deviators {
                path_a[m][d] = 1;
                path_b[m][d] = 2;
            }
        }
        [path_a, path_b]
    }

    fn validate(&self) -> Result<(), GameError> {
        let inv = |msg: String| Err(GameError::Invalid(msg));
        if self.num_agents == 0 || self.num_stages == 0 {
            return inv("num_agents and num_stages must be positive".into());
        }
        if self.actions_per_stage < 2 {
            return inv("actions_per_stage must be at least 2".into());
        }
        let [a, b] = &self.optimal_paths;
        if a.len() != self.num_stages || b.len() != self.num_stages {
            return inv(format!("optimal paths must have {} stages", self.num_stages));
        }
        for m in 0..self.num_stages {
            if a[m].len() != self.num_agents || b[m].len() != self.num_agents {
                return inv(format!("stage {m}: path entries must list {} agents", self.num_agents));
            }
            for k in 0..self.num_agents {
                if a[m][k] >= self.actions_per_stage || b[m][k] >= self.actions_per_stage {
                    return inv(format!("stage {m}: path action out of range for agent {k}"));
                }
            }
            if a[m] == b[m] {
                return inv(format!(
                    "optimal paths must differ at every stage; \
                     stage {m} has identical joint actions {:?}",
                    a[m]
                ));
            }
        }
        let (lo, hi) = self.suboptimal_reward_range;
        if !(lo <= hi) {
            return inv("suboptimal_reward_range low must be <= high".into());
        }
        if !(self.reward_success > hi && hi > self.reward_divergent) {
            return inv("require reward_success > suboptimal high > reward_divergent".into());
        }
        Ok(())
    }
}

/// Progress class of a partial trajectory through the staged game.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Progress {
    OnA,
    OnB,
    /// Every agent has only played on-path actions, but the trajectory is
    /// not a single pure path: the divergent-optima case.
    Mixed,
    /// Some agent left both paths; `usize` is the 1-based stage it happened.
    Off(usize),
}

/// Builds the staged coordination game.
///
/// State space is `(stage, progress class)` with one start state and one
/// terminal per final class, so state counts stay small regardless of
/// agent count.
pub fn build_staged_game<F: Scalar>(spec: &StagedGameSpec) -> Result<TabularGame<F>, GameError> {
    spec.validate()?;
    let stages = spec.num_stages;
    let k = spec.num_agents;
    let [path_a, path_b] = &spec.optimal_paths;

    // State numbering: start = 0; intermediate states per stage m in
    // 1..stages: OnA, OnB, Mixed, Off(1..=m); terminals at the end:
    // done_a, done_b, done_mixed, done_off(1..=stages).
    let mut next_id = 1;
    let mut inter = vec![std::collections::HashMap::new(); stages];
    for (m, map) in inter.iter_mut().enumerate().skip(1) {
        for p in [Progress::OnA, Progress::OnB, Progress::Mixed] {
            map.insert(progress_key(p), next_id);
            next_id += 1;
        }
        for f in 1..=m {
            map.insert(progress_key(Progress::Off(f)), next_id);
            next_id += 1;
        }
    }
    let done_a = next_id;
    let done_b = next_id + 1;
    let done_mixed = next_id + 2;
    let done_off_base = next_id + 3; // done_off(f) = done_off_base + f - 1
    let num_states = done_off_base + stages;

    let mut rng = SimRng::seed_from_u64(spec.rng_seed);
    let (lo, hi) = spec.suboptimal_reward_range;
    let off_rewards: Vec<f64> =
        (0..stages).map(|_| if lo == hi { lo } else { rng.gen_range(lo..=hi) }).collect();

    let mut b = GameBuilder::new(k, num_states, vec![spec.actions_per_stage; k], 0, stages);
    b.set_label(0, "start");
    for (m, map) in inter.iter().enumerate().skip(1) {
        let mut entries: Vec<_> = map.iter().collect();
        entries.sort_by_key(|(_, &id)| id);
        for (key, &id) in entries {
            b.set_label(id, &format!("{key}_{m}"));
        }
    }
    for (s, name) in [(done_a, "done_a"), (done_b, "done_b"), (done_mixed, "done_mixed")] {
        b.set_terminal(s);
        b.set_label(s, name);
    }
    for f in 1..=stages {
        let s = done_off_base + f - 1;
        b.set_terminal(s);
        b.set_label(s, &format!("done_off_{f}"));
    }

    // Classification of one joint action at stage m.
    let classify = |joint: &[ActionId], m: usize| -> Progress {
        if joint == path_a[m].as_slice() {
            return Progress::OnA;
        }
        if joint == path_b[m].as_slice() {
            return Progress::OnB;
        }
        let on_path =
            joint.iter().enumerate().all(|(i, &a)| a == path_a[m][i] || a == path_b[m][i]);
        if on_path {
            Progress::Mixed
        } else {
            Progress::Off(m + 1)
        }
    };

    let combine = |current: Progress, step: Progress| -> Progress {
        match (current, step) {
            (Progress::Off(f), _) => Progress::Off(f),
            (_, Progress::Off(f)) => Progress::Off(f),
            (Progress::OnA, Progress::OnA) => Progress::OnA,
            (Progress::OnB, Progress::OnB) => Progress::OnB,
            _ => Progress::Mixed,
        }
    };

    let num_joint = (spec.actions_per_stage as u64).pow(k as u32) as usize;
    let joint_of = |mut idx: usize| -> Vec<ActionId> {
        let mut rev = Vec::with_capacity(k);
        for _ in 0..k {
            rev.push(idx % spec.actions_per_stage);
            idx /= spec.actions_per_stage;
        }
        rev.reverse();
        rev
    };

    // Enumerate (state at stage m, joint action) pairs.
    for m in 0..stages {
        let sources: Vec<(StateId, Progress)> = if m == 0 {
            vec![(0, Progress::OnA)] // placeholder class, ignored below
        } else {
            let mut v: Vec<(StateId, Progress)> = Vec::new();
            for p in [Progress::OnA, Progress::OnB, Progress::Mixed] {
                v.push((inter[m][&progress_key(p)], p));
            }
            for f in 1..=m {
                v.push((inter[m][&progress_key(Progress::Off(f))], Progress::Off(f)));
            }
            v
        };
        for (s, current) in sources {
            for j in 0..num_joint {
                let joint = joint_of(j);
                let step = classify(&joint, m);
                let next = if m == 0 { step } else { combine(current, step) };
                let final_stage = m + 1 == stages;
                let (s_next, r) = if final_stage {
                    match next {
                        Progress::OnA => (done_a, spec.reward_success),
                        Progress::OnB => (done_b, spec.reward_success),
                        Progress::Mixed => (done_mixed, spec.reward_divergent),
                        Progress::Off(f) => (done_off_base + f - 1, off_rewards[f - 1]),
                    }
                } else {
                    (inter[m + 1][&progress_key(next)], 0.0)
                };
                b.add_transition(s, &joint, s_next, F::from_f64_lossy(r))?;
            }
        }
    }
    b.build()
}

fn progress_key(p: Progress) -> String {
    match p {
        Progress::OnA => "on_a".into(),
        Progress::OnB => "on_b".into(),
        Progress::Mixed => "mixed".into(),
        Progress::Off(f) => format!("off{f}"),
    }
}

/// Single-agent chain of `n` states: action 0 advances, action 1 stays.
/// Reaching the last state pays `+1`; everything else pays `0`.
pub fn build_single_agent_chain<F: Scalar>(n: usize) -> Result<TabularGame<F>, GameError> {
    if n < 2 {
        return Err(GameError::Invalid(format!("chain needs at least 2 states, got {n}")));
    }
    let mut b = GameBuilder::new(1, n, vec![2], 0, n);
    b.set_terminal(n - 1);
    for s in 0..n - 1 {
        let r = if s + 1 == n - 1 { 1.0 } else { 0.0 };
        b.add_transition(s, &[0], s + 1, F::from_f64_lossy(r))?;
        b.add_transition(s, &[1], s, F::from_f64_lossy(0.0))?;
    }
    b.build()
}

/// Parameters for `build_random_game`.
#[derive(Debug, Clone)]
pub struct RandomGameSpec {
    pub num_agents: usize,
    pub num_states: usize,
    pub max_actions: usize,
    pub terminal_fraction: f64,
    pub horizon: usize,
    pub reward_range: (f64, f64),
}

impl Default for RandomGameSpec {
    fn default() -> Self {
        RandomGameSpec {
            num_agents: 2,
            num_states: 20,
            max_actions: 3,
            terminal_fraction: 0.2,
            horizon: 50,
            reward_range: (-10.0, 10.0),
        }
    }
}

/// Random enumerable game for oracle and property tests. Deterministic in
/// `(spec, seed)`.
pub fn build_random_game<F: Scalar>(spec: &RandomGameSpec, seed: u64) -> TabularGame<F> {
    let mut rng = SimRng::seed_from_u64(seed);
    let actions: Vec<usize> =
        (0..spec.num_agents).map(|_| rng.gen_range(2..=spec.max_actions.max(2))).collect();
    let mut b = GameBuilder::new(spec.num_agents, spec.num_states, actions.clone(), 0, spec.horizon);
    // State 0 stays non-terminal so episodes always have somewhere to start.
    let mut terminal = vec![false; spec.num_states];
    for (s, t) in terminal.iter_mut().enumerate().skip(1) {
        if rng.gen_bool(spec.terminal_fraction) {
            *t = true;
            b.set_terminal(s);
        }
    }
    let num_joint: usize = actions.iter().product();
    let (lo, hi) = spec.reward_range;
    let mut rewards: std::collections::HashMap<(StateId, StateId), f64> =
        std::collections::HashMap::new();
    for s in 0..spec.num_states {
        if terminal[s] {
            continue;
        }
        for j in 0..num_joint {
            let mut idx = j;
            let mut rev = Vec::with_capacity(spec.num_agents);
            for &n in actions.iter().rev() {
                rev.push(idx % n);
                idx /= n;
            }
            rev.reverse();
            let s_next = rng.gen_range(0..spec.num_states);
            let r = *rewards.entry((s, s_next)).or_insert_with(|| rng.gen_range(lo..=hi));
            b.add_transition(s, &rev, s_next, F::from_f64_lossy(r)).unwrap();
        }
    }
    b.build().expect("random game is total by construction")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::JointAction;

    #[test]
    fn two_optima_rewards_match_structure() {
        let g: TabularGame<f64> = build_two_optima_matrix_game();
        let start = g.state_by_label("start").unwrap();
        assert_eq!(g.step(start, &JointAction(vec![0, 0])).unwrap().1, 100.0);
        assert_eq!(g.step(start, &JointAction(vec![1, 1])).unwrap().1, 100.0);
        assert_eq!(g.step(start, &JointAction(vec![0, 1])).unwrap().1, -200.0);
        assert_eq!(g.step(start, &JointAction(vec![1, 0])).unwrap().1, -200.0);
        assert_eq!(
            g.step(start, &JointAction(vec![0, 0])).unwrap().0,
            g.state_by_label("dest_LL").unwrap()
        );
    }

    #[test]
    fn staged_game_pays_success_on_both_paths() {
        let spec = StagedGameSpec::new(3);
        let g: TabularGame<f64> = build_staged_game(&spec).unwrap();
        for path in 0..2 {
            let mut s = g.initial_state();
            let mut total = 0.0;
            for m in 0..spec.num_stages {
                let joint = JointAction(spec.optimal_paths[path][m].clone());
                let (s_next, r) = g.step(s, &joint).unwrap();
                total += r;
                s = s_next;
            }
            assert!(g.is_terminal(s));
            assert_eq!(total, 100.0);
        }
    }

    #[test]
    fn staged_game_penalizes_path_mixtures_only() {
        let spec = StagedGameSpec::new(3);
        let g: TabularGame<f64> = build_staged_game(&spec).unwrap();
        // The stage-0 joint action follows path B, the rest follow path A:
        // a mixture of the two optimal paths, -200.
        let mut s = g.initial_state();
        let mut total = 0.0;
        for m in 0..3 {
            let path = if m == 0 { 1 } else { 0 };
            let joint = spec.optimal_paths[path][m].clone();
            let (s_next, r) = g.step(s, &JointAction(joint)).unwrap();
            total += r;
            s = s_next;
        }
        assert_eq!(total, -200.0);

        // A deviation landing on neither path: suboptimal band.
        let mut s = g.initial_state();
        let mut total = 0.0;
        for m in 0..3 {
            let mut joint = spec.optimal_paths[0][m].clone();
            if m == 0 {
                joint[0] = 0;
            }
            let (s_next, r) = g.step(s, &JointAction(joint)).unwrap();
            total += r;
            s = s_next;
        }
        assert!((0.0..=10.0).contains(&total), "got {total}");
    }

    #[test]
    fn staged_game_rewards_stay_in_declared_bands() {
        let spec = StagedGameSpec::new(2);
        let g: TabularGame<f64> = build_staged_game(&spec).unwrap();
        for s in 0..g.num_states() {
            for s2 in 0..g.num_states() {
                if let Some(r) = g.reward(s, s2) {
                    assert!(
                        r == 100.0 || r == -200.0 || r == 0.0 || (0.0..=10.0).contains(&r),
                        "reward {r} out of band"
                    );
                }
            }
        }
    }

    #[test]
    fn staged_builder_is_deterministic() {
        let spec = StagedGameSpec::new(3);
        let a: TabularGame<f64> = build_staged_game(&spec).unwrap();
        let b: TabularGame<f64> = build_staged_game(&spec).unwrap();
        assert_eq!(a.to_text(), b.to_text());
    }

    #[test]
    fn staged_spec_violations_are_reported() {
        let mut spec = StagedGameSpec::new(2);
        spec.optimal_paths[1][0] = spec.optimal_paths[0][0].clone();
        let err = build_staged_game::<f64>(&spec).unwrap_err();
        assert!(err.to_string().contains("differ at every stage"), "{err}");

        let mut spec = StagedGameSpec::new(2);
        spec.reward_success = 5.0;
        let err = build_staged_game::<f64>(&spec).unwrap_err();
        assert!(err.to_string().contains("reward_success"), "{err}");
    }

    #[test]
    fn chain_rejects_degenerate_length() {
        assert!(build_single_agent_chain::<f64>(1).is_err());
    }

    #[test]
    fn chain_stay_policy_earns_nothing() {
        let g: TabularGame<f64> = build_single_agent_chain(5).unwrap();
        let mut stay = crate::mdp::FixedPolicy(vec![1; 5]);
        let (_, total) = g.run_episode(&mut [&mut stay], 0).unwrap();
        assert_eq!(total, 0.0);
    }

    #[test]
    fn random_games_validate_and_are_deterministic() {
        for seed in 0..5 {
            let spec = RandomGameSpec::default();
            let a: TabularGame<f64> = build_random_game(&spec, seed);
            let b: TabularGame<f64> = build_random_game(&spec, seed);
            assert!(a.validate().is_ok());
            assert_eq!(a.to_text(), b.to_text());
        }
    }
}
