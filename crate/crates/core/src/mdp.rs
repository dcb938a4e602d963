//! Finite deterministic Markov-game representation, stepping, and episode
//! mechanics shared by every learner and scheduler.
//!
//! States and actions are dense integer identifiers so table-based learners
//! can index directly; human-readable labels are an optional side table.
//! Agents are 0-indexed throughout.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::scalar::Scalar;

pub type StateId = usize;
pub type ActionId = usize;

/// RNG used everywhere a simulation draws randomness. Fixed so that a seed
/// pins the whole run.
pub type SimRng = ChaCha8Rng;

#[derive(Debug, Error)]
pub enum GameError {
    #[error("unknown state {0}")]
    UnknownState(StateId),
    #[error("agent {agent}: action {action} out of range (|A_{agent}| = {num_actions})")]
    InvalidAction {
        agent: usize,
        action: ActionId,
        num_actions: usize,
    },
    #[error("joint action has {got} components, game has {expected} agents")]
    ArityMismatch { got: usize, expected: usize },
    #[error("no transition listed for state {state} and joint action {joint:?}")]
    MissingTransition { state: StateId, joint: Vec<ActionId> },
    #[error("conflicting rewards for state pair ({s}, {s_next}): {a} vs {b}")]
    RewardConflict { s: StateId, s_next: StateId, a: f64, b: f64 },
    #[error("invalid game definition: {0}")]
    Invalid(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One action per agent, ordered by agent index.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct JointAction(pub Vec<ActionId>);

impl JointAction {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl From<Vec<ActionId>> for JointAction {
    fn from(v: Vec<ActionId>) -> Self {
        JointAction(v)
    }
}

/// Per-agent tuple (s, a_k, s', r) stored in that agent's private buffer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Experience<F> {
    pub s: StateId,
    pub action: ActionId,
    pub s_next: StateId,
    pub reward: F,
}

/// Global view of one environment step, used by episode traces and
/// centralized baselines.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalTransition<F> {
    pub s: StateId,
    pub joint: JointAction,
    pub s_next: StateId,
    pub reward: F,
}

/// Finite deterministic Markov game with a shared reward.
///
/// The transition map is total over non-terminal states; terminal states
/// absorb with zero reward. Episodes start at `initial_state` and run for at
/// most `horizon` steps.
#[derive(Debug, Clone)]
pub struct TabularGame<F> {
    num_agents: usize,
    num_states: usize,
    actions_per_agent: Vec<usize>,
    // Dense: transition[s * num_joint + joint_index]
    transition: Vec<StateId>,
    reward: HashMap<(StateId, StateId), F>,
    initial_state: StateId,
    horizon: usize,
    terminal: Vec<bool>,
    labels: BTreeMap<StateId, String>,
}

impl<F: Scalar> TabularGame<F> {
    pub fn num_agents(&self) -> usize {
        self.num_agents
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn actions_per_agent(&self) -> &[usize] {
        &self.actions_per_agent
    }

    pub fn num_actions(&self, agent: usize) -> usize {
        self.actions_per_agent[agent]
    }

    pub fn num_joint_actions(&self) -> usize {
        self.actions_per_agent.iter().product()
    }

    pub fn initial_state(&self) -> StateId {
        self.initial_state
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn is_terminal(&self, s: StateId) -> bool {
        self.terminal[s]
    }

    pub fn label(&self, s: StateId) -> Option<&str> {
        self.labels.get(&s).map(String::as_str)
    }

    pub fn state_by_label(&self, label: &str) -> Option<StateId> {
        self.labels.iter().find(|(_, l)| l.as_str() == label).map(|(s, _)| *s)
    }

    /// Mixed-radix index of a joint action, agent 0 most significant.
    pub fn joint_index(&self, a: &JointAction) -> usize {
        let mut idx = 0;
        for (k, &ak) in a.0.iter().enumerate() {
            idx = idx * self.actions_per_agent[k] + ak;
        }
        idx
    }

    pub fn joint_from_index(&self, mut idx: usize) -> JointAction {
        let mut rev = Vec::with_capacity(self.num_agents);
        for &n in self.actions_per_agent.iter().rev() {
            rev.push(idx % n);
            idx /= n;
        }
        rev.reverse();
        JointAction(rev)
    }

    pub fn joint_actions(&self) -> impl Iterator<Item = JointAction> + '_ {
        (0..self.num_joint_actions()).map(|i| self.joint_from_index(i))
    }

    fn check_state(&self, s: StateId) -> Result<(), GameError> {
        if s >= self.num_states {
            return Err(GameError::UnknownState(s));
        }
        Ok(())
    }

    fn check_joint(&self, a: &JointAction) -> Result<(), GameError> {
        if a.len() != self.num_agents {
            return Err(GameError::ArityMismatch { got: a.len(), expected: self.num_agents });
        }
        for (k, &ak) in a.0.iter().enumerate() {
            if ak >= self.actions_per_agent[k] {
                return Err(GameError::InvalidAction {
                    agent: k,
                    action: ak,
                    num_actions: self.actions_per_agent[k],
                });
            }
        }
        Ok(())
    }

    /// Pure environment step: `(T(s, a), r(s, T(s, a)))`.
    ///
    /// Terminal states absorb: stepping from one returns `(s, 0)`.
    pub fn step(&self, s: StateId, a: &JointAction) -> Result<(StateId, F), GameError> {
        self.check_state(s)?;
        self.check_joint(a)?;
        if self.terminal[s] {
            return Ok((s, F::zero()));
        }
        let s_next = self.transition[s * self.num_joint_actions() + self.joint_index(a)];
        let r = *self
            .reward
            .get(&(s, s_next))
            .ok_or_else(|| GameError::Invalid(format!("no reward for pair ({s}, {s_next})")))?;
        Ok((s_next, r))
    }

    /// Next state only, without the reward lookup.
    pub fn next_state(&self, s: StateId, a: &JointAction) -> StateId {
        if self.terminal[s] {
            return s;
        }
        self.transition[s * self.num_joint_actions() + self.joint_index(a)]
    }

    pub fn reward(&self, s: StateId, s_next: StateId) -> Option<F> {
        self.reward.get(&(s, s_next)).copied()
    }

    /// All next states reachable from `s` when agent `k` plays `a_k` and the
    /// others play anything.
    pub fn reachable_given(&self, s: StateId, agent: usize, a_k: ActionId) -> HashSet<StateId> {
        let mut out = HashSet::new();
        if self.terminal[s] {
            return out;
        }
        for mut joint in self.joint_actions() {
            joint.0[agent] = a_k;
            out.insert(self.next_state(s, &joint));
        }
        out
    }

    /// Runs one episode from `initial_state`, applying the joint action of
    /// the selectors for `horizon` steps or until a terminal state.
    ///
    /// Returns the full global trajectory and the undiscounted return.
    /// Deterministic given the seed and selectors.
    pub fn run_episode(
        &self,
        selectors: &mut [&mut dyn ActionSelector],
        rng_seed: u64,
    ) -> Result<(Vec<GlobalTransition<F>>, F), GameError> {
        if selectors.len() != self.num_agents {
            return Err(GameError::ArityMismatch { got: selectors.len(), expected: self.num_agents });
        }
        let mut rng = SimRng::seed_from_u64(rng_seed);
        self.run_episode_with(selectors, &mut rng)
    }

    /// As `run_episode`, but drawing from a caller-owned RNG stream.
    pub fn run_episode_with(
        &self,
        selectors: &mut [&mut dyn ActionSelector],
        rng: &mut SimRng,
    ) -> Result<(Vec<GlobalTransition<F>>, F), GameError> {
        let mut s = self.initial_state;
        let mut trace = Vec::new();
        let mut total = F::zero();
        for _ in 0..self.horizon {
            if self.terminal[s] {
                break;
            }
            let joint = JointAction(
                selectors.iter_mut().map(|sel| sel.select(s, rng)).collect::<Vec<_>>(),
            );
            self.check_joint(&joint)?;
            let (s_next, r) = self.step(s, &joint)?;
            trace.push(GlobalTransition { s, joint, s_next, reward: r });
            total += r;
            s = s_next;
        }
        Ok((trace, total))
    }

    /// Checks the structural invariants a builder or loader must establish.
    pub fn validate(&self) -> Result<(), GameError> {
        if self.num_agents == 0 {
            return Err(GameError::Invalid("num_agents must be positive".into()));
        }
        if self.horizon == 0 {
            return Err(GameError::Invalid("horizon must be positive".into()));
        }
        self.check_state(self.initial_state)?;
        let nj = self.num_joint_actions();
        for s in 0..self.num_states {
            if self.terminal[s] {
                continue;
            }
            for j in 0..nj {
                let s_next = self.transition[s * nj + j];
                if s_next >= self.num_states {
                    return Err(GameError::UnknownState(s_next));
                }
                if !self.reward.contains_key(&(s, s_next)) {
                    return Err(GameError::Invalid(format!(
                        "no reward for reachable pair ({s}, {s_next})"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Serializes to the plain-text game file format (see `from_text`).
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "num_agents {}", self.num_agents);
        let _ = writeln!(out, "num_states {}", self.num_states);
        let acts: Vec<String> = self.actions_per_agent.iter().map(|n| n.to_string()).collect();
        let _ = writeln!(out, "actions {}", acts.join(" "));
        let _ = writeln!(out, "initial {}", self.initial_state);
        let _ = writeln!(out, "horizon {}", self.horizon);
        let terms: Vec<String> =
            (0..self.num_states).filter(|&s| self.terminal[s]).map(|s| s.to_string()).collect();
        let _ = writeln!(out, "terminals {}", terms.join(" "));
        for (s, name) in &self.labels {
            let _ = writeln!(out, "label {s} {name}");
        }
        let nj = self.num_joint_actions();
        for s in 0..self.num_states {
            if self.terminal[s] {
                continue;
            }
            for j in 0..nj {
                let joint = self.joint_from_index(j);
                let s_next = self.transition[s * nj + j];
                let r = self.reward[&(s, s_next)];
                let comps: Vec<String> = joint.0.iter().map(|a| a.to_string()).collect();
                let _ = writeln!(out, "{s} {} {s_next} {r}", comps.join(" "));
            }
        }
        out
    }

    /// Parses the plain-text game file format.
    ///
    /// Header lines (any order, one per line): `num_agents N`, `num_states N`,
    /// `actions n1 .. nK`, `initial S`, `horizon H`, `terminals s1 ..`,
    /// optional `label S NAME` lines. Then one line per transition:
    /// `s a1 .. aK s' r`. Blank lines and `#` comments are ignored.
    /// Every non-terminal (s, a) pair must be listed.
    pub fn from_text(text: &str) -> Result<Self, GameError> {
        let mut builder: Option<GameBuilder<F>> = None;
        let mut num_agents = None;
        let mut num_states = None;
        let mut actions: Option<Vec<usize>> = None;
        let mut initial = None;
        let mut horizon = None;
        let mut terminals: Vec<StateId> = Vec::new();
        let mut labels: Vec<(StateId, String)> = Vec::new();

        let perr = |line: usize, msg: &str| GameError::Parse { line, msg: msg.to_string() };

        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split_whitespace();
            let head = parts.next().unwrap();
            let rest: Vec<&str> = parts.collect();
            match head {
                "num_agents" => {
                    num_agents =
                        Some(rest.first().and_then(|v| v.parse().ok()).ok_or_else(|| {
                            perr(line_no, "num_agents expects one integer")
                        })?)
                }
                "num_states" => {
                    num_states =
                        Some(rest.first().and_then(|v| v.parse().ok()).ok_or_else(|| {
                            perr(line_no, "num_states expects one integer")
                        })?)
                }
                "actions" => {
                    let parsed: Result<Vec<usize>, _> = rest.iter().map(|v| v.parse()).collect();
                    actions = Some(parsed.map_err(|_| perr(line_no, "bad action counts"))?);
                }
                "initial" => {
                    initial = Some(rest.first().and_then(|v| v.parse().ok()).ok_or_else(|| {
                        perr(line_no, "initial expects one state id")
                    })?)
                }
                "horizon" => {
                    horizon = Some(rest.first().and_then(|v| v.parse().ok()).ok_or_else(|| {
                        perr(line_no, "horizon expects one integer")
                    })?)
                }
                "terminals" => {
                    let parsed: Result<Vec<usize>, _> = rest.iter().map(|v| v.parse()).collect();
                    terminals = parsed.map_err(|_| perr(line_no, "bad terminal state id"))?;
                }
                "label" => {
                    if rest.len() != 2 {
                        return Err(perr(line_no, "label expects `label S NAME`"));
                    }
                    let s = rest[0].parse().map_err(|_| perr(line_no, "bad label state id"))?;
                    labels.push((s, rest[1].to_string()));
                }
                _ => {
                    // Transition line. Header must be complete by now.
                    let b = match builder.as_mut() {
                        Some(b) => b,
                        None => {
                            let (na, ns, acts, init, hor) = match (
                                num_agents,
                                num_states,
                                actions.clone(),
                                initial,
                                horizon,
                            ) {
                                (Some(a), Some(b2), Some(c), Some(d), Some(e)) => (a, b2, c, d, e),
                                _ => return Err(perr(line_no, "transition before complete header")),
                            };
                            if acts.len() != na {
                                return Err(perr(line_no, "actions list length != num_agents"));
                            }
                            let mut b = GameBuilder::new(na, ns, acts, init, hor);
                            for &t in &terminals {
                                b.set_terminal(t);
                            }
                            for (s, name) in &labels {
                                b.set_label(*s, name);
                            }
                            builder = Some(b);
                            builder.as_mut().unwrap()
                        }
                    };
                    let na = b.num_agents;
                    let fields: Vec<&str> =
                        std::iter::once(head).chain(rest.iter().copied()).collect();
                    if fields.len() != na + 3 {
                        return Err(perr(line_no, "transition line needs s a1..aK s' r"));
                    }
                    let s: StateId =
                        fields[0].parse().map_err(|_| perr(line_no, "bad state id"))?;
                    let mut joint = Vec::with_capacity(na);
                    for f in &fields[1..=na] {
                        joint.push(f.parse().map_err(|_| perr(line_no, "bad action id"))?);
                    }
                    let s_next: StateId =
                        fields[na + 1].parse().map_err(|_| perr(line_no, "bad next state id"))?;
                    let r: f64 =
                        fields[na + 2].parse().map_err(|_| perr(line_no, "bad reward"))?;
                    b.add_transition(s, &joint, s_next, F::from_f64_lossy(r))?;
                }
            }
        }
        builder
            .ok_or_else(|| GameError::Invalid("game file lists no transitions".into()))?
            .build()
    }

    pub fn load(path: &Path) -> Result<Self, GameError> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), GameError> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

/// Incremental constructor for `TabularGame`; `build` enforces totality.
pub struct GameBuilder<F> {
    num_agents: usize,
    num_states: usize,
    actions_per_agent: Vec<usize>,
    transition: Vec<Option<StateId>>,
    reward: HashMap<(StateId, StateId), F>,
    initial_state: StateId,
    horizon: usize,
    terminal: Vec<bool>,
    labels: BTreeMap<StateId, String>,
}

impl<F: Scalar> GameBuilder<F> {
    pub fn new(
        num_agents: usize,
        num_states: usize,
        actions_per_agent: Vec<usize>,
        initial_state: StateId,
        horizon: usize,
    ) -> Self {
        let num_joint: usize = actions_per_agent.iter().product();
        GameBuilder {
            num_agents,
            num_states,
            actions_per_agent,
            transition: vec![None; num_states * num_joint],
            reward: HashMap::new(),
            initial_state,
            horizon,
            terminal: vec![false; num_states],
            labels: BTreeMap::new(),
        }
    }

    pub fn set_terminal(&mut self, s: StateId) {
        self.terminal[s] = true;
    }

    pub fn set_label(&mut self, s: StateId, label: &str) {
        self.labels.insert(s, label.to_string());
    }

    pub fn add_transition(
        &mut self,
        s: StateId,
        joint: &[ActionId],
        s_next: StateId,
        r: F,
    ) -> Result<(), GameError> {
        if s >= self.num_states {
            return Err(GameError::UnknownState(s));
        }
        if s_next >= self.num_states {
            return Err(GameError::UnknownState(s_next));
        }
        if joint.len() != self.num_agents {
            return Err(GameError::ArityMismatch { got: joint.len(), expected: self.num_agents });
        }
        let mut idx = 0;
        for (k, &ak) in joint.iter().enumerate() {
            if ak >= self.actions_per_agent[k] {
                return Err(GameError::InvalidAction {
                    agent: k,
                    action: ak,
                    num_actions: self.actions_per_agent[k],
                });
            }
            idx = idx * self.actions_per_agent[k] + ak;
        }
        let num_joint: usize = self.actions_per_agent.iter().product();
        self.transition[s * num_joint + idx] = Some(s_next);
        if let Some(&prev) = self.reward.get(&(s, s_next)) {
            if prev != r {
                return Err(GameError::RewardConflict {
                    s,
                    s_next,
                    a: prev.to_f64_lossy(),
                    b: r.to_f64_lossy(),
                });
            }
        }
        self.reward.insert((s, s_next), r);
        Ok(())
    }

    pub fn build(self) -> Result<TabularGame<F>, GameError> {
        let num_joint: usize = self.actions_per_agent.iter().product();
        let mut transition = Vec::with_capacity(self.num_states * num_joint);
        for s in 0..self.num_states {
            for j in 0..num_joint {
                match self.transition[s * num_joint + j] {
                    Some(t) => transition.push(t),
                    None if self.terminal[s] => transition.push(s),
                    None => {
                        // Reconstruct the joint action for the message.
                        let mut idx = j;
                        let mut rev = Vec::new();
                        for &n in self.actions_per_agent.iter().rev() {
                            rev.push(idx % n);
                            idx /= n;
                        }
                        rev.reverse();
                        return Err(GameError::MissingTransition { state: s, joint: rev });
                    }
                }
            }
        }
        let game = TabularGame {
            num_agents: self.num_agents,
            num_states: self.num_states,
            actions_per_agent: self.actions_per_agent,
            transition,
            reward: self.reward,
            initial_state: self.initial_state,
            horizon: self.horizon,
            terminal: self.terminal,
            labels: self.labels,
        };
        game.validate()?;
        Ok(game)
    }
}

/// Chooses one agent's action for a state. Implemented by learners and by
/// fixed test policies.
pub trait ActionSelector {
    fn select(&mut self, s: StateId, rng: &mut SimRng) -> ActionId;
}

/// Fixed deterministic policy: `state -> action` table.
pub struct FixedPolicy(pub Vec<ActionId>);

impl ActionSelector for FixedPolicy {
    fn select(&mut self, s: StateId, _rng: &mut SimRng) -> ActionId {
        self.0[s]
    }
}

/// Adapter turning a closure into an `ActionSelector`.
pub struct PolicyFn<G>(pub G);

impl<G: FnMut(StateId, &mut SimRng) -> ActionId> ActionSelector for PolicyFn<G> {
    fn select(&mut self, s: StateId, rng: &mut SimRng) -> ActionId {
        (self.0)(s, rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_game() -> TabularGame<f64> {
        // 1 agent, 2 states: 0 -> 1 on action 1 (+1), self-loop on action 0.
        let mut b = GameBuilder::new(1, 2, vec![2], 0, 4);
        b.set_terminal(1);
        b.add_transition(0, &[0], 0, 0.0).unwrap();
        b.add_transition(0, &[1], 1, 1.0).unwrap();
        b.build().unwrap()
    }

    #[test]
    fn step_is_pure_and_deterministic() {
        let g = tiny_game();
        let a = JointAction(vec![1]);
        let first = g.step(0, &a).unwrap();
        for _ in 0..10 {
            assert_eq!(g.step(0, &a).unwrap(), first);
        }
        assert_eq!(first, (1, 1.0));
    }

    #[test]
    fn self_loop_pays_zero() {
        let g = tiny_game();
        assert_eq!(g.step(0, &JointAction(vec![0])).unwrap(), (0, 0.0));
    }

    #[test]
    fn step_rejects_bad_inputs_naming_agent() {
        let g = tiny_game();
        match g.step(0, &JointAction(vec![5])) {
            Err(GameError::InvalidAction { agent: 0, action: 5, .. }) => {}
            other => panic!("expected InvalidAction, got {other:?}"),
        }
        assert!(matches!(g.step(7, &JointAction(vec![0])), Err(GameError::UnknownState(7))));
    }

    #[test]
    fn missing_transition_is_a_build_error() {
        let mut b: GameBuilder<f64> = GameBuilder::new(1, 2, vec![2], 0, 1);
        b.set_terminal(1);
        b.add_transition(0, &[0], 1, 1.0).unwrap();
        match b.build() {
            Err(GameError::MissingTransition { state: 0, joint }) => assert_eq!(joint, vec![1]),
            other => panic!("expected MissingTransition, got {other:?}"),
        }
    }

    #[test]
    fn episode_respects_horizon_and_terminals() {
        let g = tiny_game();
        let mut stay = FixedPolicy(vec![0, 0]);
        let (trace, total) = g.run_episode(&mut [&mut stay], 0).unwrap();
        assert_eq!(trace.len(), 4); // horizon
        assert_eq!(total, 0.0);

        let mut advance = FixedPolicy(vec![1, 0]);
        let (trace, total) = g.run_episode(&mut [&mut advance], 0).unwrap();
        assert_eq!(trace.len(), 1); // terminal reached
        assert_eq!(total, 1.0);
    }

    #[test]
    fn episode_deterministic_given_seed() {
        let g = tiny_game();
        let mut coin = PolicyFn(|_s: StateId, rng: &mut SimRng| -> ActionId {
            use rand::Rng;
            rng.gen_range(0..2)
        });
        let (t1, r1) = g.run_episode(&mut [&mut coin], 42).unwrap();
        let mut coin2 = PolicyFn(|_s: StateId, rng: &mut SimRng| -> ActionId {
            use rand::Rng;
            rng.gen_range(0..2)
        });
        let (t2, r2) = g.run_episode(&mut [&mut coin2], 42).unwrap();
        assert_eq!(t1, t2);
        assert_eq!(r1, r2);
    }

    #[test]
    fn text_round_trip() {
        let g = tiny_game();
        let text = g.to_text();
        let g2: TabularGame<f64> = TabularGame::from_text(&text).unwrap();
        assert_eq!(g2.to_text(), text);
        assert_eq!(g2.step(0, &JointAction(vec![1])).unwrap(), (1, 1.0));
    }

    #[test]
    fn joint_index_round_trip() {
        let mut b: GameBuilder<f64> = GameBuilder::new(2, 1, vec![3, 2], 0, 1);
        b.set_terminal(0);
        let g = b.build().unwrap();
        for i in 0..g.num_joint_actions() {
            assert_eq!(g.joint_index(&g.joint_from_index(i)), i);
        }
    }
}
