//! Exact brute-force solvers over the joint game, used as ground truth for
//! every learner. Synchronous-sweep value iteration over the full joint
//! action space, a state-state fixed point computed by an independent route,
//! policy enumeration, and the observed-vs-reachable set check.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;

use thiserror::Error;

use crate::mdp::{ActionId, JointAction, StateId, TabularGame};
use crate::scalar::Scalar;

const MAX_TABLE: usize = 10_000_000;

/// Enumeration guard shared by the solvers: refuse joint tables beyond
/// `MAX_TABLE` entries.
pub fn too_large_to_enumerate(states: usize, joint_actions: usize) -> bool {
    states.saturating_mul(joint_actions) > MAX_TABLE
}
const MAX_POLICIES: usize = 10_000;
const MAX_SWEEPS: usize = 1_000_000;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("game too large to enumerate: {states} states x {joint} joint actions")]
    TooLarge { states: usize, joint: usize },
    #[error("value iteration did not converge in {sweeps} sweeps (residual {residual})")]
    NotConverged { sweeps: usize, residual: f64 },
    #[error("more than {0} optimal policies; refusing to enumerate")]
    TooManyPolicies(usize),
}

/// Converged solution of the joint game.
#[derive(Debug, Clone)]
pub struct JointSolution<F> {
    /// `q_star[s * num_joint + j]`.
    pub q_star: Vec<F>,
    /// Defined on exactly the reachable (s, s') pairs.
    pub qss_star: BTreeMap<(StateId, StateId), F>,
    pub v_star: Vec<F>,
    pub gamma: F,
    pub tol: F,
    /// Sweeps taken to converge; the state-state route reuses this count.
    pub sweeps: usize,
}

impl<F: Scalar> JointSolution<F> {
    pub fn q(&self, game: &TabularGame<F>, s: StateId, a: &JointAction) -> F {
        self.q_star[s * game.num_joint_actions() + game.joint_index(a)]
    }

    /// Text dump of `q_star` (`s j value`) and `v_star` (`v s value`).
    pub fn dump(&self, game: &TabularGame<F>) -> String {
        let mut out = String::new();
        let nj = game.num_joint_actions();
        for (s, &v) in self.v_star.iter().enumerate() {
            let _ = writeln!(out, "v {s} {v}");
        }
        for s in 0..self.v_star.len() {
            for j in 0..nj {
                let _ = writeln!(out, "q {s} {j} {}", self.q_star[s * nj + j]);
            }
        }
        for (&(s, s2), &v) in &self.qss_star {
            let _ = writeln!(out, "qss {s} {s2} {v}");
        }
        out
    }
}

/// Synchronous-sweep value iteration over the joint action space.
///
/// Terminal states have value 0. Returns once the sup-norm residual drops
/// below `tol`; refuses games beyond the enumeration guard.
pub fn joint_value_iteration<F: Scalar>(
    game: &TabularGame<F>,
    gamma: F,
    tol: F,
) -> Result<JointSolution<F>, OracleError> {
    let ns = game.num_states();
    let nj = game.num_joint_actions();
    if too_large_to_enumerate(ns, nj) {
        return Err(OracleError::TooLarge { states: ns, joint: nj });
    }
    // Precompute (s_next, r) per (s, j).
    let mut next: Vec<(StateId, F)> = Vec::with_capacity(ns * nj);
    for s in 0..ns {
        for j in 0..nj {
            if game.is_terminal(s) {
                next.push((s, F::zero()));
            } else {
                let joint = game.joint_from_index(j);
                let s_next = game.next_state(s, &joint);
                next.push((s_next, game.reward(s, s_next).unwrap_or_else(F::zero)));
            }
        }
    }
    let mut q = vec![F::zero(); ns * nj];
    let mut v = vec![F::zero(); ns];
    let mut sweeps = 0;
    loop {
        sweeps += 1;
        let mut residual = F::zero();
        let mut q_new = vec![F::zero(); ns * nj];
        for s in 0..ns {
            if game.is_terminal(s) {
                continue;
            }
            for j in 0..nj {
                let (s_next, r) = next[s * nj + j];
                let target = r + gamma * v[s_next];
                let diff = (target - q[s * nj + j]).abs();
                if diff > residual {
                    residual = diff;
                }
                q_new[s * nj + j] = target;
            }
        }
        q = q_new;
        for s in 0..ns {
            if game.is_terminal(s) {
                v[s] = F::zero();
            } else {
                let row = &q[s * nj..(s + 1) * nj];
                v[s] = row.iter().copied().fold(row[0], F::max);
            }
        }
        if residual < tol {
            break;
        }
        if sweeps >= MAX_SWEEPS {
            return Err(OracleError::NotConverged { sweeps, residual: residual.to_f64_lossy() });
        }
    }
    let mut solution =
        JointSolution { q_star: q, qss_star: BTreeMap::new(), v_star: v, gamma, tol, sweeps };
    solution.qss_star = qss_from_qsa(&solution, game);
    Ok(solution)
}

/// Independent residual check of a solved table.
pub fn bellman_residual<F: Scalar>(game: &TabularGame<F>, solution: &JointSolution<F>) -> F {
    let nj = game.num_joint_actions();
    let mut worst = F::zero();
    for s in 0..game.num_states() {
        if game.is_terminal(s) {
            continue;
        }
        for j in 0..nj {
            let joint = game.joint_from_index(j);
            let s_next = game.next_state(s, &joint);
            let r = game.reward(s, s_next).unwrap_or_else(F::zero);
            let v_next =
                if game.is_terminal(s_next) { F::zero() } else { solution.v_star[s_next] };
            let diff = (r + solution.gamma * v_next - solution.q_star[s * nj + j]).abs();
            if diff > worst {
                worst = diff;
            }
        }
    }
    worst
}

/// State-state values read off the converged `q_star` through the
/// transition function: `qss(s, T(s, a)) = q_star(s, a)`.
pub fn qss_from_qsa<F: Scalar>(
    solution: &JointSolution<F>,
    game: &TabularGame<F>,
) -> BTreeMap<(StateId, StateId), F> {
    let nj = game.num_joint_actions();
    let mut out = BTreeMap::new();
    for s in 0..game.num_states() {
        if game.is_terminal(s) {
            continue;
        }
        for j in 0..nj {
            let joint = game.joint_from_index(j);
            let s_next = game.next_state(s, &joint);
            out.insert((s, s_next), solution.q_star[s * nj + j]);
        }
    }
    out
}

/// State-state value iteration run as its own route: fixed point of
/// `Q(s, s') = r(s, s') + gamma * max_{s'' in N(s')} Q(s', s'')` over the
/// reachable pairs, for exactly `sweeps` synchronous sweeps from zero.
pub fn qss_value_iteration<F: Scalar>(
    game: &TabularGame<F>,
    gamma: F,
    sweeps: usize,
) -> BTreeMap<(StateId, StateId), F> {
    let ns = game.num_states();
    let nj = game.num_joint_actions();
    // Neighbor sets N(s) from the transition function.
    let mut neighbors: Vec<BTreeSet<StateId>> = vec![BTreeSet::new(); ns];
    for s in 0..ns {
        if game.is_terminal(s) {
            continue;
        }
        for j in 0..nj {
            neighbors[s].insert(game.next_state(s, &game.joint_from_index(j)));
        }
    }
    let mut q: BTreeMap<(StateId, StateId), F> = BTreeMap::new();
    for s in 0..ns {
        for &s_next in &neighbors[s] {
            q.insert((s, s_next), F::zero());
        }
    }
    let mut v: Vec<F> = vec![F::zero(); ns];
    for _ in 0..sweeps {
        let mut q_new = q.clone();
        for (&(s, s_next), slot) in q_new.iter_mut() {
            let r = game.reward(s, s_next).unwrap_or_else(F::zero);
            *slot = r + gamma * v[s_next];
        }
        q = q_new;
        for s in 0..ns {
            if game.is_terminal(s) || neighbors[s].is_empty() {
                v[s] = F::zero();
            } else {
                let mut best: Option<F> = None;
                for &s_next in &neighbors[s] {
                    let val = q[&(s, s_next)];
                    best = Some(match best {
                        None => val,
                        Some(b) => b.max(val),
                    });
                }
                v[s] = best.unwrap();
            }
        }
    }
    q
}

/// A deterministic joint policy restricted to the states it actually visits
/// from the initial state.
pub type JointPolicy = BTreeMap<StateId, JointAction>;

/// All deterministic joint policies whose value at the initial state equals
/// `v_star` within `tol`, identified by their choices along their own
/// trajectory.
///
/// A policy attains the optimum exactly when it picks a `q_star`-optimal
/// joint action at every state it visits, so the enumeration branches only
/// over optimal actions.
pub fn enumerate_optimal_joint_policies<F: Scalar>(
    game: &TabularGame<F>,
    solution: &JointSolution<F>,
    tol: F,
) -> Result<Vec<JointPolicy>, OracleError> {
    let nj = game.num_joint_actions();
    let mut out: Vec<JointPolicy> = Vec::new();
    let mut assignment: JointPolicy = BTreeMap::new();

    fn dfs<F: Scalar>(
        game: &TabularGame<F>,
        solution: &JointSolution<F>,
        tol: F,
        nj: usize,
        s: StateId,
        assignment: &mut JointPolicy,
        out: &mut Vec<JointPolicy>,
    ) -> Result<(), OracleError> {
        if game.is_terminal(s) || assignment.contains_key(&s) {
            // Terminal reached, or the trajectory closed a (zero-value)
            // cycle: the policy is fully determined.
            if out.len() >= MAX_POLICIES {
                return Err(OracleError::TooManyPolicies(MAX_POLICIES));
            }
            out.push(assignment.clone());
            return Ok(());
        }
        for j in 0..nj {
            let q = solution.q_star[s * nj + j];
            if (solution.v_star[s] - q).abs() <= tol {
                let joint = game.joint_from_index(j);
                let s_next = game.next_state(s, &joint);
                assignment.insert(s, joint);
                dfs(game, solution, tol, nj, s_next, assignment, out)?;
                assignment.remove(&s);
            }
        }
        Ok(())
    }

    dfs(game, solution, tol, nj, game.initial_state(), &mut assignment, &mut out)?;
    Ok(out)
}

/// Discounted value of a deterministic joint policy rolled out from the
/// initial state. Stops at terminals, on a revisit (cycles here carry zero
/// reward in the games we solve), or when the discount tail is negligible.
pub fn policy_value<F: Scalar>(game: &TabularGame<F>, policy: &JointPolicy, gamma: F) -> F {
    let mut s = game.initial_state();
    let mut seen = HashSet::new();
    let mut discount = F::one();
    let mut total = F::zero();
    let tail_cap = 100_000;
    for _ in 0..tail_cap {
        if game.is_terminal(s) || !seen.insert(s) {
            break;
        }
        let Some(joint) = policy.get(&s) else { break };
        let s_next = game.next_state(s, joint);
        let r = game.reward(s, s_next).unwrap_or_else(F::zero);
        total += discount * r;
        discount *= gamma;
        s = s_next;
    }
    total
}

/// Comparison of the next states an agent observed against the full
/// reachable set `{T(s, a_k, a_-k)}` for each visited cell.
#[derive(Debug, Clone)]
pub struct SetEquivalenceReport {
    /// (s, a_k) -> states reachable but never observed.
    pub missing: BTreeMap<(StateId, ActionId), BTreeSet<StateId>>,
    /// (s, a_k) -> states observed but not reachable (phantoms; always a bug).
    pub extra: BTreeMap<(StateId, ActionId), BTreeSet<StateId>>,
    pub cells_checked: usize,
}

impl SetEquivalenceReport {
    /// Pass iff the observed set equals the reachable set on every visited
    /// cell. An empty log passes vacuously.
    pub fn pass(&self) -> bool {
        self.missing.is_empty() && self.extra.is_empty()
    }
}

/// Checks the set-equivalence condition for one agent from its exploration
/// log of `(s, a_k, s')` triples.
pub fn check_set_equivalence<F: Scalar>(
    game: &TabularGame<F>,
    agent: usize,
    log: &[(StateId, ActionId, StateId)],
) -> SetEquivalenceReport {
    let mut observed: HashMap<(StateId, ActionId), BTreeSet<StateId>> = HashMap::new();
    for &(s, a_k, s_next) in log {
        observed.entry((s, a_k)).or_default().insert(s_next);
    }
    let mut missing = BTreeMap::new();
    let mut extra = BTreeMap::new();
    let cells_checked = observed.len();
    for ((s, a_k), seen) in observed {
        let full: BTreeSet<StateId> =
            game.reachable_given(s, agent, a_k).into_iter().collect();
        let miss: BTreeSet<StateId> = full.difference(&seen).copied().collect();
        let ext: BTreeSet<StateId> = seen.difference(&full).copied().collect();
        if !miss.is_empty() {
            missing.insert((s, a_k), miss);
        }
        if !ext.is_empty() {
            extra.insert((s, a_k), ext);
        }
    }
    SetEquivalenceReport { missing, extra, cells_checked }
}
