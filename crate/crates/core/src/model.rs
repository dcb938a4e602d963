//! Per-agent empirical model of `P(s'|s, a_k)` with exponential decay for
//! non-stationarity.
//!
//! Counts are the maximum-likelihood estimate in a finite game. The decay
//! handles other agents changing their policies: each new observation of a
//! cell multiplies the existing weights by `lambda`, so transitions that stop
//! occurring have their likelihood pushed below the `delta` threshold over
//! time. The decay is per-cell, not global, so rarely-visited cells are not
//! erased by unrelated activity.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::mdp::{ActionId, StateId};
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub struct TransitionModel<F> {
    /// counts[s * num_actions + a_k] -> (s' -> weight)
    cells: Vec<BTreeMap<StateId, F>>,
    totals: Vec<F>,
    num_actions: usize,
    decay: F,
    delta: F,
}

impl<F: Scalar> TransitionModel<F> {
    /// `decay` is the per-observation forgetting factor in `(0, 1]`;
    /// `delta` is the neighbor threshold in `(0, 1)`.
    pub fn new(num_states: usize, num_actions: usize, decay: F, delta: F) -> Self {
        assert!(decay > F::zero() && decay <= F::one(), "decay must be in (0, 1]");
        assert!(delta >= F::zero() && delta < F::one(), "delta must be in [0, 1)");
        TransitionModel {
            cells: vec![BTreeMap::new(); num_states * num_actions],
            totals: vec![F::zero(); num_states * num_actions],
            num_actions,
            decay,
            delta,
        }
    }

    pub fn delta(&self) -> F {
        self.delta
    }

    fn cell_index(&self, s: StateId, a_k: ActionId) -> usize {
        s * self.num_actions + a_k
    }

    /// Decays the cell's existing weights by `lambda`, then adds weight 1 to
    /// `s_next`.
    pub fn observe(&mut self, s: StateId, a_k: ActionId, s_next: StateId) {
        let idx = self.cell_index(s, a_k);
        let cell = &mut self.cells[idx];
        if self.decay < F::one() {
            for w in cell.values_mut() {
                *w *= self.decay;
            }
            self.totals[idx] *= self.decay;
        }
        *cell.entry(s_next).or_insert_with(F::zero) += F::one();
        self.totals[idx] += F::one();
    }

    pub fn total(&self, s: StateId, a_k: ActionId) -> F {
        self.totals[self.cell_index(s, a_k)]
    }

    /// `counts(s, a_k)(s') / totals(s, a_k)`; `0` for unseen cells.
    pub fn likelihood(&self, s: StateId, a_k: ActionId, s_next: StateId) -> F {
        let idx = self.cell_index(s, a_k);
        let total = self.totals[idx];
        if total <= F::zero() {
            return F::zero();
        }
        match self.cells[idx].get(&s_next) {
            Some(&w) => w / total,
            None => F::zero(),
        }
    }

    /// States with likelihood strictly above `delta`, in ascending order.
    pub fn neighbors_delta(&self, s: StateId, a_k: ActionId) -> Vec<StateId> {
        let idx = self.cell_index(s, a_k);
        let total = self.totals[idx];
        if total <= F::zero() {
            return Vec::new();
        }
        self.cells[idx]
            .iter()
            .filter(|(_, &w)| w / total > self.delta)
            .map(|(&s_next, _)| s_next)
            .collect()
    }

    /// All states ever observed for the cell, regardless of threshold.
    pub fn observed(&self, s: StateId, a_k: ActionId) -> Vec<StateId> {
        self.cells[self.cell_index(s, a_k)].keys().copied().collect()
    }

    /// Text dump `s a_k s' weight likelihood`, one line per recorded entry.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (idx, cell) in self.cells.iter().enumerate() {
            let s = idx / self.num_actions;
            let a_k = idx % self.num_actions;
            let total = self.totals[idx];
            for (&s_next, &w) in cell {
                let _ = writeln!(out, "{s} {a_k} {s_next} {w} {}", w / total);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(decay: f64) -> TransitionModel<f64> {
        TransitionModel::new(4, 2, decay, 0.01)
    }

    #[test]
    fn single_observation_has_likelihood_one() {
        let mut m = model(1.0);
        m.observe(0, 0, 1);
        assert_eq!(m.likelihood(0, 0, 1), 1.0);
    }

    #[test]
    fn equal_counts_split_evenly() {
        let mut m = model(1.0);
        m.observe(0, 0, 1);
        m.observe(0, 0, 2);
        assert_eq!(m.likelihood(0, 0, 1), 0.5);
        assert_eq!(m.likelihood(0, 0, 2), 0.5);
    }

    #[test]
    fn decay_shifts_mass_toward_recent_observations() {
        let mut m = model(0.5);
        m.observe(0, 0, 1);
        m.observe(0, 0, 2);
        // Weights are (0.5, 1.0): the newer state holds 2/3 of the mass.
        assert!((m.likelihood(0, 0, 2) - 2.0 / 3.0).abs() < 1e-12);
        assert!((m.likelihood(0, 0, 1) - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn unseen_cells_are_empty() {
        let m = model(1.0);
        assert_eq!(m.likelihood(0, 1, 3), 0.0);
        assert!(m.neighbors_delta(0, 1).is_empty());
    }

    #[test]
    fn neighbors_drop_below_threshold_under_decay() {
        let mut m = TransitionModel::new(4, 2, 0.999, 0.01);
        m.observe(0, 0, 1);
        m.observe(0, 0, 2);
        assert_eq!(m.neighbors_delta(0, 0), vec![1, 2]);
        // Keep observing state 2 only; state 1's stale likelihood decays
        // below delta once 0.999^n / total < 0.01.
        let mut steps = 0;
        while m.neighbors_delta(0, 0).contains(&1) {
            m.observe(0, 0, 2);
            steps += 1;
            assert!(steps < 20_000, "stale neighbor never dropped out");
        }
        assert_eq!(m.neighbors_delta(0, 0), vec![2]);
        // Cross-check against the closed form: the stale weight is
        // lambda^n and the total is the geometric partial sum, so the
        // threshold is crossed near lambda^n = delta / (delta + 1 - lambda).
        let predicted = (0.01f64 / (0.01 + 1.0 - 0.999)).ln() / 0.999f64.ln();
        assert!((steps as f64) < predicted * 1.5 && (steps as f64) > predicted * 0.5);
    }

    #[test]
    fn totals_track_weight_sums() {
        let mut m = model(0.9);
        for i in 0..100 {
            m.observe(0, 0, i % 3);
        }
        let sum: f64 = [0, 1, 2]
            .iter()
            .map(|&s_next| m.likelihood(0, 0, s_next) * m.total(0, 0))
            .sum();
        assert!((sum - m.total(0, 0)).abs() < 1e-9);
        let lik_sum: f64 = [0, 1, 2].iter().map(|&s_next| m.likelihood(0, 0, s_next)).sum();
        assert!((lik_sum - 1.0).abs() < 1e-12);
    }
}
