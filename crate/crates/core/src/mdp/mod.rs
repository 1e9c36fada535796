//! Exact finite-MDP machinery.
//!
//! A [`TabularMdp`] stores the transition tensor `P[s][a][s']`, expected
//! rewards `R[s][a]`, the discount, a terminal mask and the initial state
//! distribution. Terminal states are absorbing zero-reward self-loops, and
//! every backup in this module zeroes the bootstrap term when the successor is
//! terminal.

mod bellman;
mod gradient;
mod policy;

pub use bellman::{
    apply_bellman_pi, apply_bellman_star, evaluate_policy, evaluate_policy_default,
    optimal_performance, policy_performance, solve_q_star, DIRECT_SOLVE_MAX_STATES,
};
pub use gradient::{exact_policy_gradient, state_distribution, DistributionMode};
pub use policy::{policy_stats, softmax_policy, PolicyStats};

use crate::error::{Error, Result};

const ROW_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    n_states: usize,
    n_actions: usize,
    transition: Vec<f64>,
    reward: Vec<f64>,
    gamma: f64,
    terminal: Vec<bool>,
    initial_dist: Vec<f64>,
}

impl TabularMdp {
    /// Validates and builds an MDP.
    ///
    /// `transition` is laid out as `[s][a][s']` and `reward` as `[s][a]`.
    pub fn new(
        n_states: usize,
        n_actions: usize,
        transition: Vec<f64>,
        reward: Vec<f64>,
        gamma: f64,
        terminal: Vec<bool>,
        initial_dist: Vec<f64>,
    ) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::InvalidMdp("need at least one state and one action".into()));
        }
        let dims = [
            ("transition entries", n_states * n_actions * n_states, transition.len()),
            ("reward entries", n_states * n_actions, reward.len()),
            ("terminal mask", n_states, terminal.len()),
            ("initial distribution", n_states, initial_dist.len()),
        ];
        for (what, expected, got) in dims {
            if expected != got {
                return Err(Error::Dimension { what, expected, got });
            }
        }
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::InvalidMdp(format!("gamma {gamma} not in (0, 1)")));
        }
        if reward.iter().any(|r| !r.is_finite()) {
            return Err(Error::InvalidMdp("non-finite reward".into()));
        }
        for s in 0..n_states {
            for a in 0..n_actions {
                let row = &transition[(s * n_actions + a) * n_states..(s * n_actions + a + 1) * n_states];
                if row.iter().any(|&p| !(p >= 0.0)) {
                    return Err(Error::InvalidMdp(format!("negative probability in P[{s}][{a}]")));
                }
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > ROW_TOL {
                    return Err(Error::InvalidMdp(format!("P[{s}][{a}] sums to {sum}")));
                }
                if terminal[s] && (row[s] != 1.0 || reward[s * n_actions + a] != 0.0) {
                    return Err(Error::InvalidMdp(format!(
                        "terminal state {s} must be a zero-reward self-loop"
                    )));
                }
            }
        }
        if initial_dist.iter().any(|&p| !(p >= 0.0)) {
            return Err(Error::InvalidMdp("negative initial probability".into()));
        }
        let sum: f64 = initial_dist.iter().sum();
        if (sum - 1.0).abs() > ROW_TOL {
            return Err(Error::InvalidMdp(format!("initial distribution sums to {sum}")));
        }
        Ok(TabularMdp {
            n_states,
            n_actions,
            transition,
            reward,
            gamma,
            terminal,
            initial_dist,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Copy of this MDP with a different discount.
    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::InvalidMdp(format!("gamma {gamma} not in (0, 1)")));
        }
        Ok(TabularMdp {
            gamma,
            ..self.clone()
        })
    }

    /// `P[s][a][·]`.
    pub fn transition_row(&self, s: usize, a: usize) -> &[f64] {
        let start = (s * self.n_actions + a) * self.n_states;
        &self.transition[start..start + self.n_states]
    }

    pub fn prob(&self, s: usize, a: usize, s_next: usize) -> f64 {
        self.transition_row(s, a)[s_next]
    }

    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.reward[s * self.n_actions + a]
    }

    pub fn is_terminal(&self, s: usize) -> bool {
        self.terminal[s]
    }

    pub fn terminal_mask(&self) -> &[bool] {
        &self.terminal
    }

    pub fn initial_dist(&self) -> &[f64] {
        &self.initial_dist
    }

    /// Expected bootstrap `Σ_{s'} P(s'|s,a) (1 − terminal(s')) v(s')`.
    pub(crate) fn expected_next(&self, s: usize, a: usize, v: &[f64]) -> f64 {
        self.transition_row(s, a)
            .iter()
            .enumerate()
            .filter(|&(sn, &p)| p != 0.0 && !self.terminal[sn])
            .map(|(sn, &p)| p * v[sn])
            .sum()
    }

    /// Policy-averaged transition matrix `P^π[s][s']` (row-major), including
    /// terminal self-loops.
    pub(crate) fn policy_transition(&self, probs: &crate::tables::QTable) -> Vec<f64> {
        let n = self.n_states;
        let mut p = vec![0.0; n * n];
        for s in 0..n {
            for a in 0..self.n_actions {
                let pa = probs.get(s, a);
                if pa == 0.0 {
                    continue;
                }
                for (sn, &t) in self.transition_row(s, a).iter().enumerate() {
                    p[s * n + sn] += pa * t;
                }
            }
        }
        p
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::TabularMdp;

    /// One continuing state, two actions with rewards (0, 1), γ = 0.5.
    pub fn one_state() -> TabularMdp {
        TabularMdp::new(1, 2, vec![1.0, 1.0], vec![0.0, 1.0], 0.5, vec![false], vec![1.0]).unwrap()
    }

    /// Deterministic two-state chain S → T with T terminal.
    pub fn chain() -> TabularMdp {
        TabularMdp::new(
            2,
            1,
            vec![0.0, 1.0, 0.0, 1.0],
            vec![1.0, 0.0],
            0.9,
            vec![false, true],
            vec![1.0, 0.0],
        )
        .unwrap()
    }
}
