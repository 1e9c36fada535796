//! Solvers and numerical certificates for the fixed points of
//! entropy-regularized policy gradient and of its combination with
//! Q-learning.
//!
//! At a fixed point of regularized policy gradient the policy is a softmax of
//! its own Q-values, `π ∝ exp(Q^π/α)`, so a policy together with a value table
//! determines a Q-estimate
//!
//! ```text
//! Q̃(s,a) = α (log π(s,a) + H(s)) + V(s)
//! ```
//!
//! ([`q_tilde_from_policy`]). Adding a Q-learning update on `Q̃` with weight `η`
//! moves the fixed point to `Q̃ = (1 − η) Q^π + η T*Q̃`
//! ([`solve_qtilde_modified`], [`solve_pgql_fixed_point`]). The report
//! functions check the Bellman-residual bound `0 ≤ T*Q^π − Q^π ≤ |A| α / e`
//! and the three inequalities that carry it over to the combined update.

mod bounds;
mod solve;

pub use bounds::{bellman_residual_report, verify_appendix_bounds, BoundReport, CHAIN_SLACK};
pub use solve::{
    solve_pgql_fixed_point, solve_qtilde_modified, solve_regularized_fixed_point, FixedPointResult, SolverOptions,
};

use crate::error::{Error, Result};
use crate::tables::{QTable, TabularPolicy, VTable};

/// `Q̃(s,a) = α (log π(s,a) + H(s)) + V(s)`, with log-probabilities from a
/// log-sum-exp over the policy logits.
pub fn q_tilde_from_policy(policy: &TabularPolicy, v: &VTable, alpha: f64) -> Result<QTable> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::Domain(format!("temperature must be positive, got {alpha}")));
    }
    if v.len() != policy.n_states() {
        return Err(Error::Dimension {
            what: "value table",
            expected: policy.n_states(),
            got: v.len(),
        });
    }
    let entropy: Vec<f64> = (0..policy.n_states()).map(|s| policy.entropy(s)).collect();
    Ok(QTable::from_fn(policy.n_states(), policy.n_actions(), |s, a| {
        alpha * (policy.log_prob(s, a) + entropy[s]) + v[s]
    }))
}

/// Weighted least-squares error of regressing `α log π` onto `q`, with the
/// per-state offsets `c_s` solved in closed form (weighted per-state mean).
///
/// Zero exactly when `q − α log π` is constant within every weighted state.
pub fn regression_residual(policy: &TabularPolicy, q: &QTable, alpha: f64, weights: &QTable) -> Result<f64> {
    q.check_shape(policy.n_states(), policy.n_actions())?;
    weights.check_shape(policy.n_states(), policy.n_actions())?;
    if weights.as_slice().iter().any(|&w| !(w >= 0.0)) {
        return Err(Error::Domain("regression weights must be nonnegative".into()));
    }
    let total: f64 = weights.as_slice().iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Domain(format!("regression weights sum to {total}, expected 1")));
    }
    let mut residual = 0.0;
    for s in 0..policy.n_states() {
        let mass: f64 = weights.row(s).iter().sum();
        if mass == 0.0 {
            continue;
        }
        let err: Vec<f64> = (0..policy.n_actions())
            .map(|a| q.get(s, a) - alpha * policy.log_prob(s, a))
            .collect();
        let c = weights.row(s).iter().zip(&err).map(|(w, e)| w * e).sum::<f64>() / mass;
        residual += weights.row(s).iter().zip(&err).map(|(w, e)| w * (e - c).powi(2)).sum::<f64>();
    }
    Ok(residual)
}
