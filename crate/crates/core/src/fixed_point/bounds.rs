use super::FixedPointResult;
use crate::error::{Error, Result};
use crate::mdp::{apply_bellman_pi, apply_bellman_star, TabularMdp};

/// Additive slack on the three inequality chains.
pub const CHAIN_SLACK: f64 = 1e-8;

/// Bellman-residual certificate for one solved fixed point.
///
/// The four norms are computed independently from `Q^π`, `Q̃` and the
/// operators; the chain sides are derived from them on demand.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub alpha: f64,
    pub eta: f64,
    pub gamma: f64,
    /// `min_{s,a} (T*Q^π − Q^π)`.
    pub residual_min: f64,
    /// `max_{s,a} (T*Q^π − Q^π)`.
    pub residual_max: f64,
    /// `|A| α e⁻¹`.
    pub bound: f64,
    /// `‖Q̃ − Q^π‖∞`.
    pub q_gap: f64,
    /// `‖T*Q̃ − T^π Q̃‖∞`.
    pub greedy_gap: f64,
    /// `‖T*Q̃ − Q̃‖∞`.
    pub q_tilde_residual: f64,
    /// `‖T*Q^π − Q^π‖∞`.
    pub q_pi_residual: f64,
    pub passed: bool,
}

impl BoundReport {
    pub fn chain1(&self) -> (f64, f64) {
        (self.q_gap, self.eta / (1.0 - self.eta * self.gamma) * self.greedy_gap)
    }

    pub fn chain2(&self) -> (f64, f64) {
        (self.q_tilde_residual, 3.0 / (1.0 - self.eta * self.gamma) * self.greedy_gap)
    }

    pub fn chain3(&self) -> (f64, f64) {
        (self.q_pi_residual, (1.0 + self.gamma) * self.q_gap + self.q_tilde_residual)
    }

    pub fn chains_hold(&self, slack: f64) -> bool {
        [self.chain1(), self.chain2(), self.chain3()]
            .iter()
            .all(|(lhs, rhs)| lhs <= &(rhs + slack))
    }

    pub fn residual_bound_holds(&self, slack: f64) -> bool {
        self.residual_min >= -slack && self.residual_max <= self.bound + slack
    }
}

fn measure(mdp: &TabularMdp, result: &FixedPointResult, alpha: f64, eta: f64, gamma: f64) -> Result<BoundReport> {
    let q_pi = &result.q_pi;
    let q_tilde = &result.q_tilde;
    let residual = apply_bellman_star(q_pi, mdp)?.sub(q_pi);
    let star_tilde = apply_bellman_star(q_tilde, mdp)?;
    let pi_tilde = apply_bellman_pi(q_tilde, &result.policy, mdp)?;
    Ok(BoundReport {
        alpha,
        eta,
        gamma,
        residual_min: residual.min(),
        residual_max: residual.max(),
        bound: mdp.n_actions() as f64 * alpha * (-1f64).exp(),
        q_gap: q_tilde.sup_distance(q_pi),
        greedy_gap: star_tilde.sup_distance(&pi_tilde),
        q_tilde_residual: star_tilde.sup_distance(q_tilde),
        q_pi_residual: residual.sup_norm(),
        passed: false,
    })
}

/// Checks `0 ≤ T*Q^π − Q^π ≤ |A| α e⁻¹` elementwise with slack `10·tol`.
pub fn bellman_residual_report(mdp: &TabularMdp, result: &FixedPointResult, alpha: f64) -> Result<BoundReport> {
    let mut report = measure(mdp, result, alpha, 0.0, mdp.gamma())?;
    report.passed = report.residual_bound_holds(10.0 * result.tol);
    Ok(report)
}

/// Checks the three inequalities relating `Q̃`, `Q^π` and their Bellman
/// residuals at a fixed point of the combined update:
///
/// 1. `‖Q̃ − Q^π‖ ≤ η/(1 − ηγ) ‖T*Q̃ − T^π Q̃‖`
/// 2. `‖T*Q̃ − Q̃‖ ≤ 3/(1 − ηγ) ‖T*Q̃ − T^π Q̃‖`
/// 3. `‖T*Q^π − Q^π‖ ≤ (1 + γ) ‖Q̃ − Q^π‖ + ‖T*Q̃ − Q̃‖`
pub fn verify_appendix_bounds(
    mdp: &TabularMdp,
    result: &FixedPointResult,
    alpha: f64,
    eta: f64,
    gamma: f64,
) -> Result<BoundReport> {
    if !(eta * gamma < 1.0) {
        return Err(Error::Domain(format!("need eta·gamma < 1, got {}", eta * gamma)));
    }
    let mut report = measure(mdp, result, alpha, eta, gamma)?;
    report.passed = report.chains_hold(CHAIN_SLACK);
    Ok(report)
}
