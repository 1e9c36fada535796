use nalgebra::{DMatrix, DVector};

use super::TabularMdp;
use crate::error::{Error, Result};
use crate::tables::{QTable, TabularPolicy, VTable};

/// Policy evaluation solves the linear system directly up to this many states
/// and iterates `T^π` above it.
pub const DIRECT_SOLVE_MAX_STATES: usize = 2000;

const DEFAULT_TOL: f64 = 1e-10;
const ITERATION_CAP: usize = 10_000_000;

fn check_policy(policy: &TabularPolicy, mdp: &TabularMdp) -> Result<()> {
    policy.logits().check_shape(mdp.n_states(), mdp.n_actions())
}

/// `(T^π Q)(s,a) = R(s,a) + γ Σ_{s'} P(s'|s,a) Σ_b π(s',b) Q(s',b)`.
pub fn apply_bellman_pi(q: &QTable, policy: &TabularPolicy, mdp: &TabularMdp) -> Result<QTable> {
    q.check_shape(mdp.n_states(), mdp.n_actions())?;
    check_policy(policy, mdp)?;
    let v: Vec<f64> = (0..mdp.n_states()).map(|s| policy.expectation(s, q.row(s))).collect();
    Ok(backup(mdp, &v))
}

/// `(T* Q)(s,a) = R(s,a) + γ Σ_{s'} P(s'|s,a) max_b Q(s',b)`.
pub fn apply_bellman_star(q: &QTable, mdp: &TabularMdp) -> Result<QTable> {
    q.check_shape(mdp.n_states(), mdp.n_actions())?;
    let v: Vec<f64> = (0..mdp.n_states()).map(|s| q.row_max(s)).collect();
    Ok(backup(mdp, &v))
}

fn backup(mdp: &TabularMdp, v: &[f64]) -> QTable {
    let gamma = mdp.gamma();
    QTable::from_fn(mdp.n_states(), mdp.n_actions(), |s, a| {
        mdp.reward(s, a) + gamma * mdp.expected_next(s, a, v)
    })
}

/// Value iteration from zero until `‖T*Q − Q‖∞ ≤ tol`.
pub fn solve_q_star(mdp: &TabularMdp, tol: f64) -> Result<QTable> {
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tolerance must be positive, got {tol}")));
    }
    let mut q = QTable::zeros(mdp.n_states(), mdp.n_actions());
    loop {
        let next = apply_bellman_star(&q, mdp)?;
        // next − q ≤ tol implies ‖T*next − next‖ ≤ γ·tol.
        let change = next.sup_distance(&q);
        q = next;
        if change <= tol {
            return Ok(q);
        }
    }
}

/// Exact `(Q^π, V^π)` with `‖T^π Q − Q‖∞ ≤ tol`.
pub fn evaluate_policy(mdp: &TabularMdp, policy: &TabularPolicy, tol: f64) -> Result<(QTable, VTable)> {
    check_policy(policy, mdp)?;
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tolerance must be positive, got {tol}")));
    }
    let mut q = if mdp.n_states() <= DIRECT_SOLVE_MAX_STATES {
        direct_solve(mdp, policy).unwrap_or_else(|| QTable::zeros(mdp.n_states(), mdp.n_actions()))
    } else {
        QTable::zeros(mdp.n_states(), mdp.n_actions())
    };
    // Polishes a direct solution; the only route for large MDPs.
    for _ in 0..ITERATION_CAP {
        let next = apply_bellman_pi(&q, policy, mdp)?;
        let residual = next.sup_distance(&q);
        if residual <= tol {
            break;
        }
        q = next;
    }
    let v = VTable::new((0..mdp.n_states()).map(|s| policy.expectation(s, q.row(s))).collect());
    Ok((q, v))
}

pub fn evaluate_policy_default(mdp: &TabularMdp, policy: &TabularPolicy) -> Result<(QTable, VTable)> {
    evaluate_policy(mdp, policy, DEFAULT_TOL)
}

/// Solves `(I − γ P^π_live) V = r^π` where `P^π_live` drops transitions into
/// terminal states, then reads off `Q`.
fn direct_solve(mdp: &TabularMdp, policy: &TabularPolicy) -> Option<QTable> {
    let n = mdp.n_states();
    let gamma = mdp.gamma();
    let p = mdp.policy_transition(policy.probs());
    let mut a = DMatrix::<f64>::identity(n, n);
    let mut b = DVector::<f64>::zeros(n);
    for s in 0..n {
        for sn in 0..n {
            if !mdp.is_terminal(sn) {
                a[(s, sn)] -= gamma * p[s * n + sn];
            }
        }
        b[s] = (0..mdp.n_actions()).map(|a| policy.prob(s, a) * mdp.reward(s, a)).sum();
    }
    let v = a.lu().solve(&b)?;
    let v: Vec<f64> = v.iter().copied().collect();
    if v.iter().any(|x| !x.is_finite()) {
        return None;
    }
    Some(backup(mdp, &v))
}

/// `J(π) = Σ_s μ₀(s) V^π(s)`.
pub fn policy_performance(mdp: &TabularMdp, policy: &TabularPolicy) -> Result<f64> {
    let (_, v) = evaluate_policy_default(mdp, policy)?;
    Ok(mdp.initial_dist().iter().zip(v.as_slice()).map(|(p, v)| p * v).sum())
}

/// `J* = Σ_s μ₀(s) max_a Q*(s,a)`, accurate to about `1e-10 / (1 − γ)`.
pub fn optimal_performance(mdp: &TabularMdp) -> Result<f64> {
    let q = solve_q_star(mdp, DEFAULT_TOL * (1.0 - mdp.gamma()))?;
    Ok(mdp.initial_dist().iter().enumerate().map(|(s, p)| p * q.row_max(s)).sum())
}
