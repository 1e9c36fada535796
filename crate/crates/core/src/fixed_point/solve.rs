use super::q_tilde_from_policy;
use crate::error::{Error, Result};
use crate::mdp::{apply_bellman_star, evaluate_policy, solve_q_star, TabularMdp};
use crate::tables::{QTable, TabularPolicy, VTable};

/// Damped logit iteration settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Stop when the policy is within `tol` (sup-norm) of the softmax of its
    /// target and the α-scaled logits match the target Q-values up to
    /// per-state constants within `tol`.
    pub tol: f64,
    /// Logit step `τ` in `L ← (1 − τ) L + τ Q/α`.
    pub damping: f64,
    pub max_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-10,
            damping: 0.1,
            max_iterations: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointResult {
    pub policy: TabularPolicy,
    /// Exact Q-values of `policy`.
    pub q_pi: QTable,
    /// Q-estimate read off the policy.
    pub q_tilde: QTable,
    pub iterations: usize,
    /// `‖π − softmax(target/α)‖∞` at every iteration.
    pub residual_history: Vec<f64>,
    pub tol: f64,
}

const EVAL_TOL: f64 = 1e-13;
const INNER_TOL: f64 = 1e-13;

/// Fixed point of entropy-regularized policy gradient: `π = softmax(Q^π/α)`.
pub fn solve_regularized_fixed_point(mdp: &TabularMdp, alpha: f64, tol: f64, damping: f64) -> Result<FixedPointResult> {
    let opts = SolverOptions {
        tol,
        damping,
        ..SolverOptions::default()
    };
    solve_regularized_with(mdp, alpha, opts)
}

pub fn solve_regularized_with(mdp: &TabularMdp, alpha: f64, opts: SolverOptions) -> Result<FixedPointResult> {
    check_args(alpha, &opts)?;
    let mut out = damped_iteration(mdp, alpha, &opts, |pi| {
        let (q_pi, _) = evaluate_policy(mdp, pi, EVAL_TOL)?;
        Ok((q_pi.clone(), q_pi))
    })?;
    let v = VTable::new((0..mdp.n_states()).map(|s| out.policy.expectation(s, out.q_pi.row(s))).collect());
    out.q_tilde = q_tilde_from_policy(&out.policy, &v, alpha)?;
    Ok(out)
}

/// Solves `Q̃ = (1 − η) Q^π + η T*Q̃`; the iteration contracts with modulus
/// `ηγ`, and `η = 1` is plain value iteration.
pub fn solve_qtilde_modified(q_pi: &QTable, eta: f64, mdp: &TabularMdp, tol: f64) -> Result<QTable> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::Domain(format!("eta must lie in [0, 1], got {eta}")));
    }
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tolerance must be positive, got {tol}")));
    }
    q_pi.check_shape(mdp.n_states(), mdp.n_actions())?;
    if eta == 1.0 {
        return solve_q_star(mdp, tol);
    }
    modified_from(q_pi.clone(), q_pi, eta, mdp, tol)
}

fn modified_from(start: QTable, q_pi: &QTable, eta: f64, mdp: &TabularMdp, tol: f64) -> Result<QTable> {
    let mut q = start;
    loop {
        let backup = apply_bellman_star(&q, mdp)?;
        let next = QTable::from_fn(q.n_states(), q.n_actions(), |s, a| {
            (1.0 - eta) * q_pi.get(s, a) + eta * backup.get(s, a)
        });
        let change = next.sup_distance(&q);
        q = next;
        if change <= tol {
            return Ok(q);
        }
    }
}

/// Fixed point of the combined update: `π ∝ exp(Q̃/α)` with `Q̃` solving the
/// modified Bellman equation for `Q^π`.
pub fn solve_pgql_fixed_point(
    mdp: &TabularMdp,
    alpha: f64,
    eta: f64,
    tol: f64,
    damping: f64,
) -> Result<FixedPointResult> {
    let opts = SolverOptions {
        tol,
        damping,
        ..SolverOptions::default()
    };
    solve_pgql_with(mdp, alpha, eta, opts)
}

pub fn solve_pgql_with(mdp: &TabularMdp, alpha: f64, eta: f64, opts: SolverOptions) -> Result<FixedPointResult> {
    check_args(alpha, &opts)?;
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::Domain(format!("eta must lie in [0, 1], got {eta}")));
    }
    let mut warm: Option<QTable> = None;
    damped_iteration(mdp, alpha, &opts, |pi| {
        let (q_pi, _) = evaluate_policy(mdp, pi, EVAL_TOL)?;
        let q_tilde = if eta == 1.0 {
            match &warm {
                Some(q) => q.clone(),
                None => solve_q_star(mdp, INNER_TOL)?,
            }
        } else {
            let start = warm.take().unwrap_or_else(|| q_pi.clone());
            modified_from(start, &q_pi, eta, mdp, INNER_TOL)?
        };
        warm = Some(q_tilde.clone());
        Ok((q_pi, q_tilde))
    })
}

fn check_args(alpha: f64, opts: &SolverOptions) -> Result<()> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::Domain(format!("temperature must be positive, got {alpha}")));
    }
    if !(opts.damping > 0.0 && opts.damping <= 1.0) {
        return Err(Error::Domain(format!("damping must lie in (0, 1], got {}", opts.damping)));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::Domain(format!("tolerance must be positive, got {}", opts.tol)));
    }
    Ok(())
}

/// Iterates `L ← (1 − τ) L + τ target(π_L)/α` from uniform logits.
///
/// `target` returns `(Q^π, target Q)`; the result's `q_tilde` is the last
/// target.
fn damped_iteration(
    mdp: &TabularMdp,
    alpha: f64,
    opts: &SolverOptions,
    mut target: impl FnMut(&TabularPolicy) -> Result<(QTable, QTable)>,
) -> Result<FixedPointResult> {
    let (n, na) = (mdp.n_states(), mdp.n_actions());
    let mut logits = QTable::zeros(n, na);
    let mut history = Vec::new();
    for it in 0..opts.max_iterations {
        let policy = TabularPolicy::from_logits(logits.clone()).with_temperature(alpha);
        let (q_pi, q_target) = target(&policy)?;
        let target_logits = QTable::from_fn(n, na, |s, a| q_target.get(s, a) / alpha);
        let target_policy = TabularPolicy::from_logits(target_logits.clone());
        let policy_gap = policy.probs().sup_distance(target_policy.probs());
        let value_gap = centered_gap(&logits, &q_target, alpha);
        history.push(policy_gap);
        if policy_gap <= opts.tol && value_gap <= opts.tol {
            return Ok(FixedPointResult {
                policy,
                q_pi,
                q_tilde: q_target,
                iterations: it,
                residual_history: history,
                tol: opts.tol,
            });
        }
        let tau = opts.damping;
        logits = QTable::from_fn(n, na, |s, a| (1.0 - tau) * logits.get(s, a) + tau * target_logits.get(s, a));
    }
    Err(Error::NotConverged {
        iterations: opts.max_iterations,
        last_residual: history.last().copied().unwrap_or(f64::NAN),
        residual_history: history,
    })
}

/// `max_s max_a |(αL − Q)(s,a) − mean_a (αL − Q)(s,·)|`.
fn centered_gap(logits: &QTable, q: &QTable, alpha: f64) -> f64 {
    let na = logits.n_actions() as f64;
    let mut gap: f64 = 0.0;
    for s in 0..logits.n_states() {
        let diff: Vec<f64> = logits.row(s).iter().zip(q.row(s)).map(|(l, q)| alpha * l - q).collect();
        let mean = diff.iter().sum::<f64>() / na;
        gap = diff.iter().fold(gap, |m, d| m.max((d - mean).abs()));
    }
    gap
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::fixtures::one_state;

    fn sigmoid(x: f64) -> f64 {
        1.0 / (1.0 + (-x).exp())
    }

    #[test]
    fn one_state_regularized_closed_form() {
        let res = solve_regularized_fixed_point(&one_state(), 0.1, 1e-10, 0.1).unwrap();
        assert!((res.policy.prob(0, 1) - sigmoid(10.0)).abs() < 1e-9);
        assert!((res.policy.prob(0, 1) - 0.999_954_6).abs() < 1e-7);
    }

    #[test]
    fn huge_temperature_is_uniform() {
        let res = solve_regularized_fixed_point(&one_state(), 1e6, 1e-10, 0.1).unwrap();
        for a in 0..2 {
            assert!((res.policy.prob(0, a) - 0.5).abs() < 1e-5);
        }
    }

    #[test]
    fn q_tilde_matches_q_pi_at_fixed_point() {
        let res = solve_regularized_fixed_point(&one_state(), 0.5, 1e-10, 0.1).unwrap();
        assert!(res.q_tilde.sup_distance(&res.q_pi) < 1e-8);
    }

    #[test]
    fn modified_fixed_point_limits() {
        let mdp = one_state();
        let q_pi = QTable::from_vec(1, 2, vec![0.5, 1.5]).unwrap();
        assert_eq!(solve_qtilde_modified(&q_pi, 0.0, &mdp, 1e-12).unwrap(), q_pi);
        let star = solve_qtilde_modified(&q_pi, 1.0, &mdp, 1e-12).unwrap();
        assert!(star.sup_distance(&QTable::from_vec(1, 2, vec![1.0, 2.0]).unwrap()) < 1e-11);
        let half = solve_qtilde_modified(&q_pi, 0.5, &mdp, 1e-12).unwrap();
        assert!((half.get(0, 0) - 2.0 / 3.0).abs() < 1e-11);
        assert!((half.get(0, 1) - 5.0 / 3.0).abs() < 1e-11);
    }

    #[test]
    fn bad_arguments() {
        let mdp = one_state();
        assert!(solve_regularized_fixed_point(&mdp, 0.0, 1e-10, 0.1).is_err());
        assert!(solve_regularized_fixed_point(&mdp, 1.0, 1e-10, 0.0).is_err());
        assert!(solve_regularized_fixed_point(&mdp, 1.0, 1e-10, 1.5).is_err());
        assert!(solve_qtilde_modified(&QTable::zeros(1, 2), 1.5, &mdp, 1e-10).is_err());
    }

    #[test]
    fn not_converged_carries_history() {
        let opts = SolverOptions {
            tol: 1e-10,
            damping: 0.1,
            max_iterations: 3,
        };
        match solve_regularized_with(&one_state(), 0.1, opts) {
            Err(Error::NotConverged { residual_history, iterations, .. }) => {
                assert_eq!(iterations, 3);
                assert_eq!(residual_history.len(), 3);
            }
            other => panic!("expected NotConverged, got {other:?}"),
        }
    }

    #[test]
    fn pgql_eta_zero_matches_regularized() {
        let mdp = crate::envs::garnet_generate(&crate::envs::GarnetSpec {
            n_states: 6,
            n_actions: 3,
            branching: 2,
            gamma: 0.9,
            seed: 4,
        })
        .unwrap();
        let a = solve_regularized_fixed_point(&mdp, 0.1, 1e-10, 0.1).unwrap();
        let b = solve_pgql_fixed_point(&mdp, 0.1, 0.0, 1e-10, 0.1).unwrap();
        assert!(a.policy.probs().sup_distance(b.policy.probs()) < 1e-9);
    }

    #[test]
    fn pgql_one_state_policy() {
        let res = solve_pgql_fixed_point(&one_state(), 0.1, 0.5, 1e-10, 0.1).unwrap();
        assert!((res.q_tilde.get(0, 1) - res.q_tilde.get(0, 0) - 1.0).abs() < 1e-9);
        assert!((res.policy.prob(0, 1) - sigmoid(10.0)).abs() < 1e-9);
    }
}
