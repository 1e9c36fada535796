use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};

use super::bellman::{evaluate_policy_default, DIRECT_SOLVE_MAX_STATES};
use super::TabularMdp;
use crate::error::{Error, Result};
use crate::tables::{QTable, TabularPolicy};

const VISIT_ITERATION_CAP: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistributionMode {
    /// `ρ(s) = Σ_t γ^t Pr{s_t = s}`, not normalized.
    DiscountedUnnormalized,
    /// Expected visit counts of an episodic policy, normalized to sum to one.
    UndiscountedVisit,
}

pub fn state_distribution(mdp: &TabularMdp, policy: &TabularPolicy, mode: DistributionMode) -> Result<Vec<f64>> {
    policy.logits().check_shape(mdp.n_states(), mdp.n_actions())?;
    match mode {
        DistributionMode::DiscountedUnnormalized => Ok(discounted_occupancy(mdp, policy)),
        DistributionMode::UndiscountedVisit => visit_distribution(mdp, policy),
    }
}

fn discounted_occupancy(mdp: &TabularMdp, policy: &TabularPolicy) -> Vec<f64> {
    let n = mdp.n_states();
    let gamma = mdp.gamma();
    let p = mdp.policy_transition(policy.probs());
    // (I − γ (P^π)ᵀ) ρ = μ₀
    let a = DMatrix::from_fn(n, n, |i, j| {
        let id = if i == j { 1.0 } else { 0.0 };
        id - gamma * p[j * n + i]
    });
    let b = DVector::from_column_slice(mdp.initial_dist());
    match a.lu().solve(&b) {
        Some(rho) => rho.iter().copied().collect(),
        None => {
            // γ < 1 keeps the system nonsingular; iterate if LU still fails numerically.
            let mut rho = mdp.initial_dist().to_vec();
            loop {
                let next = occupancy_step(mdp.initial_dist(), &p, &rho, gamma, n);
                let change = next.iter().zip(&rho).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
                rho = next;
                if change <= 1e-14 {
                    return rho;
                }
            }
        }
    }
}

fn occupancy_step(init: &[f64], p: &[f64], rho: &[f64], scale: f64, n: usize) -> Vec<f64> {
    let mut next = init.to_vec();
    for s in 0..n {
        if rho[s] == 0.0 {
            continue;
        }
        for sn in 0..n {
            next[sn] += scale * rho[s] * p[s * n + sn];
        }
    }
    next
}

fn visit_distribution(mdp: &TabularMdp, policy: &TabularPolicy) -> Result<Vec<f64>> {
    let n = mdp.n_states();
    let p = mdp.policy_transition(policy.probs());
    let init = mdp.initial_dist();

    // Live (non-terminal) states reachable from the initial support.
    let mut reachable = vec![false; n];
    let mut queue: VecDeque<usize> = (0..n).filter(|&s| init[s] > 0.0).collect();
    for &s in &queue {
        reachable[s] = true;
    }
    while let Some(s) = queue.pop_front() {
        if mdp.is_terminal(s) {
            continue;
        }
        for sn in 0..n {
            if p[s * n + sn] > 0.0 && !reachable[sn] {
                reachable[sn] = true;
                queue.push_back(sn);
            }
        }
    }
    // Every reachable live state must be able to reach a terminal state.
    let mut absorbs = mdp.terminal_mask().to_vec();
    let mut changed = true;
    while changed {
        changed = false;
        for s in 0..n {
            if !absorbs[s] && (0..n).any(|sn| p[s * n + sn] > 0.0 && absorbs[sn]) {
                absorbs[s] = true;
                changed = true;
            }
        }
    }
    if (0..n).any(|s| reachable[s] && !absorbs[s]) {
        return Err(Error::NonEpisodic);
    }

    let live: Vec<usize> = (0..n).filter(|&s| reachable[s] && !mdp.is_terminal(s)).collect();
    let m = live.len();
    let counts_live: Vec<f64> = if m <= DIRECT_SOLVE_MAX_STATES {
        // (I − Q_liveᵀ) N = μ₀ restricted to live states.
        let a = DMatrix::from_fn(m, m, |i, j| {
            let id = if i == j { 1.0 } else { 0.0 };
            id - p[live[j] * n + live[i]]
        });
        let b = DVector::from_iterator(m, live.iter().map(|&s| init[s]));
        let sol = a.lu().solve(&b).ok_or(Error::NonEpisodic)?;
        sol.iter().copied().collect()
    } else {
        let mut counts: Vec<f64> = live.iter().map(|&s| init[s]).collect();
        let mut converged = false;
        for _ in 0..VISIT_ITERATION_CAP {
            let mut next: Vec<f64> = live.iter().map(|&s| init[s]).collect();
            for (i, &s) in live.iter().enumerate() {
                for (j, &sn) in live.iter().enumerate() {
                    next[j] += counts[i] * p[s * n + sn];
                }
            }
            let change = next.iter().zip(&counts).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
            counts = next;
            if change <= 1e-14 {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::NonEpisodic);
        }
        counts
    };

    let mut visits = vec![0.0; n];
    for (i, &s) in live.iter().enumerate() {
        visits[s] = counts_live[i];
    }
    for t in (0..n).filter(|&s| mdp.is_terminal(s)) {
        visits[t] = init[t] + live.iter().enumerate().map(|(i, &s)| counts_live[i] * p[s * n + t]).sum::<f64>();
    }
    let total: f64 = visits.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::NonEpisodic);
    }
    Ok(visits.into_iter().map(|v| v / total).collect())
}

/// Gradient of the entropy-regularized objective with respect to the policy
/// logits `W` (where `π(s,·) = softmax(W(s,·))`):
///
/// `g(s,b) = d(s) π(s,b) (Q^π(s,b) − V^π(s)) − α d(s) π(s,b) (log π(s,b) + H(s))`.
///
/// With `α = 0` and the discounted occupancy this is exactly `∇_W J(π)`.
pub fn exact_policy_gradient(
    mdp: &TabularMdp,
    policy: &TabularPolicy,
    alpha: f64,
    mode: DistributionMode,
) -> Result<QTable> {
    if !(alpha >= 0.0) {
        return Err(Error::Domain(format!("entropy weight must be nonnegative, got {alpha}")));
    }
    let d = state_distribution(mdp, policy, mode)?;
    let (q, v) = evaluate_policy_default(mdp, policy)?;
    Ok(QTable::from_fn(mdp.n_states(), mdp.n_actions(), |s, b| {
        let pb = policy.prob(s, b);
        let pg = pb * (q.get(s, b) - v[s]);
        let dh = -pb * (policy.log_prob(s, b) + policy.entropy(s));
        d[s] * (pg + alpha * dh)
    }))
}
