use crate::error::{Error, Result};
use crate::tables::{QTable, TabularPolicy, VTable};

/// Boltzmann policy `π(s,·) ∝ exp(Q(s,·)/α)`.
pub fn softmax_policy(q: &QTable, alpha: f64) -> Result<TabularPolicy> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::Domain(format!("temperature must be positive, got {alpha}")));
    }
    let logits = QTable::from_fn(q.n_states(), q.n_actions(), |s, a| q.get(s, a) / alpha);
    Ok(TabularPolicy::from_logits(logits).with_temperature(alpha))
}

/// Entropy, value and advantage of a policy against a Q-table.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyStats {
    pub entropy: Vec<f64>,
    pub advantage: QTable,
    pub value: VTable,
}

pub fn policy_stats(policy: &TabularPolicy, q: &QTable) -> Result<PolicyStats> {
    q.check_shape(policy.n_states(), policy.n_actions())?;
    let n = policy.n_states();
    let entropy = (0..n).map(|s| policy.entropy(s)).collect();
    let value: Vec<f64> = (0..n).map(|s| policy.expectation(s, q.row(s))).collect();
    let advantage = QTable::from_fn(n, policy.n_actions(), |s, a| q.get(s, a) - value[s]);
    Ok(PolicyStats {
        entropy,
        advantage,
        value: VTable::new(value),
    })
}
