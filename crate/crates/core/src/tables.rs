//! Dense tables indexed by state, or by state and action.

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// Action-value table `Q[s][a]`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    n_states: usize,
    n_actions: usize,
    values: Vec<f64>,
}

impl QTable {
    pub fn zeros(n_states: usize, n_actions: usize) -> Self {
        Self::filled(n_states, n_actions, 0.0)
    }

    pub fn filled(n_states: usize, n_actions: usize, value: f64) -> Self {
        QTable {
            n_states,
            n_actions,
            values: vec![value; n_states * n_actions],
        }
    }

    pub fn from_vec(n_states: usize, n_actions: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n_states * n_actions {
            return Err(Error::Dimension {
                what: "q-table entries",
                expected: n_states * n_actions,
                got: values.len(),
            });
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite table entry {bad}")));
        }
        Ok(QTable {
            n_states,
            n_actions,
            values,
        })
    }

    /// Builds a table from a function of `(s, a)`.
    pub fn from_fn(n_states: usize, n_actions: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(n_states * n_actions);
        for s in 0..n_states {
            for a in 0..n_actions {
                values.push(f(s, a));
            }
        }
        QTable {
            n_states,
            n_actions,
            values,
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.values[s * self.n_actions + a]
    }

    pub fn set(&mut self, s: usize, a: usize, value: f64) {
        self.values[s * self.n_actions + a] = value;
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.values[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn row_mut(&mut self, s: usize) -> &mut [f64] {
        &mut self.values[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    /// Largest entry of row `s`.
    pub fn row_max(&self, s: usize) -> f64 {
        self.row(s).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Index of the largest entry of row `s`; the first one on ties.
    pub fn argmax(&self, s: usize) -> usize {
        let row = self.row(s);
        let mut best = 0;
        for (a, &v) in row.iter().enumerate() {
            if v > row[best] {
                best = a;
            }
        }
        best
    }

    pub fn same_shape(&self, other: &QTable) -> bool {
        self.n_states == other.n_states && self.n_actions == other.n_actions
    }

    pub(crate) fn check_shape(&self, n_states: usize, n_actions: usize) -> Result<()> {
        if self.n_states != n_states {
            return Err(Error::Dimension {
                what: "q-table states",
                expected: n_states,
                got: self.n_states,
            });
        }
        if self.n_actions != n_actions {
            return Err(Error::Dimension {
                what: "q-table actions",
                expected: n_actions,
                got: self.n_actions,
            });
        }
        Ok(())
    }

    /// Elementwise `self - other`.
    pub fn sub(&self, other: &QTable) -> QTable {
        debug_assert!(self.same_shape(other));
        QTable {
            n_states: self.n_states,
            n_actions: self.n_actions,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `‖self − other‖∞`.
    pub fn sup_distance(&self, other: &QTable) -> f64 {
        debug_assert!(self.same_shape(other));
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

impl Index<(usize, usize)> for QTable {
    type Output = f64;

    fn index(&self, (s, a): (usize, usize)) -> &f64 {
        &self.values[s * self.n_actions + a]
    }
}

impl IndexMut<(usize, usize)> for QTable {
    fn index_mut(&mut self, (s, a): (usize, usize)) -> &mut f64 {
        &mut self.values[s * self.n_actions + a]
    }
}

/// State-value vector `V[s]`.
#[derive(Debug, Clone, PartialEq)]
pub struct VTable {
    values: Vec<f64>,
}

impl VTable {
    pub fn zeros(n_states: usize) -> Self {
        VTable {
            values: vec![0.0; n_states],
        }
    }

    pub fn new(values: Vec<f64>) -> Self {
        VTable { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, s: usize) -> f64 {
        self.values[s]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }
}

impl Index<usize> for VTable {
    type Output = f64;

    fn index(&self, s: usize) -> &f64 {
        &self.values[s]
    }
}

impl IndexMut<usize> for VTable {
    fn index_mut(&mut self, s: usize) -> &mut f64 {
        &mut self.values[s]
    }
}

/// A softmax policy over per-state action logits.
///
/// The logits `W` are stored as given; probabilities and log-probabilities are
/// derived once at construction with a log-sum-exp per state, so every row of
/// [`probs`](Self::prob) is strictly positive (up to underflow of extremely
/// negative logits) and sums to one.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularPolicy {
    logits: QTable,
    log_probs: QTable,
    probs: QTable,
    temperature: Option<f64>,
}

impl TabularPolicy {
    pub fn from_logits(logits: QTable) -> Self {
        let (n_states, n_actions) = (logits.n_states(), logits.n_actions());
        let mut log_probs = QTable::zeros(n_states, n_actions);
        let mut probs = QTable::zeros(n_states, n_actions);
        for s in 0..n_states {
            let lse = log_sum_exp(logits.row(s));
            for a in 0..n_actions {
                let lp = logits.get(s, a) - lse;
                log_probs.set(s, a, lp);
                probs.set(s, a, lp.exp());
            }
        }
        TabularPolicy {
            logits,
            log_probs,
            probs,
            temperature: None,
        }
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        Self::from_logits(QTable::zeros(n_states, n_actions))
    }

    /// Attaches the temperature the logits were derived with.
    pub fn with_temperature(mut self, alpha: f64) -> Self {
        self.temperature = Some(alpha);
        self
    }

    pub fn temperature(&self) -> Option<f64> {
        self.temperature
    }

    pub fn n_states(&self) -> usize {
        self.logits.n_states()
    }

    pub fn n_actions(&self) -> usize {
        self.logits.n_actions()
    }

    pub fn logits(&self) -> &QTable {
        &self.logits
    }

    pub fn probs(&self) -> &QTable {
        &self.probs
    }

    pub fn log_probs(&self) -> &QTable {
        &self.log_probs
    }

    pub fn prob(&self, s: usize, a: usize) -> f64 {
        self.probs.get(s, a)
    }

    pub fn log_prob(&self, s: usize, a: usize) -> f64 {
        self.log_probs.get(s, a)
    }

    /// `H(s) = −Σ_a π(s,a) log π(s,a)`.
    pub fn entropy(&self, s: usize) -> f64 {
        -self
            .probs
            .row(s)
            .iter()
            .zip(self.log_probs.row(s))
            .map(|(p, lp)| p * lp)
            .sum::<f64>()
    }

    /// `Σ_a π(s,a) x(s,a)`.
    pub fn expectation(&self, s: usize, x: &[f64]) -> f64 {
        self.probs.row(s).iter().zip(x).map(|(p, v)| p * v).sum()
    }
}

/// `log Σ exp(x_i)` with max subtraction.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_sum_exp_handles_large_logits() {
        let v = log_sum_exp(&[1000.0, 1000.0]);
        assert!((v - (1000.0 + 2f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn policy_rows_are_normalized() {
        let logits = QTable::from_vec(2, 3, vec![0.0, 1.0, -2.0, 500.0, -500.0, 3.0]).unwrap();
        let p = TabularPolicy::from_logits(logits);
        for s in 0..2 {
            let sum: f64 = p.probs().row(s).iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn non_finite_entries_rejected() {
        assert!(QTable::from_vec(1, 2, vec![0.0, f64::NAN]).is_err());
        assert!(QTable::from_vec(1, 2, vec![0.0]).is_err());
    }

    #[test]
    fn argmax_takes_first_tie() {
        let q = QTable::from_vec(1, 3, vec![1.0, 2.0, 2.0]).unwrap();
        assert_eq!(q.argmax(0), 1);
    }
}
