use std::fs;
use std::path::Path;

use crate::envs::{garnet_generate, GarnetSpec};
use crate::error::{Error, Result};
use crate::fixed_point::{
    solve_pgql_fixed_point, solve_regularized_fixed_point, verify_appendix_bounds, BoundReport, CHAIN_SLACK,
};

pub const CERTIFICATE_COLUMNS: &str =
    "mdp_seed,alpha,eta,residual_min,residual_max,bound,chain1_lhs,chain1_rhs,chain2_lhs,chain2_rhs,chain3_lhs,chain3_rhs,passed";

/// Sweep of random MDPs, temperatures and mixing weights.
#[derive(Debug, Clone, PartialEq)]
pub struct CertifyConfig {
    pub mdp_seeds: Vec<u64>,
    pub alphas: Vec<f64>,
    /// `η = 0` is the plain regularized fixed point.
    pub etas: Vec<f64>,
    pub n_states: usize,
    pub n_actions: usize,
    pub branching: usize,
    pub gamma: f64,
    pub tol: f64,
    pub damping: f64,
}

impl Default for CertifyConfig {
    fn default() -> Self {
        CertifyConfig {
            mdp_seeds: (0..20).collect(),
            alphas: vec![1.0, 0.1, 0.01],
            etas: vec![0.0, 0.25, 0.5, 0.75],
            n_states: 10,
            n_actions: 4,
            branching: 3,
            gamma: 0.9,
            tol: 1e-10,
            damping: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertificateRow {
    pub mdp_seed: u64,
    pub report: BoundReport,
}

impl CertificateRow {
    pub fn passed(&self) -> bool {
        self.report.passed
    }

    fn csv(&self) -> String {
        let r = &self.report;
        let (c1, c2, c3) = (r.chain1(), r.chain2(), r.chain3());
        format!(
            "{},{},{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{}",
            self.mdp_seed,
            r.alpha,
            r.eta,
            r.residual_min,
            r.residual_max,
            r.bound,
            c1.0,
            c1.1,
            c2.0,
            c2.1,
            c3.0,
            c3.1,
            r.passed
        )
    }
}

/// Solves each fixed point and checks its bounds.
///
/// Rows with `η = 0` must satisfy the residual bound and the chains; rows with
/// `η > 0` must satisfy the chains.
pub fn certify(config: &CertifyConfig) -> Result<Vec<CertificateRow>> {
    let mut rows = Vec::new();
    for &mdp_seed in &config.mdp_seeds {
        let mdp = garnet_generate(&GarnetSpec {
            n_states: config.n_states,
            n_actions: config.n_actions,
            branching: config.branching,
            gamma: config.gamma,
            seed: mdp_seed,
        })?;
        for &alpha in &config.alphas {
            for &eta in &config.etas {
                let result = if eta == 0.0 {
                    solve_regularized_fixed_point(&mdp, alpha, config.tol, config.damping)?
                } else {
                    solve_pgql_fixed_point(&mdp, alpha, eta, config.tol, config.damping)?
                };
                let mut report = verify_appendix_bounds(&mdp, &result, alpha, eta, mdp.gamma())?;
                if eta == 0.0 {
                    report.passed &= report.residual_bound_holds(CHAIN_SLACK);
                }
                rows.push(CertificateRow { mdp_seed, report });
            }
        }
    }
    Ok(rows)
}

pub fn write_certificate(path: &Path, rows: &[CertificateRow]) -> Result<()> {
    let mut text = String::from(CERTIFICATE_COLUMNS);
    text.push('\n');
    for row in rows {
        text.push_str(&row.csv());
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
