//! Invariant suite over the Hankel matrix and its filters.

use nalgebra::SymmetricEigen;
use serde::Serialize;

use crate::error::Result;
use crate::filters::{
    alpha_grid, build_hankel, eigendecompose_top, mu_vector, verify_inner_product_bound, verify_tail_bound,
};
use crate::quadrature::hankel_by_quadrature;

/// `(m, gamma, T)` triples covered by [`run_suite`].
pub const SUITE_CASES: [(usize, f64, u64); 3] = [(64, 0.1, 1_000), (256, 0.05, 10_000), (500, 0.01, 1_000_000)];
/// Eigenvalues checked against the tail bound.
pub const TAIL_INDICES: usize = 24;
pub const ALPHA_POINTS: usize = 1001;
pub const QUADRATURE_NODES: usize = 256;
pub const QUADRATURE_MAX_M: usize = 6;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub case: String,
    pub name: &'static str,
    pub value: f64,
    pub limit: f64,
    pub pass: bool,
}

impl Check {
    fn le(case: &str, name: &'static str, value: f64, limit: f64) -> Self {
        Check {
            case: case.to_string(),
            name,
            value,
            limit,
            pass: value <= limit,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SuiteReport {
    pub checks: Vec<Check>,
}

impl SuiteReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }
}

/// Checks for one `(m, gamma, T)` case.
pub fn check_case(m: usize, gamma: f64, horizon: u64) -> Result<Vec<Check>> {
    let case = format!("m={m} gamma={gamma} T={horizon}");
    let hm = build_hankel(m, gamma)?;
    let trace = hm.trace();
    let min_eig = SymmetricEigen::new(hm.entries.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let bank = eigendecompose_top(&hm, TAIL_INDICES.min(m))?;
    let sigma1 = bank.sigmas[0];
    let tail = verify_tail_bound(&bank, horizon)?;
    let worst_tail = tail.rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    let grid = alpha_grid(gamma, ALPHA_POINTS);
    let ip = verify_inner_product_bound(&bank, &grid)?;
    let mut mu_max = 0.0f64;
    for &a in &grid {
        mu_max = mu_max.max(mu_vector(a, m)?.norm_squared());
    }

    let mut checks = vec![
        Check::le(&case, "symmetry", hm.max_asymmetry(), 0.0),
        Check::le(&case, "psd", -min_eig, 1e-10 * trace),
        Check::le(&case, "trace_bound", trace, hm.trace_bound()),
        Check::le(&case, "orthonormality", bank.max_orthonormality_error(), 1e-10),
        Check::le(&case, "eigen_residual", bank.max_residual(&hm), 1e-8 * sigma1),
        Check {
            pass: tail.all_pass(),
            ..Check::le(&case, "tail_bound", worst_tail, 1.0)
        },
        Check {
            pass: ip.pass(),
            ..Check::le(&case, "inner_product_bound", -ip.worst_slack, 1e-9)
        },
        Check::le(&case, "mu_norm_bound", mu_max, 1.0 / gamma),
    ];
    for k in 1..=QUADRATURE_MAX_M.min(m) {
        let exact = build_hankel(k, gamma)?.entries;
        let quad = hankel_by_quadrature(k, gamma, QUADRATURE_NODES)?;
        let err = (exact - quad).abs().max();
        checks.push(Check::le(&format!("m={k} gamma={gamma}"), "quadrature_identity", err, 1e-10));
    }
    Ok(checks)
}

/// Runs every check over [`SUITE_CASES`].
pub fn run_suite() -> Result<SuiteReport> {
    let mut report = SuiteReport::default();
    for (m, gamma, horizon) in SUITE_CASES {
        report.checks.extend(check_case(m, gamma, horizon)?);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_case_passes() {
        let checks = check_case(16, 0.2, 1000).unwrap();
        assert!(checks.iter().all(|c| c.pass), "{checks:#?}");
        assert_eq!(checks.iter().filter(|c| c.name == "quadrature_identity").count(), 6);
    }
}
