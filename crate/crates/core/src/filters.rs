//! Universal spectral filters.
//!
//! The filters are the top eigenvectors of the `m x m` Hankel matrix
//! `H[i][j] = (1 - gamma)^(i+j-1) / (i+j-1)` (1-based indices), which equals
//! the integral of `mu_a mu_a^T` over `a in [0, 1 - gamma]` with
//! `mu_a = [1, a, ..., a^(m-1)]`. They depend only on `(m, gamma)`, never on
//! the controlled system.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::par::{self, Execution};

/// Largest admissible stability margin.
pub const GAMMA_MAX: f64 = 2.0 / 3.0;

/// Constant of the stated eigenvalue-decay bound.
pub const TAIL_CONSTANT: f64 = 156_800.0;

pub(crate) fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma <= GAMMA_MAX) {
        return Err(Error::invalid(format!(
            "gamma must lie in (0, 2/3], got {gamma}"
        )));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct HankelMatrix {
    pub m: usize,
    pub gamma: f64,
    pub entries: DMatrix<f64>,
}

impl HankelMatrix {
    pub fn trace(&self) -> f64 {
        self.entries.trace()
    }

    /// Bound on the trace (and hence on every eigenvalue): `ln(2/gamma) / 2`.
    pub fn trace_bound(&self) -> f64 {
        0.5 * (2.0 / self.gamma).ln()
    }

    pub fn max_asymmetry(&self) -> f64 {
        let e = &self.entries;
        let mut worst = 0.0f64;
        for i in 0..self.m {
            for j in 0..i {
                worst = worst.max((e[(i, j)] - e[(j, i)]).abs());
            }
        }
        worst
    }
}

pub fn build_hankel(m: usize, gamma: f64) -> Result<HankelMatrix> {
    if m < 1 {
        return Err(Error::invalid("Hankel dimension m must be at least 1"));
    }
    check_gamma(gamma)?;
    let base = 1.0 - gamma;
    // Entry depends only on i + j; fill the anti-diagonals once.
    let diag: Vec<f64> = (0..2 * m - 1)
        .map(|s| {
            let k = (s + 1) as i32;
            base.powi(k) / f64::from(k)
        })
        .collect();
    let entries = DMatrix::from_fn(m, m, |i, j| diag[i + j]);
    Ok(HankelMatrix { m, gamma, entries })
}

/// Top-`h` eigenpairs of a Hankel matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct FilterBank {
    pub m: usize,
    pub gamma: f64,
    pub h: usize,
    /// Eigenvalues, descending.
    pub sigmas: Vec<f64>,
    /// Unit eigenvectors matching `sigmas`.
    pub phis: Vec<DVector<f64>>,
    /// `sigma_i^(1/4)`.
    pub sigma_quarter: Vec<f64>,
}

fn sign_normalize(v: &mut DVector<f64>) {
    if let Some(first) = v.iter().find(|x| x.abs() > 1e-12) {
        if *first < 0.0 {
            v.neg_mut();
        }
    }
}

pub fn eigendecompose_top(h_mat: &HankelMatrix, h: usize) -> Result<FilterBank> {
    let m = h_mat.m;
    if h < 1 || h > m {
        return Err(Error::invalid(format!(
            "filter count h must satisfy 1 <= h <= m = {m}, got {h}"
        )));
    }
    let max_iter = 200 * m.max(10);
    let eig = SymmetricEigen::try_new(h_mat.entries.clone(), f64::EPSILON, max_iter)
        .ok_or_else(|| {
            Error::NumericalFailure(format!(
                "symmetric eigensolver did not converge within {max_iter} iterations (m = {m})"
            ))
        })?;

    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let top = eig.eigenvalues[order[0]].max(0.0);
    let floor = -1e-12 * top.max(1e-300);
    let mut sigmas = Vec::with_capacity(h);
    let mut phis = Vec::with_capacity(h);
    for &k in order.iter().take(h) {
        let mut s = eig.eigenvalues[k];
        if s < 0.0 {
            if s < floor {
                return Err(Error::NumericalFailure(format!(
                    "Hankel eigenvalue {s:e} is negative beyond round-off"
                )));
            }
            s = 0.0;
        }
        let mut phi: DVector<f64> = eig.eigenvectors.column(k).into_owned();
        sign_normalize(&mut phi);
        sigmas.push(s);
        phis.push(phi);
    }
    let sigma_quarter = sigmas.iter().map(|s| s.powf(0.25)).collect();
    Ok(FilterBank {
        m,
        gamma: h_mat.gamma,
        h,
        sigmas,
        phis,
        sigma_quarter,
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FilterBankFile {
    m: usize,
    gamma: f64,
    h: usize,
    sigmas: Vec<f64>,
    phis: Vec<Vec<f64>>,
}

impl FilterBank {
    /// Builds `H_m` for `gamma` and keeps the top `h` eigenpairs.
    pub fn new(m: usize, gamma: f64, h: usize) -> Result<Self> {
        eigendecompose_top(&build_hankel(m, gamma)?, h)
    }

    /// Filter `i` as a slice (0-based).
    pub fn phi(&self, i: usize) -> &[f64] {
        self.phis[i].as_slice()
    }

    /// `sum_i sigma_i phi_i phi_i^T`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.m, self.m);
        for (s, phi) in self.sigmas.iter().zip(&self.phis) {
            out += *s * phi * phi.transpose();
        }
        out
    }

    pub fn max_orthonormality_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.h {
            for j in 0..=i {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((self.phis[i].dot(&self.phis[j]) - target).abs());
            }
        }
        worst
    }

    /// `max_i ||H phi_i - sigma_i phi_i||`.
    pub fn max_residual(&self, h_mat: &HankelMatrix) -> f64 {
        self.phis
            .iter()
            .zip(&self.sigmas)
            .map(|(phi, s)| (&h_mat.entries * phi - *s * phi).norm())
            .fold(0.0, f64::max)
    }

    /// JSON document `{m, gamma, h, sigmas, phis}` with 17 significant digits.
    pub fn to_json(&self) -> String {
        let num = |x: f64| format!("{x:.16e}");
        let mut out = String::new();
        let _ = write!(
            out,
            "{{\"m\":{},\"gamma\":{},\"h\":{},\"sigmas\":[",
            self.m,
            num(self.gamma),
            self.h
        );
        let sig: Vec<String> = self.sigmas.iter().map(|&s| num(s)).collect();
        out.push_str(&sig.join(","));
        out.push_str("],\"phis\":[");
        let rows: Vec<String> = self
            .phis
            .iter()
            .map(|phi| {
                let vals: Vec<String> = phi.iter().map(|&v| num(v)).collect();
                format!("[{}]", vals.join(","))
            })
            .collect();
        out.push_str(&rows.join(","));
        out.push_str("]}");
        out
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: FilterBankFile = serde_json::from_str(text)?;
        check_gamma(file.gamma)?;
        if file.h < 1 || file.h > file.m {
            return Err(Error::invalid(format!(
                "filter bank h = {} incompatible with m = {}",
                file.h, file.m
            )));
        }
        if file.sigmas.len() != file.h || file.phis.len() != file.h {
            return Err(Error::invalid("filter bank arrays do not match h"));
        }
        if let Some(bad) = file.phis.iter().find(|p| p.len() != file.m) {
            return Err(Error::DimensionMismatch {
                context: "filter length",
                expected: file.m,
                actual: bad.len(),
            });
        }
        let sigma_quarter = file.sigmas.iter().map(|s| s.max(0.0).powf(0.25)).collect();
        Ok(FilterBank {
            m: file.m,
            gamma: file.gamma,
            h: file.h,
            sigmas: file.sigmas,
            phis: file.phis.into_iter().map(DVector::from_vec).collect(),
            sigma_quarter,
        })
    }
}

/// Number of strict sign changes in `v`, skipping exact zeros.
pub fn sign_changes(v: &[f64]) -> usize {
    let mut last = 0.0f64;
    let mut count = 0;
    for &x in v {
        if x == 0.0 {
            continue;
        }
        if last != 0.0 && x.signum() != last.signum() {
            count += 1;
        }
        last = x;
    }
    count
}

#[derive(Clone, Debug, PartialEq)]
pub struct MuVector {
    pub alpha: f64,
    pub values: DVector<f64>,
}

impl MuVector {
    pub fn norm_squared(&self) -> f64 {
        self.values.norm_squared()
    }
}

/// `[1, alpha, ..., alpha^(m-1)]`.
pub fn mu_vector(alpha: f64, m: usize) -> Result<MuVector> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::invalid(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    let mut values = DVector::zeros(m);
    let mut p = 1.0;
    for v in values.iter_mut() {
        *v = p;
        p *= alpha;
    }
    Ok(MuVector { alpha, values })
}

#[derive(Clone, Debug, PartialEq)]
pub struct TailBoundRow {
    /// 1-based eigenvalue index.
    pub j: usize,
    pub sigma: f64,
    /// `156800 ln(2/gamma) exp(-pi^2 j / (4 ln T))`.
    pub bound: f64,
    pub ratio: f64,
    /// Same constant with exponent `-pi^2 j / (2 ln T)`.
    pub strong_bound: f64,
    pub strong_pass: bool,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TailBoundReport {
    pub horizon: u64,
    pub trace_bound: f64,
    pub rows: Vec<TailBoundRow>,
}

impl TailBoundReport {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn strong_all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.strong_pass)
    }
}

pub fn verify_tail_bound(bank: &FilterBank, horizon: u64) -> Result<TailBoundReport> {
    if horizon < 10 {
        return Err(Error::invalid(format!(
            "tail bound needs T >= 10, got {horizon}"
        )));
    }
    let log_t = (horizon as f64).ln();
    let log_g = (2.0 / bank.gamma).ln();
    let trace_bound = 0.5 * log_g;
    let pi2 = std::f64::consts::PI * std::f64::consts::PI;
    let rows = bank
        .sigmas
        .iter()
        .enumerate()
        .map(|(idx, &sigma)| {
            let j = idx + 1;
            let bound = TAIL_CONSTANT * log_g * (-pi2 * j as f64 / (4.0 * log_t)).exp();
            let strong_bound = TAIL_CONSTANT * log_g * (-pi2 * j as f64 / (2.0 * log_t)).exp();
            TailBoundRow {
                j,
                sigma,
                bound,
                ratio: sigma / bound,
                strong_bound,
                strong_pass: sigma <= strong_bound,
                pass: sigma <= bound && sigma <= trace_bound,
            }
        })
        .collect();
    Ok(TailBoundReport {
        horizon,
        trace_bound,
        rows,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct InnerProductReport {
    pub checked: usize,
    pub failures: usize,
    /// Smallest `bound - |mu^T phi_j|` over the grid (negative on failure).
    pub worst_slack: f64,
    /// Largest `|mu^T phi_j| / (sqrt(2/gamma) sigma_j^(1/4))` among filters with nonzero bound.
    pub max_ratio: f64,
}

impl InnerProductReport {
    pub fn pass(&self) -> bool {
        self.failures == 0
    }
}

/// Checks `|mu_a^T phi_j| <= sqrt(2/gamma) sigma_j^(1/4)` (plus `1e-9`) on every grid point.
pub fn verify_inner_product_bound(
    bank: &FilterBank,
    alpha_grid: &[f64],
) -> Result<InnerProductReport> {
    let hi = 1.0 - bank.gamma;
    if let Some(a) = alpha_grid
        .iter()
        .find(|&&a| !(a >= 0.0 && a <= hi + 1e-12))
    {
        return Err(Error::invalid(format!(
            "alpha {a} outside [0, 1 - gamma] = [0, {hi}]"
        )));
    }
    let scale = (2.0 / bank.gamma).sqrt();
    let per_alpha = par::map(Execution::Parallel, alpha_grid, |&alpha| {
        let mu = mu_vector(alpha.min(hi), bank.m).expect("alpha validated");
        let mut failures = 0usize;
        let mut slack = f64::INFINITY;
        let mut ratio = 0.0f64;
        for (phi, q) in bank.phis.iter().zip(&bank.sigma_quarter) {
            let ip = mu.values.dot(phi).abs();
            let limit = scale * q;
            let s = limit + 1e-9 - ip;
            if s < 0.0 {
                failures += 1;
            }
            slack = slack.min(s);
            if limit > 0.0 {
                ratio = ratio.max(ip / limit);
            }
        }
        (failures, slack, ratio)
    });
    let mut report = InnerProductReport {
        checked: alpha_grid.len() * bank.h,
        failures: 0,
        worst_slack: f64::INFINITY,
        max_ratio: 0.0,
    };
    for (f, s, r) in per_alpha {
        report.failures += f;
        report.worst_slack = report.worst_slack.min(s);
        report.max_ratio = report.max_ratio.max(r);
    }
    Ok(report)
}

/// `n` equispaced points covering `[0, 1 - gamma]`.
pub fn alpha_grid(gamma: f64, n: usize) -> Vec<f64> {
    let hi = 1.0 - gamma;
    if n <= 1 {
        return vec![0.0];
    }
    (0..n).map(|i| hi * i as f64 / (n - 1) as f64).collect()
}
