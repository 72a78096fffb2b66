//! Gauss-Legendre quadrature, used to cross-check the Hankel matrix against
//! its integral representation.

use nalgebra::DMatrix;

use crate::error::Result;
use crate::filters::{check_gamma, mu_vector};

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// `int_0^{1-gamma} mu_a mu_a^T da` evaluated with an `nodes`-point rule.
pub fn hankel_by_quadrature(m: usize, gamma: f64, nodes: usize) -> Result<DMatrix<f64>> {
    check_gamma(gamma)?;
    let (xs, ws) = gauss_legendre(nodes);
    let half = 0.5 * (1.0 - gamma);
    let mut out = DMatrix::zeros(m, m);
    for (x, w) in xs.iter().zip(&ws) {
        let alpha = half * (x + 1.0);
        let mu = mu_vector(alpha, m)?.values;
        out += (w * half) * &mu * mu.transpose();
    }
    Ok(out)
}
