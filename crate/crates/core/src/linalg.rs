//! Small dense linear-algebra helpers shared across modules.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Largest singular value.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}

/// Eigenvalues of a general square matrix as `(re, im)` pairs.
pub fn eigenvalues(m: &DMatrix<f64>) -> Vec<(f64, f64)> {
    m.clone()
        .complex_eigenvalues()
        .iter()
        .map(|z| (z.re, z.im))
        .collect()
}

/// Largest eigenvalue modulus.
pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    eigenvalues(m)
        .into_iter()
        .map(|(re, im)| re.hypot(im))
        .fold(0.0, f64::max)
}

/// Numerical rank from singular values, relative tolerance `rel_tol * sigma_max`.
pub fn rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    let sv = m.singular_values();
    let top = sv.max();
    if top == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * top).count()
}

pub fn from_row_major(rows: usize, cols: usize, data: &[f64]) -> Result<DMatrix<f64>> {
    if data.len() != rows * cols {
        return Err(Error::DimensionMismatch {
            context: "row-major matrix data",
            expected: rows * cols,
            actual: data.len(),
        });
    }
    Ok(DMatrix::from_row_slice(rows, cols, data))
}

pub fn to_row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.len());
    for r in 0..m.nrows() {
        out.extend(m.row(r).iter().copied());
    }
    out
}

/// Scales `v` onto the Euclidean ball of the given radius when it lies outside.
pub fn clip_norm(mut v: DVector<f64>, radius: f64) -> DVector<f64> {
    let norm = v.norm();
    if norm > radius && norm > 0.0 {
        v *= radius / norm;
    }
    v
}

/// `A^0, A^1, ..., A^(count-1)`.
pub fn powers(a: &DMatrix<f64>, count: usize) -> Vec<DMatrix<f64>> {
    let mut out = Vec::with_capacity(count);
    if count == 0 {
        return out;
    }
    let mut p = DMatrix::identity(a.nrows(), a.ncols());
    for _ in 0..count {
        let next = a * &p;
        out.push(p);
        p = next;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radius_of_rotation_is_one() {
        let r = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        assert!((spectral_radius(&r) - 1.0).abs() < 1e-12);
        assert!((spectral_norm(&r) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn row_major_round_trip() {
        let m = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let flat = to_row_major(&m);
        assert_eq!(flat, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(from_row_major(2, 3, &flat).unwrap(), m);
        assert!(from_row_major(2, 2, &flat).is_err());
    }

    #[test]
    fn clip_scales_onto_ball() {
        let v = clip_norm(DVector::from_vec(vec![3.0, 4.0]), 1.0);
        assert!((v.norm() - 1.0).abs() < 1e-15);
        let w = clip_norm(DVector::from_vec(vec![0.3, 0.4]), 1.0);
        assert_eq!(w[0], 0.3);
    }
}
