use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::lds::LdsSystem;
use crate::linalg::{rank, spectral_radius};

const RANK_TOL: f64 = 1e-8;
const RADIUS_SLACK: f64 = 1e-6;

fn controllability(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let d = a.nrows();
    let n = b.ncols();
    let mut c = DMatrix::zeros(d, d * n);
    let mut blk = b.clone();
    for i in 0..d {
        c.view_mut((0, i * n), (d, n)).copy_from(&blk);
        blk = a * blk;
    }
    c
}

/// Single-input gain `k` (`1 x d`) placing the spectrum of `A + b k` at `poles`.
fn ackermann(a: &DMatrix<f64>, b: &DVector<f64>, poles: &[f64]) -> Option<DMatrix<f64>> {
    let d = a.nrows();
    let ctrb = controllability(a, &DMatrix::from_column_slice(d, 1, b.as_slice()));
    if rank(&ctrb, RANK_TOL) < d {
        return None;
    }
    let mut p_of_a = DMatrix::identity(d, d);
    for &p in poles {
        p_of_a = &p_of_a * (a - DMatrix::identity(d, d) * p);
    }
    let mut e = DVector::zeros(d);
    e[d - 1] = 1.0;
    // y^T = e_d^T C^{-1}
    let y = ctrb.transpose().lu().solve(&e)?;
    let k = -(y.transpose() * p_of_a);
    Some(DMatrix::from_row_slice(1, d, k.as_slice()))
}

/// Stabilizing feedback `K0` with `rho(A + B K0) <= target_radius`, placing
/// the closed-loop poles at `target * (i + 1) / d`. Multi-input systems are
/// reduced to one input direction `v` (after a seeded pre-feedback when no
/// coordinate direction is cyclic), giving `K0 = F + v k`.
pub fn pole_placement_k0(sys: &LdsSystem, target_radius: f64) -> Result<DMatrix<f64>> {
    if !(target_radius > 0.0 && target_radius < 1.0) {
        return Err(Error::invalid("target radius must lie in (0, 1)"));
    }
    let (a, b) = (sys.a(), sys.b());
    let (d, n) = (sys.d(), sys.n());
    if spectral_radius(a) <= target_radius {
        return Ok(DMatrix::zeros(n, d));
    }
    let r = rank(&controllability(a, b), RANK_TOL);
    if r < d {
        return Err(Error::NotControllable { rank: r, dim: d });
    }
    let poles: Vec<f64> = (0..d)
        .map(|i| target_radius * (i + 1) as f64 / d as f64)
        .collect();

    let mut directions: Vec<DVector<f64>> = (0..n)
        .map(|j| {
            let mut v = DVector::zeros(n);
            v[j] = 1.0;
            v
        })
        .collect();
    directions.push(DVector::from_fn(n, |j, _| 1.0 / (j + 1) as f64));
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut pre = vec![DMatrix::zeros(n, d)];
    for _ in 0..8 {
        pre.push(DMatrix::from_fn(n, d, |_, _| StandardNormal.sample(&mut rng)));
    }
    for f in &pre {
        let af = a + b * f;
        for v in &directions {
            let Some(k) = ackermann(&af, &(b * v), &poles) else {
                continue;
            };
            let k0 = f + v * k;
            let rho = spectral_radius(&(a + b * &k0));
            if rho.is_finite() && rho <= target_radius + RADIUS_SLACK {
                return Ok(k0);
            }
        }
    }
    Err(Error::NumericalFailure(format!(
        "pole placement could not reach radius {target_radius}"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lds::SystemBounds;

    #[test]
    fn scalar_placement() {
        let sys = LdsSystem::scalar(1.5, 1.0).unwrap();
        let k = pole_placement_k0(&sys, 0.5).unwrap();
        assert!((k[(0, 0)] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn already_stable_gives_zero() {
        let sys = LdsSystem::scalar(0.3, 1.0).unwrap();
        assert_eq!(pole_placement_k0(&sys, 0.5).unwrap(), DMatrix::zeros(1, 1));
    }

    #[test]
    fn companion_three_state() {
        // characteristic polynomial (z - 1.2)(z - 1)(z - 0.8) = z^3 - 3z^2 + 2.96z - 0.96
        let a = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.96, -2.96, 3.0]);
        let b = DMatrix::from_column_slice(3, 1, &[0.0, 0.0, 1.0]);
        let mut eig: Vec<f64> = crate::linalg::eigenvalues(&a).iter().map(|z| z.0).collect();
        eig.sort_by(f64::total_cmp);
        assert!((eig[0] - 0.8).abs() < 1e-6 && (eig[2] - 1.2).abs() < 1e-6);
        let sys = LdsSystem::new(a.clone(), b.clone(), SystemBounds::default()).unwrap();
        let k = pole_placement_k0(&sys, 0.5).unwrap();
        assert!(spectral_radius(&(a + b * k)) <= 0.5 + 1e-6);
    }

    #[test]
    fn multi_input_identity() {
        // no single input column is cyclic for A = 2I
        let a = DMatrix::identity(2, 2) * 2.0;
        let b = DMatrix::identity(2, 2);
        let sys = LdsSystem::new(a.clone(), b.clone(), SystemBounds::default()).unwrap();
        let k = pole_placement_k0(&sys, 0.4).unwrap();
        assert!(spectral_radius(&(a + b * k)) <= 0.4 + 1e-6);
    }

    #[test]
    fn uncontrollable_rejected() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.5]);
        let b = DMatrix::from_column_slice(2, 1, &[0.0, 1.0]);
        let sys = LdsSystem::new(a, b, SystemBounds::default()).unwrap();
        assert!(matches!(
            pole_placement_k0(&sys, 0.5),
            Err(Error::NotControllable { rank: 1, dim: 2 })
        ));
    }
}
