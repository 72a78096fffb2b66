use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::filters::GAMMA_MAX;
use crate::linalg;

/// Bound metadata carried with a system.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SystemBounds {
    /// `kappa >= 1`, bound on the diagonalizer and policy norms.
    pub kappa: f64,
    /// `||B|| <= kappa_b`.
    pub kappa_b: f64,
    /// Disturbance bound `||w_t|| <= W`.
    pub w_bound: f64,
    /// Stability margin in `(0, 2/3]`.
    pub gamma: f64,
}

impl Default for SystemBounds {
    fn default() -> Self {
        SystemBounds {
            kappa: 1.0,
            kappa_b: 1.0,
            w_bound: 1.0,
            gamma: 0.1,
        }
    }
}

/// `x_{t+1} = A x_t + B u_t + w_t`.
#[derive(Clone, Debug, PartialEq)]
pub struct LdsSystem {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    bounds: SystemBounds,
    zero_stable: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
struct SystemFile {
    A: Vec<f64>,
    B: Vec<f64>,
    d: usize,
    n: usize,
    kappa: f64,
    kappa_B: f64,
    W: f64,
    gamma: f64,
}

impl LdsSystem {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, bounds: SystemBounds) -> Result<Self> {
        let d = a.nrows();
        if d == 0 || b.ncols() == 0 {
            return Err(Error::invalid("system dimensions must be positive"));
        }
        check_dim("A columns", d, a.ncols())?;
        check_dim("B rows", d, b.nrows())?;
        if !(bounds.kappa >= 1.0 && bounds.kappa_b >= 1.0 && bounds.w_bound >= 1.0) {
            return Err(Error::invalid("kappa, kappa_B and W must all be >= 1"));
        }
        if !(bounds.gamma > 0.0 && bounds.gamma <= GAMMA_MAX) {
            return Err(Error::invalid(format!(
                "gamma must lie in (0, 2/3], got {}",
                bounds.gamma
            )));
        }
        let b_norm = linalg::spectral_norm(&b);
        if b_norm > bounds.kappa_b + 1e-9 {
            return Err(Error::invalid(format!(
                "||B|| = {b_norm} exceeds kappa_B = {}",
                bounds.kappa_b
            )));
        }
        Ok(LdsSystem {
            a,
            b,
            bounds,
            zero_stable: false,
        })
    }

    /// Scalar system with `kappa_B = max(1, |b|)` and otherwise default bounds.
    pub fn scalar(a: f64, b: f64) -> Result<Self> {
        let bounds = SystemBounds {
            kappa_b: b.abs().max(1.0),
            ..SystemBounds::default()
        };
        Self::new(
            DMatrix::from_element(1, 1, a),
            DMatrix::from_element(1, 1, b),
            bounds,
        )
    }

    /// Marks the zero policy as stable and checks
    /// `||A^i|| <= kappa^2 (1 - gamma)^i` for `i = 1..=ceil(3/gamma)`.
    pub fn with_zero_policy_stable(mut self) -> Result<Self> {
        let SystemBounds { kappa, gamma, .. } = self.bounds;
        let count = (3.0 / gamma).ceil() as usize;
        let mut p = self.a.clone();
        for i in 1..=count {
            let lhs = linalg::spectral_norm(&p);
            let rhs = kappa * kappa * (1.0 - gamma).powi(i as i32);
            if lhs > rhs * (1.0 + 1e-9) + 1e-12 {
                return Err(Error::invalid(format!(
                    "zero policy is not stable: ||A^{i}|| = {lhs} > {rhs}"
                )));
            }
            p = &self.a * p;
        }
        self.zero_stable = true;
        Ok(self)
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn d(&self) -> usize {
        self.a.nrows()
    }

    pub fn n(&self) -> usize {
        self.b.ncols()
    }

    pub fn bounds(&self) -> SystemBounds {
        self.bounds
    }

    pub fn zero_stable(&self) -> bool {
        self.zero_stable
    }

    /// Same system with `A` replaced by `A + B K`.
    pub fn closed_loop(&self, k: &DMatrix<f64>) -> Result<LdsSystem> {
        check_dim("K rows", self.n(), k.nrows())?;
        check_dim("K columns", self.d(), k.ncols())?;
        Ok(LdsSystem {
            a: &self.a + &self.b * k,
            b: self.b.clone(),
            bounds: self.bounds,
            zero_stable: false,
        })
    }

    pub fn step(&self, x: &DVector<f64>, u: &DVector<f64>, w: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim("state", self.d(), x.len())?;
        check_dim("control", self.n(), u.len())?;
        check_dim("disturbance", self.d(), w.len())?;
        Ok(&self.a * x + &self.b * u + w)
    }

    /// `w_t = x_{t+1} - A x_t - B u_t`.
    pub fn recover_disturbance(
        &self,
        x: &DVector<f64>,
        u: &DVector<f64>,
        x_next: &DVector<f64>,
    ) -> Result<DVector<f64>> {
        check_dim("state", self.d(), x.len())?;
        check_dim("control", self.n(), u.len())?;
        check_dim("next state", self.d(), x_next.len())?;
        Ok(x_next - &self.a * x - &self.b * u)
    }

    pub fn to_json(&self) -> Result<String> {
        let f = SystemFile {
            A: linalg::to_row_major(&self.a),
            B: linalg::to_row_major(&self.b),
            d: self.d(),
            n: self.n(),
            kappa: self.bounds.kappa,
            kappa_B: self.bounds.kappa_b,
            W: self.bounds.w_bound,
            gamma: self.bounds.gamma,
        };
        Ok(serde_json::to_string_pretty(&f)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: SystemFile = serde_json::from_str(text)?;
        let a = linalg::from_row_major(f.d, f.d, &f.A)?;
        let b = linalg::from_row_major(f.d, f.n, &f.B)?;
        Self::new(
            a,
            b,
            SystemBounds {
                kappa: f.kappa,
                kappa_b: f.kappa_B,
                w_bound: f.W,
                gamma: f.gamma,
            },
        )
    }
}

/// Options for [`generate_system`] beyond the core `(d, n, rho_max, seed)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GenerateOptions {
    /// If set, `B` is scaled down so that `||B|| <= kappa_b`.
    pub kappa_b: Option<f64>,
    /// Lower bound recorded for `kappa`.
    pub kappa_floor: f64,
    pub w_bound: f64,
}

impl Default for GenerateOptions {
    fn default() -> Self {
        GenerateOptions {
            kappa_b: None,
            kappa_floor: 1.0,
            w_bound: 1.0,
        }
    }
}

/// Random orthogonal `d x d` matrix: QR of a Gaussian matrix with the
/// column signs fixed by the diagonal of `R`.
fn random_orthogonal(d: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(d, d, |_, _| StandardNormal.sample(rng));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Random system with `A = H diag(lambda) H^T`, `H` orthogonal and
/// `lambda ~ U[0, rho_max]` with the largest entry forced to `rho_max`, and a
/// Gaussian `B`.
pub fn generate_system(
    d: usize,
    n: usize,
    rho_max: f64,
    seed: u64,
    opts: GenerateOptions,
) -> Result<LdsSystem> {
    if !(0.0..1.0).contains(&rho_max) {
        return Err(Error::invalid(format!(
            "rho_max must lie in [0, 1), got {rho_max}"
        )));
    }
    if d == 0 || n == 0 {
        return Err(Error::invalid("system dimensions must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lambda: Vec<f64> = if rho_max > 0.0 {
        let dist = Uniform::new_inclusive(0.0, rho_max)
            .map_err(|e| Error::invalid(e.to_string()))?;
        (0..d).map(|_| dist.sample(&mut rng)).collect()
    } else {
        vec![0.0; d]
    };
    let top = (0..d)
        .max_by(|&i, &j| lambda[i].total_cmp(&lambda[j]))
        .unwrap_or(0);
    lambda[top] = rho_max;
    let h = if d == 1 {
        DMatrix::identity(1, 1)
    } else {
        random_orthogonal(d, &mut rng)
    };
    let a = &h * DMatrix::from_diagonal(&DVector::from_vec(lambda)) * h.transpose();
    // symmetrize away round-off so the spectrum stays exactly real
    let a = 0.5 * (&a + a.transpose());
    let mut b = DMatrix::from_fn(d, n, |_, _| StandardNormal.sample(&mut rng));
    let b_norm = linalg::spectral_norm(&b);
    let kappa_b = match opts.kappa_b {
        Some(limit) => {
            if b_norm > limit {
                b *= limit / b_norm;
            }
            limit.max(1.0)
        }
        None => b_norm.max(1.0),
    };
    let gamma = (1.0 - rho_max).min(GAMMA_MAX);
    LdsSystem::new(
        a,
        b,
        SystemBounds {
            kappa: opts.kappa_floor.max(1.0),
            kappa_b,
            w_bound: opts.w_bound.max(1.0),
            gamma,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    #[test]
    fn step_examples() {
        let sys = LdsSystem::new(
            DMatrix::zeros(2, 2),
            DMatrix::zeros(2, 1),
            SystemBounds::default(),
        )
        .unwrap();
        let x = sys.step(&v(&[5.0, -3.0]), &v(&[7.0]), &v(&[1.0, 2.0])).unwrap();
        assert_eq!(x, v(&[1.0, 2.0]));

        let s = LdsSystem::scalar(0.5, 1.0).unwrap();
        assert_eq!(s.step(&v(&[2.0]), &v(&[1.0]), &v(&[0.0])).unwrap()[0], 2.0);

        let sys = LdsSystem::new(
            DMatrix::identity(2, 2),
            DMatrix::from_column_slice(2, 1, &[1.0, 0.0]),
            SystemBounds::default(),
        )
        .unwrap();
        let x = sys.step(&v(&[1.0, 1.0]), &v(&[3.0]), &v(&[0.5, -0.5])).unwrap();
        assert_eq!(x, v(&[4.5, 0.5]));
    }

    #[test]
    fn step_rejects_bad_dimensions() {
        let s = LdsSystem::scalar(0.5, 1.0).unwrap();
        let err = s.step(&v(&[1.0, 2.0]), &v(&[1.0]), &v(&[0.0])).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
        assert!(s.recover_disturbance(&v(&[1.0]), &v(&[]), &v(&[1.0])).is_err());
    }

    #[test]
    fn recover_scalar() {
        let s = LdsSystem::scalar(0.5, 1.0).unwrap();
        let w = s.recover_disturbance(&v(&[2.0]), &v(&[1.0]), &v(&[3.0])).unwrap();
        assert_eq!(w[0], 1.0);
    }

    #[test]
    fn b_norm_checked() {
        let b = DMatrix::from_element(1, 1, 3.0);
        let r = LdsSystem::new(DMatrix::zeros(1, 1), b, SystemBounds::default());
        assert!(r.is_err());
    }

    #[test]
    fn zero_policy_flag_checks_powers() {
        let ok = LdsSystem::scalar(0.9, 1.0).unwrap().with_zero_policy_stable();
        assert!(ok.is_ok());
        let bad = LdsSystem::scalar(0.95, 1.0).unwrap().with_zero_policy_stable();
        assert!(bad.is_err());
    }

    #[test]
    fn generated_scalar_is_rho() {
        let s = generate_system(1, 1, 0.9, 0, GenerateOptions::default()).unwrap();
        assert_eq!(s.a()[(0, 0)], 0.9);
    }

    #[test]
    fn generated_radius_matches_by_power_iteration() {
        for seed in 0..3 {
            let s = generate_system(10, 4, 0.9, seed, GenerateOptions::default()).unwrap();
            let mut x = DVector::from_element(10, 1.0);
            let mut est = 0.0;
            for _ in 0..2000 {
                let y = s.a() * &x;
                est = y.norm() / x.norm();
                x = y.normalize();
            }
            assert!((est - 0.9).abs() < 1e-9, "seed {seed}: {est}");
            assert!(s.clone().with_zero_policy_stable().is_ok());
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_system(6, 3, 0.8, 42, GenerateOptions::default()).unwrap();
        let b = generate_system(6, 3, 0.8, 42, GenerateOptions::default()).unwrap();
        assert_eq!(a, b);
        assert!(generate_system(2, 1, 1.0, 0, GenerateOptions::default()).is_err());
    }

    #[test]
    fn generated_b_respects_kappa_b() {
        let opts = GenerateOptions {
            kappa_b: Some(1.5),
            ..GenerateOptions::default()
        };
        let s = generate_system(8, 3, 0.9, 7, opts).unwrap();
        assert!(linalg::spectral_norm(s.b()) <= 1.5 + 1e-9);
    }

    #[test]
    fn json_round_trip() {
        let s = generate_system(3, 2, 0.7, 1, GenerateOptions::default()).unwrap();
        let back = LdsSystem::from_json(&s.to_json().unwrap()).unwrap();
        assert_eq!(back, s);
    }
}
