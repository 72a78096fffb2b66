//! Parameter schedule, the memory-less loss with its gradient, and projected
//! online gradient descent.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::filters::check_gamma;
use crate::lds::{CostFunction, LdsSystem, SystemBounds};
use crate::linalg::{from_row_major, powers, to_row_major};

/// Parameter choices for a horizon `T`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Schedule {
    #[serde(rename = "T")]
    pub horizon: usize,
    pub gamma: f64,
    pub kappa: f64,
    #[serde(rename = "kappa_B")]
    pub kappa_b: f64,
    #[serde(rename = "W")]
    pub w_bound: f64,
    #[serde(rename = "G")]
    pub g: f64,
    pub d: usize,
    pub m: usize,
    pub h: usize,
    /// `h` before capping at `m`.
    pub h_uncapped: usize,
    pub eta: f64,
    /// Frobenius radius `kappa^3 sqrt(2h / gamma)`.
    pub radius: f64,
    #[serde(rename = "C1")]
    pub c1: f64,
    #[serde(rename = "C2")]
    pub c2: f64,
}

/// Frobenius radius of the spectral parameter set for `h` filters.
pub fn spectral_radius_bound(kappa: f64, h: usize, gamma: f64) -> f64 {
    kappa.powi(3) * (2.0 * h as f64 / gamma).sqrt()
}

pub fn horizon_schedule(
    horizon: usize,
    bounds: SystemBounds,
    g: f64,
    d: usize,
) -> Result<Schedule> {
    let SystemBounds {
        kappa,
        kappa_b,
        w_bound,
        gamma,
    } = bounds;
    if horizon < 10 {
        return Err(Error::invalid("schedule needs T >= 10"));
    }
    check_gamma(gamma)?;
    if !(kappa >= 1.0 && kappa_b >= 1.0 && w_bound >= 1.0 && g > 0.0) || d == 0 {
        return Err(Error::invalid(
            "schedule needs kappa, kappa_B, W >= 1, G > 0 and d >= 1",
        ));
    }
    let tf = horizon as f64;
    let c1 = g * kappa_b * kappa.powi(8) * w_bound * w_bound;
    let g3 = gamma.powi(3);
    let m = ((8.0 * c1 * tf.sqrt() / g3).ln() / gamma).ceil().max(1.0) as usize;
    let h_uncapped = (4.0 * tf.ln() * (900.0 * c1 * d as f64 * tf / g3).ln())
        .ceil()
        .max(1.0) as usize;
    let h = h_uncapped.min(m);
    let c2 = 2f64.sqrt() * kappa.powi(5) / (3.0 * c1);
    let eta = c2 * (g3 / (tf * m as f64 * h as f64)).sqrt();
    Ok(Schedule {
        horizon,
        gamma,
        kappa,
        kappa_b,
        w_bound,
        g,
        d,
        m,
        h,
        h_uncapped,
        eta,
        radius: spectral_radius_bound(kappa, h, gamma),
        c1,
        c2,
    })
}

/// Lipschitz constant of the memory-less loss over the spectral parameter set.
pub fn lipschitz_bound(bounds: SystemBounds, g: f64, m: usize, h: usize) -> f64 {
    let SystemBounds {
        kappa,
        kappa_b,
        w_bound,
        gamma,
    } = bounds;
    6.0 * g * kappa_b * kappa.powi(5) * w_bound * w_bound * (m as f64).sqrt() * h as f64
        / (gamma * gamma)
        * (2.0 / gamma).ln().powf(0.25)
}

/// Bound on `|c_t(x_t, u_t) - l_t(M^t)|` along a run with the scheduled step.
pub fn memory_gap_bound(s: &Schedule) -> f64 {
    6.0 * s.c1 * ((s.m * s.h) as f64).sqrt() / (s.gamma.powf(3.5) * (s.horizon as f64).sqrt())
        * (2.0 / s.gamma).ln().powf(0.25)
}

/// The tensor `M_{1:p}` of `p` matrices, each `n x d`, with its Frobenius radius.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralParams {
    pub mats: Vec<DMatrix<f64>>,
    pub radius: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamsFile {
    h: usize,
    n: usize,
    d: usize,
    #[serde(rename = "M")]
    m: Vec<f64>,
    radius: f64,
}

impl SpectralParams {
    pub fn zeros(p: usize, n: usize, d: usize, radius: f64) -> Self {
        SpectralParams {
            mats: vec![DMatrix::zeros(n, d); p],
            radius,
        }
    }

    pub fn len(&self) -> usize {
        self.mats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mats.is_empty()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.mats.first().map_or((0, 0), |m| m.shape())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.mats
            .iter()
            .map(|m| m.norm_squared())
            .sum::<f64>()
            .sqrt()
    }

    /// `sum_j coeffs[j] M_j features[j]`.
    pub fn apply(&self, coeffs: &[f64], features: &[DVector<f64>]) -> DVector<f64> {
        let mut u = DVector::zeros(self.shape().0);
        for ((m, c), f) in self.mats.iter().zip(coeffs).zip(features) {
            u.gemv(*c, m, f, 1.0);
        }
        u
    }

    /// Flattened snapshot `{h, n, d, M, radius}`, each slice row-major.
    pub fn to_json(&self) -> Result<String> {
        let (n, d) = self.shape();
        let file = ParamsFile {
            h: self.len(),
            n,
            d,
            m: self.mats.iter().flat_map(to_row_major).collect(),
            radius: self.radius,
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: ParamsFile = serde_json::from_str(text)?;
        check_dim("parameter snapshot", f.h * f.n * f.d, f.m.len())?;
        if !(f.radius > 0.0) {
            return Err(Error::invalid("radius must be positive"));
        }
        let mats = f
            .m
            .chunks(f.n * f.d)
            .map(|c| from_row_major(f.n, f.d, c))
            .collect::<Result<Vec<_>>>()?;
        let mats = if f.h == 0 { Vec::new() } else { mats };
        Ok(SpectralParams {
            mats,
            radius: f.radius,
        })
    }
}

/// Radial projection onto `{||M||_F <= radius}`.
pub fn project_frobenius(mut params: SpectralParams) -> SpectralParams {
    let norm = params.frobenius_norm();
    if norm > params.radius {
        let s = params.radius / norm;
        for m in &mut params.mats {
            *m *= s;
        }
    }
    params
}

/// `project(M - eta * grad)`.
pub fn ogd_step(params: &SpectralParams, grad: &[DMatrix<f64>], eta: f64) -> Result<SpectralParams> {
    check_dim("gradient length", params.len(), grad.len())?;
    let mut next = params.clone();
    for (m, g) in next.mats.iter_mut().zip(grad) {
        if m.shape() != g.shape() {
            return Err(Error::DimensionMismatch {
                context: "gradient slice",
                expected: m.len(),
                actual: g.len(),
            });
        }
        *m -= g * eta;
    }
    Ok(project_frobenius(next))
}

/// Loss value and gradient of the memory-less loss.
#[derive(Clone, Debug, PartialEq)]
pub struct LossGrad {
    pub loss: f64,
    pub grad: Vec<DMatrix<f64>>,
    /// `kappa^2 (1 - gamma)^{m_x}` times the largest counterfactual control norm.
    pub truncation_bound: f64,
}

/// Counterfactual replay for a controller of the form
/// `u_s = K0 x_s + sum_j c_j M_j f_{s,j}`, where the features `f_{s,j}` depend
/// only on disturbances before `s`.
///
/// Call [`push_features`](Self::push_features) with the features for time `t`
/// before evaluating the loss at `t`, and
/// [`push_disturbance`](Self::push_disturbance) with `w_t` afterwards.
#[derive(Clone, Debug)]
pub struct MemorylessContext {
    m_x: usize,
    bounds: SystemBounds,
    k0: Option<DMatrix<f64>>,
    coeffs: Vec<f64>,
    /// `A'^{i-1}` for `i = 1..=m_x`, with `A' = A + B K0`.
    a_pows: Vec<DMatrix<f64>>,
    /// `A'^{i-1} B`.
    a_pows_b: Vec<DMatrix<f64>>,
    /// Newest first: `w_{t-1}, w_{t-2}, ...`.
    w_hist: VecDeque<DVector<f64>>,
    /// Newest first: features at `t, t-1, ...`.
    feat_hist: VecDeque<Vec<DVector<f64>>>,
    n: usize,
}

impl MemorylessContext {
    pub fn new(sys: &LdsSystem, k0: Option<DMatrix<f64>>, m_x: usize, coeffs: Vec<f64>) -> Result<Self> {
        if m_x == 0 {
            return Err(Error::invalid("truncation horizon must be at least 1"));
        }
        let a = match &k0 {
            Some(k) => sys.closed_loop(k)?.a().clone(),
            None => sys.a().clone(),
        };
        let a_pows = powers(&a, m_x);
        let a_pows_b = a_pows.iter().map(|p| p * sys.b()).collect();
        Ok(MemorylessContext {
            m_x,
            bounds: sys.bounds(),
            k0,
            coeffs,
            a_pows,
            a_pows_b,
            w_hist: VecDeque::with_capacity(m_x + 1),
            feat_hist: VecDeque::with_capacity(m_x + 2),
            n: sys.n(),
        })
    }

    pub fn m_x(&self) -> usize {
        self.m_x
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn push_features(&mut self, feats: Vec<DVector<f64>>) -> Result<()> {
        check_dim("feature count", self.coeffs.len(), feats.len())?;
        self.feat_hist.push_front(feats);
        self.feat_hist.truncate(self.m_x + 1);
        Ok(())
    }

    pub fn push_disturbance(&mut self, w: DVector<f64>) {
        self.w_hist.push_front(w);
        self.w_hist.truncate(self.m_x);
    }

    fn check_params(&self, params: &SpectralParams) -> Result<()> {
        check_dim("parameter count", self.coeffs.len(), params.len())?;
        let (n, d) = params.shape();
        check_dim("parameter rows", self.n, n)?;
        check_dim("parameter cols", self.a_pows.first().map_or(0, |p| p.nrows()), d)
    }

    /// `u_{t-i}(M)` for `i = 0..=m_x`; missing history counts as zero.
    fn controls(&self, params: &SpectralParams) -> Vec<DVector<f64>> {
        (0..=self.m_x)
            .map(|i| match self.feat_hist.get(i) {
                Some(f) => params.apply(&self.coeffs, f),
                None => DVector::zeros(self.n),
            })
            .collect()
    }

    /// Counterfactual `(x_t(M), u_t(M))` with the unroll truncated at `m_x`.
    /// `u` is the spectral term only (without `K0 x`).
    pub fn state(&self, params: &SpectralParams) -> Result<(DVector<f64>, DVector<f64>)> {
        self.check_params(params)?;
        let us = self.controls(params);
        Ok((self.unroll(&us), us[0].clone()))
    }

    fn unroll(&self, us: &[DVector<f64>]) -> DVector<f64> {
        let d = self.a_pows[0].nrows();
        let mut x = DVector::zeros(d);
        for i in 1..=self.m_x {
            if let Some(w) = self.w_hist.get(i - 1) {
                x.gemv(1.0, &self.a_pows[i - 1], w, 1.0);
            }
            x.gemv(1.0, &self.a_pows_b[i - 1], &us[i], 1.0);
        }
        x
    }

    pub fn loss_and_grad(&self, params: &SpectralParams, cost: &CostFunction) -> Result<LossGrad> {
        self.check_params(params)?;
        let us = self.controls(params);
        let x = self.unroll(&us);
        let u_total = match &self.k0 {
            Some(k) => k * &x + &us[0],
            None => us[0].clone(),
        };
        let eval = cost.eval(&x, &u_total)?;
        let g_u = eval.grad_u;
        let g_x = match &self.k0 {
            Some(k) => eval.grad_x + k.transpose() * &g_u,
            None => eval.grad_x,
        };
        // v_i = (A'^{i-1} B)^T g_x, paired with the features at t - i
        let vs: Vec<DVector<f64>> = self.a_pows_b.iter().map(|p| p.tr_mul(&g_x)).collect();
        let (n, d) = params.shape();
        let mut grad = vec![DMatrix::zeros(n, d); params.len()];
        for (j, gj) in grad.iter_mut().enumerate() {
            let c = self.coeffs[j];
            if let Some(f) = self.feat_hist.front() {
                gj.ger(c, &g_u, &f[j], 1.0);
            }
            for i in 1..=self.m_x {
                if let Some(f) = self.feat_hist.get(i) {
                    gj.ger(c, &vs[i - 1], &f[j], 1.0);
                }
            }
        }
        let umax = us.iter().map(|u| u.norm()).fold(0.0, f64::max);
        let truncation_bound =
            self.bounds.kappa.powi(2) * (1.0 - self.bounds.gamma).powi(self.m_x as i32) * umax;
        Ok(LossGrad {
            loss: eval.value,
            grad,
            truncation_bound,
        })
    }
}
