use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::lds::{CostFunction, LdsSystem};
use crate::learner::{ogd_step, MemorylessContext, SpectralParams};

/// Running statistics of the online learner.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LearnerStats {
    pub steps: usize,
    /// Largest Frobenius norm of a gradient seen so far.
    pub max_grad_norm: f64,
    /// Truncation bound reported by the most recent loss evaluation.
    pub last_truncation_bound: f64,
}

/// Projected online gradient descent on the memory-less loss of a policy
/// `u = K0 x + sum_j c_j M_j f_j`.
#[derive(Clone, Debug)]
pub(crate) struct OgdCore {
    pub sys: LdsSystem,
    pub cost: CostFunction,
    pub ctx: MemorylessContext,
    pub params: SpectralParams,
    pub eta: f64,
    pub k0: Option<DMatrix<f64>>,
    pub features: Option<Vec<DVector<f64>>>,
    pub last_loss: Option<f64>,
    pub stats: LearnerStats,
}

impl OgdCore {
    pub fn new(
        sys: LdsSystem,
        cost: CostFunction,
        k0: Option<DMatrix<f64>>,
        m_x: usize,
        coeffs: Vec<f64>,
        radius: f64,
        eta: f64,
    ) -> Result<Self> {
        if !(eta >= 0.0 && eta.is_finite()) {
            return Err(Error::invalid(format!("step size must be finite and >= 0, got {eta}")));
        }
        if !(radius > 0.0) {
            return Err(Error::invalid("parameter radius must be positive"));
        }
        let ctx = MemorylessContext::new(&sys, k0.clone(), m_x, coeffs.clone())?;
        let params = SpectralParams::zeros(coeffs.len(), sys.n(), sys.d(), radius);
        Ok(OgdCore {
            sys,
            cost,
            ctx,
            params,
            eta,
            k0,
            features: None,
            last_loss: None,
            stats: LearnerStats::default(),
        })
    }

    /// Control for the current features; records them for the learner.
    pub fn control(&mut self, x: &DVector<f64>, feats: Vec<DVector<f64>>) -> Result<DVector<f64>> {
        if self.features.is_some() {
            return Err(Error::invalid("control called twice without observe"));
        }
        let mut u = self.params.apply(self.ctx.coeffs(), &feats);
        if let Some(k) = &self.k0 {
            crate::error::check_dim("state", k.ncols(), x.len())?;
            u.gemv(1.0, k, x, 1.0);
        }
        self.ctx.push_features(feats.clone())?;
        self.features = Some(feats);
        Ok(u)
    }

    /// Recovers `w_t`, takes one projected gradient step and returns `w_t`.
    pub fn observe(
        &mut self,
        x: &DVector<f64>,
        u: &DVector<f64>,
        x_next: &DVector<f64>,
    ) -> Result<DVector<f64>> {
        if self.features.take().is_none() {
            return Err(Error::invalid("observe called without a preceding control"));
        }
        let w = self.sys.recover_disturbance(x, u, x_next)?;
        let lg = self.ctx.loss_and_grad(&self.params, &self.cost)?;
        let gnorm = lg.grad.iter().map(|g| g.norm_squared()).sum::<f64>().sqrt();
        if !gnorm.is_finite() || !lg.loss.is_finite() {
            return Err(Error::NumericalFailure("non-finite memory-less loss or gradient".into()));
        }
        self.params = ogd_step(&self.params, &lg.grad, self.eta)?;
        self.ctx.push_disturbance(w.clone());
        self.last_loss = Some(lg.loss);
        self.stats.steps += 1;
        self.stats.max_grad_norm = self.stats.max_grad_norm.max(gnorm);
        self.stats.last_truncation_bound = lg.truncation_bound;
        Ok(w)
    }
}
