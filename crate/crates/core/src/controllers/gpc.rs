use nalgebra::{DMatrix, DVector};

use super::ogd::{LearnerStats, OgdCore};
use super::{Controller, DisturbanceBuffer};
use crate::error::{check_dim, Error, Result};
use crate::lds::{CostFunction, LdsSystem, SystemBounds};
use crate::learner::SpectralParams;

/// Frobenius radius `kappa^3 sqrt(min(n, d) / gamma)`, which contains every
/// open-loop gain sequence `K (A + BK)^{i-1}` of a stable policy.
pub fn gpc_radius(bounds: SystemBounds, n: usize, d: usize) -> f64 {
    bounds.kappa.powi(3) * (n.min(d) as f64 / bounds.gamma).sqrt()
}

/// Step size `2R / (L sqrt(T))`, with `L = 6 G kappa_B kappa^5 W^2 memory / gamma^2`.
pub fn gpc_step_size(bounds: SystemBounds, g: f64, n: usize, d: usize, memory: usize, horizon: usize) -> f64 {
    let SystemBounds {
        kappa,
        kappa_b,
        w_bound,
        gamma,
    } = bounds;
    let lip = 6.0 * g * kappa_b * kappa.powi(5) * w_bound * w_bound * memory as f64 / (gamma * gamma);
    2.0 * gpc_radius(bounds, n, d) / (lip * (horizon.max(1) as f64).sqrt())
}

/// Memory `ceil(ln T / gamma)`.
pub fn gpc_memory(horizon: usize, gamma: f64) -> usize {
    ((horizon.max(2) as f64).ln() / gamma).ceil().max(1.0) as usize
}

/// Disturbance-feedback baseline `u_t = [K0 x_t +] sum_{i=1}^{m} N_i w_{t-i}`
/// learned by projected online gradient descent.
#[derive(Debug)]
pub struct GpcController {
    name: String,
    buffer: DisturbanceBuffer,
    core: OgdCore,
}

impl GpcController {
    /// `m_x` defaults to the memory.
    pub fn new(
        sys: &LdsSystem,
        cost: CostFunction,
        memory: usize,
        eta: f64,
        radius: f64,
        k0: Option<DMatrix<f64>>,
        m_x: Option<usize>,
    ) -> Result<Self> {
        if memory == 0 {
            return Err(Error::invalid("memory must be at least 1"));
        }
        let core = OgdCore::new(
            sys.clone(),
            cost,
            k0,
            m_x.unwrap_or(memory),
            vec![1.0; memory],
            radius,
            eta,
        )?;
        Ok(GpcController {
            name: "gpc".into(),
            buffer: DisturbanceBuffer::new(memory, sys.d()),
            core,
        })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn params(&self) -> &SpectralParams {
        &self.core.params
    }

    pub fn set_params(&mut self, params: SpectralParams) -> Result<()> {
        check_dim("parameter count", self.core.params.len(), params.len())?;
        self.core.params = params;
        Ok(())
    }

    pub fn stats(&self) -> LearnerStats {
        self.core.stats
    }
}

impl Controller for GpcController {
    fn name(&self) -> &str {
        &self.name
    }

    fn control(&mut self, x: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim("state", self.buffer.d(), x.len())?;
        let feats = (0..self.buffer.m()).map(|s| self.buffer.col(s).clone()).collect();
        self.core.control(x, feats)
    }

    fn observe(&mut self, x: &DVector<f64>, u: &DVector<f64>, x_next: &DVector<f64>) -> Result<()> {
        let w = self.core.observe(x, u, x_next)?;
        self.buffer.push(&w)
    }

    fn last_memoryless_loss(&self) -> Option<f64> {
        self.core.last_loss
    }
}
