use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::ogd::{LearnerStats, OgdCore};
use super::{Controller, DisturbanceBuffer};
use crate::error::{check_dim, Result};
use crate::fastconv::{ConvMode, StreamConvolver};
use crate::filters::FilterBank;
use crate::lds::{CostFunction, LdsSystem};
use crate::learner::{spectral_radius_bound, SpectralParams};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct OscOptions {
    /// Truncation horizon of the memory-less unroll; defaults to `m`.
    pub m_x: Option<usize>,
    /// Streaming convolution engine for the filter projections.
    pub fast_path: Option<ConvMode>,
    /// Stabilizing feedback, giving `u = K0 x + spectral term`.
    pub k0: Option<DMatrix<f64>>,
    /// Frobenius radius; defaults to `kappa^3 sqrt(2h / gamma)`.
    pub radius: Option<f64>,
}

/// Spectral controller `u_t = [K0 x_t +] sum_i sigma_i^{1/4} M_i W~_{t-1:t-m} phi_i`
/// learned by projected online gradient descent.
#[derive(Debug)]
pub struct OscController {
    name: String,
    bank: Arc<FilterBank>,
    buffer: DisturbanceBuffer,
    conv: Option<StreamConvolver>,
    core: OgdCore,
}

impl OscController {
    pub fn new(
        sys: &LdsSystem,
        bank: Arc<FilterBank>,
        cost: CostFunction,
        eta: f64,
        opts: OscOptions,
    ) -> Result<Self> {
        let bounds = sys.bounds();
        let radius = opts
            .radius
            .unwrap_or_else(|| spectral_radius_bound(bounds.kappa, bank.h, bounds.gamma));
        let core = OgdCore::new(
            sys.clone(),
            cost,
            opts.k0,
            opts.m_x.unwrap_or(bank.m),
            bank.sigma_quarter.clone(),
            radius,
            eta,
        )?;
        let conv = opts
            .fast_path
            .map(|mode| StreamConvolver::new(&bank, sys.d(), mode))
            .transpose()?;
        Ok(OscController {
            name: "osc".into(),
            buffer: DisturbanceBuffer::new(bank.m, sys.d()),
            bank,
            conv,
            core,
        })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn bank(&self) -> &FilterBank {
        &self.bank
    }

    pub fn buffer(&self) -> &DisturbanceBuffer {
        &self.buffer
    }

    pub fn params(&self) -> &SpectralParams {
        &self.core.params
    }

    /// Replaces the parameters (shapes must match); no projection is applied.
    pub fn set_params(&mut self, params: SpectralParams) -> Result<()> {
        check_dim("parameter count", self.core.params.len(), params.len())?;
        let (n, d) = self.core.params.shape();
        check_dim("parameter rows", n, params.shape().0)?;
        check_dim("parameter cols", d, params.shape().1)?;
        self.core.params = params;
        Ok(())
    }

    pub fn eta(&self) -> f64 {
        self.core.eta
    }

    pub fn set_eta(&mut self, eta: f64) {
        self.core.eta = eta;
    }

    pub fn stats(&self) -> LearnerStats {
        self.core.stats
    }

    /// `W~_{t-1:t-m} phi_i` for every filter.
    pub fn projections(&self) -> Result<Vec<DVector<f64>>> {
        match &self.conv {
            Some(c) => (0..self.bank.h).map(|i| c.query(i)).collect(),
            None => (0..self.bank.h)
                .map(|i| self.buffer.apply(self.bank.phi(i)))
                .collect(),
        }
    }
}

impl Controller for OscController {
    fn name(&self) -> &str {
        &self.name
    }

    fn control(&mut self, x: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim("state", self.buffer.d(), x.len())?;
        let feats = self.projections()?;
        self.core.control(x, feats)
    }

    fn observe(&mut self, x: &DVector<f64>, u: &DVector<f64>, x_next: &DVector<f64>) -> Result<()> {
        let w = self.core.observe(x, u, x_next)?;
        self.buffer.push(&w)?;
        if let Some(c) = &mut self.conv {
            c.push(w.as_slice())?;
        }
        Ok(())
    }

    fn last_memoryless_loss(&self) -> Option<f64> {
        self.core.last_loss
    }
}
