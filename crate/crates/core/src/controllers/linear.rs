use nalgebra::{DMatrix, DVector};

use super::{Controller, DisturbanceBuffer};
use crate::error::{check_dim, Result};
use crate::lds::LdsSystem;
use crate::linalg::powers;

/// Fixed state feedback `u = K x`.
#[derive(Clone, Debug)]
pub struct LinearController {
    name: String,
    k: DMatrix<f64>,
}

impl LinearController {
    pub fn new(k: DMatrix<f64>) -> Self {
        LinearController {
            name: "fixed_k".into(),
            k,
        }
    }

    pub fn zero(d: usize, n: usize) -> Self {
        LinearController {
            name: "zero".into(),
            k: DMatrix::zeros(n, d),
        }
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn gain(&self) -> &DMatrix<f64> {
        &self.k
    }
}

impl Controller for LinearController {
    fn name(&self) -> &str {
        &self.name
    }

    fn control(&mut self, x: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim("state", self.k.ncols(), x.len())?;
        Ok(&self.k * x)
    }

    fn observe(&mut self, _: &DVector<f64>, _: &DVector<f64>, _: &DVector<f64>) -> Result<()> {
        Ok(())
    }
}

/// Open-loop controller `u_t = K sum_{i=1}^m (A + BK)^{i-1} w_{t-i}`.
#[derive(Clone, Debug)]
pub struct OlocController {
    name: String,
    sys: LdsSystem,
    /// `K (A + BK)^{i-1}` for `i = 1..=m`.
    gains: Vec<DMatrix<f64>>,
    buffer: DisturbanceBuffer,
}

impl OlocController {
    pub fn new(sys: &LdsSystem, k: &DMatrix<f64>, m: usize) -> Result<Self> {
        let cl = sys.closed_loop(k)?;
        let gains = powers(cl.a(), m).iter().map(|p| k * p).collect();
        Ok(OlocController {
            name: "oloc".into(),
            sys: sys.clone(),
            gains,
            buffer: DisturbanceBuffer::new(m.max(1), sys.d()),
        })
    }

    /// The control for the current buffer contents.
    pub fn current(&self) -> DVector<f64> {
        let mut u = DVector::zeros(self.sys.n());
        for (s, g) in self.gains.iter().enumerate() {
            u.gemv(1.0, g, self.buffer.col(s), 1.0);
        }
        u
    }

    pub fn buffer_mut(&mut self) -> &mut DisturbanceBuffer {
        &mut self.buffer
    }
}

impl Controller for OlocController {
    fn name(&self) -> &str {
        &self.name
    }

    fn control(&mut self, x: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim("state", self.sys.d(), x.len())?;
        Ok(self.current())
    }

    fn observe(&mut self, x: &DVector<f64>, u: &DVector<f64>, x_next: &DVector<f64>) -> Result<()> {
        let w = self.sys.recover_disturbance(x, u, x_next)?;
        self.buffer.push(&w)
    }
}
