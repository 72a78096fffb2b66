use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Result};

/// The last `m` disturbances, newest first; zero before the first push.
#[derive(Clone, Debug, PartialEq)]
pub struct DisturbanceBuffer {
    ring: Vec<DVector<f64>>,
    /// Ring slot holding the newest entry.
    head: usize,
}

impl DisturbanceBuffer {
    pub fn new(m: usize, d: usize) -> Self {
        assert!(m > 0, "buffer memory must be positive");
        DisturbanceBuffer {
            ring: vec![DVector::zeros(d); m],
            head: m - 1,
        }
    }

    pub fn m(&self) -> usize {
        self.ring.len()
    }

    pub fn d(&self) -> usize {
        self.ring[0].len()
    }

    pub fn push(&mut self, w: &DVector<f64>) -> Result<()> {
        check_dim("disturbance", self.d(), w.len())?;
        self.head = (self.head + 1) % self.ring.len();
        self.ring[self.head].copy_from(w);
        Ok(())
    }

    /// Column `s`: `w_{t-1-s}`.
    pub fn col(&self, s: usize) -> &DVector<f64> {
        let m = self.ring.len();
        &self.ring[(self.head + m - s % m) % m]
    }

    /// `d x m` matrix with column `s` equal to [`col(s)`](Self::col).
    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.d(), self.m(), |r, s| self.col(s)[r])
    }

    /// `W~ v` for a length-`m` vector `v`.
    pub fn apply(&self, v: &[f64]) -> Result<DVector<f64>> {
        check_dim("window weights", self.m(), v.len())?;
        let mut out = DVector::zeros(self.d());
        for (s, &c) in v.iter().enumerate() {
            out.axpy(c, self.col(s), 1.0);
        }
        Ok(out)
    }
}
