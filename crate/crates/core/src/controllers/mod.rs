//! Control policies: the spectral learner, the disturbance-feedback baseline
//! and fixed comparators.

mod buffer;
mod gpc;
mod linear;
mod ogd;
mod osc;
mod placement;

use nalgebra::DVector;

use crate::error::Result;

pub use crate::learner::SpectralParams;
pub use buffer::DisturbanceBuffer;
pub use gpc::{gpc_memory, gpc_radius, gpc_step_size, GpcController};
pub use linear::{LinearController, OlocController};
pub use ogd::LearnerStats;
pub use osc::{OscController, OscOptions};
pub use placement::pole_placement_k0;

/// A causal policy. `simulate` calls `control` with `x_t`, then `observe`
/// with `(x_t, u_t, x_{t+1})`, once per step.
pub trait Controller: Send {
    fn name(&self) -> &str;

    fn control(&mut self, x: &DVector<f64>) -> Result<DVector<f64>>;

    fn observe(&mut self, x: &DVector<f64>, u: &DVector<f64>, x_next: &DVector<f64>) -> Result<()>;

    /// Memory-less loss of the parameters used at the last observed step.
    fn last_memoryless_loss(&self) -> Option<f64> {
        None
    }
}
