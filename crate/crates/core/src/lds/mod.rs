//! Linear dynamical systems, costs, disturbance signals and episode simulation.

mod cost;
mod signal;
mod system;
mod trace;

use std::time::Instant;

use nalgebra::DVector;

pub use cost::{CostEval, CostFunction, CostKind, CostPlugin};
pub use signal::{generate_signal, DisturbanceSignal, SignalGenerator, SignalKind};
pub use system::{generate_system, GenerateOptions, LdsSystem, SystemBounds};
pub use trace::{EpisodeTrace, TraceSummary, TraceValidation};

use crate::controllers::Controller;
use crate::error::{check_dim, Error, Result};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SimOptions {
    /// Initial state; zero when `None`.
    pub x0: Option<DVector<f64>>,
    /// Record wall-clock nanoseconds per step (otherwise zeros, keeping
    /// traces byte-reproducible).
    pub record_timing: bool,
}

/// Runs one episode. At step `t` the controller sees `x_t` and chooses
/// `u_t` before `w_t` is drawn; it then observes `x_{t+1}`.
pub fn simulate(
    sys: &LdsSystem,
    controller: &mut dyn Controller,
    signal: &DisturbanceSignal,
    cost: &CostFunction,
    horizon: usize,
    opts: &SimOptions,
) -> Result<EpisodeTrace> {
    if horizon < 1 {
        return Err(Error::invalid("horizon must be at least 1"));
    }
    let mut gen = signal.start(sys)?;
    let mut x = match &opts.x0 {
        Some(x0) => {
            check_dim("initial state", sys.d(), x0.len())?;
            x0.clone()
        }
        None => DVector::zeros(sys.d()),
    };
    let mut trace = EpisodeTrace {
        x: Vec::with_capacity(horizon + 1),
        u: Vec::with_capacity(horizon),
        w: Vec::with_capacity(horizon),
        cost: Vec::with_capacity(horizon),
        memoryless_loss: Vec::with_capacity(horizon),
        step_ns: Vec::with_capacity(horizon),
    };
    trace.x.push(x.clone());
    for t in 0..horizon {
        let start = opts.record_timing.then(Instant::now);
        let u = controller.control(&x).map_err(|e| e.at_step(t))?;
        check_dim("controller output", sys.n(), u.len()).map_err(|e| e.at_step(t))?;
        let w = gen.next(t, &x).map_err(|e| e.at_step(t))?;
        let c = cost.eval(&x, &u).map_err(|e| e.at_step(t))?.value;
        let x_next = sys.step(&x, &u, &w).map_err(|e| e.at_step(t))?;
        controller
            .observe(&x, &u, &x_next)
            .map_err(|e| e.at_step(t))?;
        let ns = start.map_or(0, |s| s.elapsed().as_nanos() as u64);
        trace.u.push(u);
        trace.w.push(w);
        trace.cost.push(c);
        trace.memoryless_loss.push(controller.last_memoryless_loss());
        trace.step_ns.push(ns);
        trace.x.push(x_next.clone());
        x = x_next;
    }
    Ok(trace)
}
