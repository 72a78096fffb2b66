use std::io::Write;

use nalgebra::DVector;
use serde::Serialize;

use crate::error::Result;
use crate::lds::LdsSystem;

/// Per-step record of one episode.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EpisodeTrace {
    /// `x[0..=T]`.
    pub x: Vec<DVector<f64>>,
    pub u: Vec<DVector<f64>>,
    pub w: Vec<DVector<f64>>,
    pub cost: Vec<f64>,
    pub memoryless_loss: Vec<Option<f64>>,
    pub step_ns: Vec<u64>,
}

/// Assumption checks on a recorded trace.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceValidation {
    /// `max_t ||x_{t+1} - A x_t - B u_t - w_t||`.
    pub replay_error: f64,
    /// Steps where `||w_t|| > W`.
    pub disturbance_violations: Vec<usize>,
    /// Steps where `||x_t||` or `||u_t||` exceeds `3 kappa^3 W / gamma`.
    pub state_bound_violations: Vec<usize>,
}

impl TraceValidation {
    pub fn replay_consistent(&self) -> bool {
        self.replay_error <= 1e-9
    }

    pub fn assumptions_hold(&self) -> bool {
        self.disturbance_violations.is_empty() && self.state_bound_violations.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceSummary {
    pub total_cost: f64,
    pub mean_cost: f64,
    #[serde(rename = "T")]
    pub horizon: usize,
    pub config_hash: String,
}

impl EpisodeTrace {
    pub fn horizon(&self) -> usize {
        self.cost.len()
    }

    pub fn total_cost(&self) -> f64 {
        self.cost.iter().sum()
    }

    pub fn mean_cost(&self) -> f64 {
        if self.cost.is_empty() {
            0.0
        } else {
            self.total_cost() / self.cost.len() as f64
        }
    }

    /// Mean cost over the last quarter of the horizon.
    pub fn final_quarter_mean(&self) -> f64 {
        let n = self.cost.len();
        let start = n - n / 4;
        let tail = &self.cost[start.min(n.saturating_sub(1))..];
        tail.iter().sum::<f64>() / tail.len().max(1) as f64
    }

    pub fn validate(&self, sys: &LdsSystem) -> TraceValidation {
        let bounds = sys.bounds();
        let radius = 3.0 * bounds.kappa.powi(3) * bounds.w_bound / bounds.gamma;
        let mut replay_error = 0.0f64;
        let mut disturbance_violations = Vec::new();
        let mut state_bound_violations = Vec::new();
        for t in 0..self.horizon() {
            let pred = sys.a() * &self.x[t] + sys.b() * &self.u[t] + &self.w[t];
            replay_error = replay_error.max((pred - &self.x[t + 1]).norm());
            if self.w[t].norm() > bounds.w_bound {
                disturbance_violations.push(t);
            }
            if self.x[t].norm() > radius || self.u[t].norm() > radius {
                state_bound_violations.push(t);
            }
        }
        TraceValidation {
            replay_error,
            disturbance_violations,
            state_bound_violations,
        }
    }

    pub fn summary(&self, config_hash: &str) -> TraceSummary {
        TraceSummary {
            total_cost: self.total_cost(),
            mean_cost: self.mean_cost(),
            horizon: self.horizon(),
            config_hash: config_hash.to_string(),
        }
    }

    /// Writes the per-step CSV. `step_ns` is written as recorded (zero when
    /// timing was not requested).
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let d = self.x.first().map_or(0, |x| x.len());
        let n = self.u.first().map_or(0, |u| u.len());
        let mut header = vec!["t".to_string()];
        header.extend((0..d).map(|i| format!("x_{i}")));
        header.extend((0..n).map(|i| format!("u_{i}")));
        header.extend((0..d).map(|i| format!("w_{i}")));
        header.extend(["cost", "memoryless_loss", "step_ns"].map(String::from));
        writeln!(out, "{}", header.join(","))?;
        for t in 0..self.horizon() {
            let mut row = Vec::with_capacity(header.len());
            row.push(t.to_string());
            row.extend(self.x[t].iter().map(|v| format!("{v:?}")));
            row.extend(self.u[t].iter().map(|v| format!("{v:?}")));
            row.extend(self.w[t].iter().map(|v| format!("{v:?}")));
            row.push(format!("{:?}", self.cost[t]));
            row.push(
                self.memoryless_loss[t]
                    .map(|l| format!("{l:?}"))
                    .unwrap_or_default(),
            );
            row.push(self.step_ns[t].to_string());
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}
