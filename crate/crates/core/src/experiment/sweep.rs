use serde::Serialize;

use super::config::ExperimentConfig;
use super::run::{run_experiment, RunOptions};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    #[serde(rename = "T")]
    pub horizon: usize,
    pub controller: String,
    /// Mean over seeds.
    pub regret: f64,
    pub regret_over_t: f64,
    pub regret_over_sqrt_t: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepVerdict {
    pub controller: String,
    /// `regret(T)/T` strictly decreasing along the horizon list.
    pub per_step_decreasing: bool,
    /// `max / min` of `regret(T)/sqrt(T)`; `None` if a value is not positive.
    pub sqrt_ratio: Option<f64>,
    /// `sqrt_ratio <= 3`.
    pub sqrt_bounded: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepReport {
    pub config_hash: String,
    pub rows: Vec<SweepRow>,
    pub verdicts: Vec<SweepVerdict>,
}

impl SweepReport {
    pub fn verdict(&self, controller: &str) -> Option<&SweepVerdict> {
        self.verdicts.iter().find(|v| v.controller == controller)
    }
}

/// Runs `base` at each horizon (schedules are recomputed per `T`) and checks
/// that regret grows sublinearly.
pub fn sublinearity_sweep(base: &ExperimentConfig, horizons: &[usize], opts: RunOptions) -> Result<SweepReport> {
    if horizons.is_empty() || horizons.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("horizons must be a nonempty increasing list"));
    }
    let mut rows = Vec::new();
    for &t in horizons {
        let mut cfg = base.clone();
        cfg.horizon = t;
        let out = run_experiment(&cfg, opts)?;
        for spec in &base.controllers {
            let name = spec.name();
            let vals: Vec<f64> = out
                .reports
                .iter()
                .filter(|r| r.controller == name)
                .map(|r| r.regret)
                .collect();
            let regret = vals.iter().sum::<f64>() / vals.len() as f64;
            rows.push(SweepRow {
                horizon: t,
                controller: name,
                regret,
                regret_over_t: regret / t as f64,
                regret_over_sqrt_t: regret / (t as f64).sqrt(),
            });
        }
    }
    let verdicts = base
        .controllers
        .iter()
        .map(|spec| {
            let name = spec.name();
            let mine: Vec<&SweepRow> = rows.iter().filter(|r| r.controller == name).collect();
            let per_step_decreasing = mine.windows(2).all(|w| w[1].regret_over_t < w[0].regret_over_t);
            let sq: Vec<f64> = mine.iter().map(|r| r.regret_over_sqrt_t).collect();
            let sqrt_ratio = sq.iter().all(|&v| v > 0.0).then(|| {
                let max = sq.iter().copied().fold(f64::MIN, f64::max);
                let min = sq.iter().copied().fold(f64::MAX, f64::min);
                max / min
            });
            SweepVerdict {
                controller: name,
                per_step_decreasing,
                sqrt_ratio,
                sqrt_bounded: sqrt_ratio.is_some_and(|r| r <= 3.0),
            }
        })
        .collect();
    Ok(SweepReport {
        config_hash: base.config_hash(),
        rows,
        verdicts,
    })
}
