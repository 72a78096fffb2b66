use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::Serialize;

use super::config::{ComparatorMode, ControllerSpec, ExperimentConfig};
use super::hindsight::{best_linear_in_hindsight, GridSpec};
use crate::controllers::{
    gpc_memory, gpc_radius, gpc_step_size, pole_placement_k0, Controller, GpcController,
    LinearController, OscController, OscOptions,
};
use crate::error::{Error, Result};
use crate::filters::FilterBank;
use crate::lds::{simulate, CostFunction, EpisodeTrace, LdsSystem, SimOptions, TraceValidation};
use crate::learner::horizon_schedule;
use crate::linalg::{from_row_major, to_row_major};
use crate::par::{self, Execution};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RunOptions {
    pub exec: Execution,
    pub record_timing: bool,
}

/// Resolved hyperparameters of one controller, reported with the results.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResolvedController {
    pub name: String,
    pub kind: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k0: Option<Vec<f64>>,
    pub parameters: usize,
}

enum Factory {
    Osc {
        bank: Arc<FilterBank>,
        eta: f64,
        opts: OscOptions,
    },
    Gpc {
        memory: usize,
        eta: f64,
        radius: f64,
        m_x: Option<usize>,
        k0: Option<DMatrix<f64>>,
    },
    Linear(DMatrix<f64>),
}

struct Prepared {
    name: String,
    fixed: bool,
    factory: Factory,
}

impl Prepared {
    fn instantiate(&self, sys: &LdsSystem, cost: &CostFunction) -> Result<Box<dyn Controller>> {
        Ok(match &self.factory {
            Factory::Osc { bank, eta, opts } => Box::new(
                OscController::new(sys, bank.clone(), cost.clone(), *eta, opts.clone())?
                    .with_name(self.name.clone()),
            ),
            Factory::Gpc {
                memory,
                eta,
                radius,
                m_x,
                k0,
            } => Box::new(
                GpcController::new(sys, cost.clone(), *memory, *eta, *radius, k0.clone(), *m_x)?
                    .with_name(self.name.clone()),
            ),
            Factory::Linear(k) => Box::new(LinearController::new(k.clone()).with_name(self.name.clone())),
        })
    }
}

fn prepare(
    spec: &ControllerSpec,
    cfg: &ExperimentConfig,
    sys: &LdsSystem,
    cost: &CostFunction,
) -> Result<(Prepared, ResolvedController)> {
    let bounds = sys.bounds();
    let (d, n) = (sys.d(), sys.n());
    let g = cfg.schedule.g.unwrap_or(cost.lipschitz);
    let scale = cfg.schedule.eta_scale;
    let name = spec.name();
    let stabilizer = |target: &Option<f64>| target.map(|t| pole_placement_k0(sys, t)).transpose();
    Ok(match spec {
        ControllerSpec::Osc {
            m,
            h,
            eta,
            m_x,
            fast_path,
            stabilize,
            radius,
            ..
        } => {
            let s = horizon_schedule(cfg.horizon.max(10), bounds, g, d)?;
            let m = m.unwrap_or(s.m);
            let h = h.unwrap_or(s.h).min(m);
            let eta = eta.unwrap_or_else(|| {
                s.c2 * (bounds.gamma.powi(3) / (cfg.horizon as f64 * m as f64 * h as f64)).sqrt()
            }) * scale;
            let bank = Arc::new(FilterBank::new(m, bounds.gamma, h)?);
            let k0 = stabilizer(stabilize)?;
            let radius = radius.unwrap_or(crate::learner::spectral_radius_bound(bounds.kappa, h, bounds.gamma));
            let resolved = ResolvedController {
                name: name.clone(),
                kind: "osc",
                m: Some(m),
                h: Some(h),
                eta: Some(eta),
                radius: Some(radius),
                k0: k0.as_ref().map(to_row_major),
                parameters: h * n * d,
            };
            let opts = OscOptions {
                m_x: *m_x,
                fast_path: *fast_path,
                k0,
                radius: Some(radius),
            };
            (
                Prepared {
                    name,
                    fixed: false,
                    factory: Factory::Osc { bank, eta, opts },
                },
                resolved,
            )
        }
        ControllerSpec::Gpc {
            memory,
            eta,
            m_x,
            stabilize,
            radius,
            ..
        } => {
            let memory = memory.unwrap_or_else(|| gpc_memory(cfg.horizon, bounds.gamma));
            let eta = eta.unwrap_or_else(|| gpc_step_size(bounds, g, n, d, memory, cfg.horizon)) * scale;
            let radius = radius.unwrap_or_else(|| gpc_radius(bounds, n, d));
            let k0 = stabilizer(stabilize)?;
            let resolved = ResolvedController {
                name: name.clone(),
                kind: "gpc",
                m: Some(memory),
                h: None,
                eta: Some(eta),
                radius: Some(radius),
                k0: k0.as_ref().map(to_row_major),
                parameters: memory * n * d,
            };
            (
                Prepared {
                    name,
                    fixed: false,
                    factory: Factory::Gpc {
                        memory,
                        eta,
                        radius,
                        m_x: *m_x,
                        k0,
                    },
                },
                resolved,
            )
        }
        ControllerSpec::FixedK { k, .. } => {
            let k = from_row_major(n, d, k)?;
            let resolved = ResolvedController {
                name: name.clone(),
                kind: "fixed_k",
                m: None,
                h: None,
                eta: None,
                radius: None,
                k0: None,
                parameters: 0,
            };
            (
                Prepared {
                    name,
                    fixed: true,
                    factory: Factory::Linear(k),
                },
                resolved,
            )
        }
        ControllerSpec::Zero { .. } => (
            Prepared {
                name: name.clone(),
                fixed: true,
                factory: Factory::Linear(DMatrix::zeros(n, d)),
            },
            ResolvedController {
                name,
                kind: "zero",
                m: None,
                h: None,
                eta: None,
                radius: None,
                k0: None,
                parameters: 0,
            },
        ),
    })
}

#[derive(Clone, Debug)]
pub struct EpisodeResult {
    pub controller: String,
    pub seed: u64,
    pub trace: EpisodeTrace,
    pub validation: TraceValidation,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ComparatorKind {
    /// Exhaustive grid search over stable linear policies.
    HindsightLinear,
    /// Best fixed policy among the controllers that were run (or best run
    /// overall when none is fixed).
    BestOfRun,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Comparator {
    pub seed: u64,
    pub kind: ComparatorKind,
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gain: Option<Vec<f64>>,
    pub total_cost: f64,
    #[serde(skip)]
    pub costs: Vec<f64>,
}

/// Regret of one (controller, seed) run against that seed's comparator.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegretReport {
    pub controller: String,
    pub seed: u64,
    pub comparator: String,
    pub comparator_kind: ComparatorKind,
    pub total_cost: f64,
    pub comparator_cost: f64,
    pub regret: f64,
    pub regret_over_sqrt_t: f64,
    pub regret_over_t: f64,
    pub final_quarter_mean: f64,
    #[serde(skip)]
    pub cumulative_cost: Vec<f64>,
    #[serde(skip)]
    pub comparator_cumulative: Vec<f64>,
    #[serde(skip)]
    pub regret_curve: Vec<f64>,
}

fn prefix_sums(xs: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    xs.iter()
        .map(|x| {
            acc += x;
            acc
        })
        .collect()
}

impl RegretReport {
    pub fn new(controller: &str, seed: u64, costs: &[f64], cmp: &Comparator) -> Self {
        let cumulative_cost = prefix_sums(costs);
        let comparator_cumulative = prefix_sums(&cmp.costs);
        let regret_curve: Vec<f64> = cumulative_cost
            .iter()
            .zip(&comparator_cumulative)
            .map(|(a, b)| a - b)
            .collect();
        let t = costs.len() as f64;
        let regret = regret_curve.last().copied().unwrap_or(0.0);
        let n = costs.len();
        let tail = &costs[n - n / 4..];
        RegretReport {
            controller: controller.to_string(),
            seed,
            comparator: cmp.name.clone(),
            comparator_kind: cmp.kind,
            total_cost: cumulative_cost.last().copied().unwrap_or(0.0),
            comparator_cost: comparator_cumulative.last().copied().unwrap_or(0.0),
            regret,
            regret_over_sqrt_t: regret / t.sqrt(),
            regret_over_t: regret / t,
            final_quarter_mean: tail.iter().sum::<f64>() / tail.len().max(1) as f64,
            cumulative_cost,
            comparator_cumulative,
            regret_curve,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentOutput {
    pub config_hash: String,
    pub horizon: usize,
    pub controllers: Vec<ResolvedController>,
    pub episodes: Vec<EpisodeResult>,
    pub comparators: Vec<Comparator>,
    pub reports: Vec<RegretReport>,
}

#[derive(Serialize)]
struct ReportFile<'a> {
    name: &'a str,
    config_hash: &'a str,
    #[serde(rename = "T")]
    horizon: usize,
    controllers: &'a [ResolvedController],
    comparators: &'a [Comparator],
    runs: &'a [RegretReport],
    assumption_flags: Vec<AssumptionFlags<'a>>,
}

#[derive(Serialize)]
struct AssumptionFlags<'a> {
    controller: &'a str,
    seed: u64,
    replay_error: f64,
    disturbance_violations: usize,
    state_bound_violations: usize,
}

impl ExperimentOutput {
    pub fn report(&self, controller: &str, seed: u64) -> Option<&RegretReport> {
        self.reports
            .iter()
            .find(|r| r.controller == controller && r.seed == seed)
    }

    pub fn episode(&self, controller: &str, seed: u64) -> Option<&EpisodeResult> {
        self.episodes
            .iter()
            .find(|e| e.controller == controller && e.seed == seed)
    }

    /// Mean of the final-quarter mean cost over seeds.
    pub fn final_quarter_mean(&self, controller: &str) -> Option<f64> {
        let vals: Vec<f64> = self
            .reports
            .iter()
            .filter(|r| r.controller == controller)
            .map(|r| r.final_quarter_mean)
            .collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    }

    /// Writes per-run trace CSVs and summaries, regret curves, and `report.json`.
    pub fn write(&self, cfg: &ExperimentConfig, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("config.json"), cfg.to_json()? + "\n")?;
        let header = format!("# config_hash: {}\n", self.config_hash);
        for ep in &self.episodes {
            let stem = format!("{}_seed{}", ep.controller, ep.seed);
            let mut f = BufWriter::new(fs::File::create(dir.join(format!("{stem}.csv")))?);
            f.write_all(header.as_bytes())?;
            ep.trace.write_csv(&mut f)?;
            f.flush()?;
            let summary = serde_json::to_string_pretty(&ep.trace.summary(&self.config_hash))?;
            fs::write(dir.join(format!("{stem}.summary.json")), summary + "\n")?;
        }
        for r in &self.reports {
            let mut f = BufWriter::new(fs::File::create(
                dir.join(format!("regret_{}_seed{}.csv", r.controller, r.seed)),
            )?);
            f.write_all(header.as_bytes())?;
            writeln!(f, "t,cumulative_cost,comparator_cumulative,regret")?;
            for t in 0..r.regret_curve.len() {
                writeln!(
                    f,
                    "{t},{:?},{:?},{:?}",
                    r.cumulative_cost[t], r.comparator_cumulative[t], r.regret_curve[t]
                )?;
            }
            f.flush()?;
        }
        let report = ReportFile {
            name: &cfg.name,
            config_hash: &self.config_hash,
            horizon: self.horizon,
            controllers: &self.controllers,
            comparators: &self.comparators,
            runs: &self.reports,
            assumption_flags: self
                .episodes
                .iter()
                .map(|e| AssumptionFlags {
                    controller: &e.controller,
                    seed: e.seed,
                    replay_error: e.validation.replay_error,
                    disturbance_violations: e.validation.disturbance_violations.len(),
                    state_bound_violations: e.validation.state_bound_violations.len(),
                })
                .collect(),
        };
        fs::write(dir.join("report.json"), serde_json::to_string_pretty(&report)? + "\n")?;
        Ok(())
    }
}

/// Runs every (controller, seed) episode, computes the comparator per seed
/// and the regret reports. Files are written only by [`ExperimentOutput::write`].
pub fn run_experiment(cfg: &ExperimentConfig, opts: RunOptions) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let sys = cfg.system.build()?;
    let cost = cfg.cost.build(sys.d(), sys.n())?;
    let mut prepared = Vec::new();
    let mut resolved = Vec::new();
    for spec in &cfg.controllers {
        let (p, r) = prepare(spec, cfg, &sys, &cost)?;
        prepared.push(p);
        resolved.push(r);
    }
    let jobs: Vec<(usize, u64)> = (0..prepared.len())
        .flat_map(|c| cfg.seeds.iter().map(move |&s| (c, s)))
        .collect();
    let sim_opts = |seed: u64| -> Result<SimOptions> {
        Ok(SimOptions {
            x0: cfg.initial_state(sys.d(), seed)?,
            record_timing: opts.record_timing,
        })
    };
    let results = par::map(opts.exec, &jobs, |&(c, seed)| {
        let p = &prepared[c];
        let wrap = |e: Error| Error::Run {
            controller: p.name.clone(),
            seed,
            source: Box::new(e),
        };
        let mut ctl = p.instantiate(&sys, &cost).map_err(wrap)?;
        let sig = cfg.signal.with_seed(seed);
        let trace = simulate(&sys, ctl.as_mut(), &sig, &cost, cfg.horizon, &sim_opts(seed)?).map_err(wrap)?;
        let validation = trace.validate(&sys);
        Ok(EpisodeResult {
            controller: p.name.clone(),
            seed,
            trace,
            validation,
        })
    });
    let episodes = results.into_iter().collect::<Result<Vec<_>>>()?;

    let entries = sys.d() * sys.n();
    let use_hindsight = match cfg.comparator {
        ComparatorMode::Auto => entries <= 4,
        ComparatorMode::Hindsight => {
            if entries > 4 {
                return Err(Error::DimensionTooLarge(entries));
            }
            true
        }
        ComparatorMode::BestOfRun => false,
    };
    let comparators: Vec<Comparator> = if use_hindsight {
        let grid = cfg.hindsight.clone().unwrap_or_else(|| GridSpec::default_for(entries));
        par::map(opts.exec, &cfg.seeds, |&seed| {
            let sig = cfg.signal.with_seed(seed);
            let x0 = cfg.initial_state(sys.d(), seed)?;
            // the grid search itself is parallel; keep the outer loop light
            let hs = best_linear_in_hindsight(&sys, &sig, &cost, cfg.horizon, &grid, x0, opts.exec)?;
            Ok(Comparator {
                seed,
                kind: ComparatorKind::HindsightLinear,
                name: "hindsight_linear".into(),
                gain: Some(to_row_major(&hs.k)),
                total_cost: hs.total_cost,
                costs: hs.trace.cost,
            })
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?
    } else {
        let any_fixed = prepared.iter().any(|p| p.fixed);
        cfg.seeds
            .iter()
            .map(|&seed| {
                let best = episodes
                    .iter()
                    .filter(|e| e.seed == seed)
                    .filter(|e| {
                        !any_fixed || prepared.iter().any(|p| p.fixed && p.name == e.controller)
                    })
                    .min_by(|a, b| a.trace.total_cost().total_cmp(&b.trace.total_cost()))
                    .expect("at least one controller per seed");
                Comparator {
                    seed,
                    kind: ComparatorKind::BestOfRun,
                    name: best.controller.clone(),
                    gain: None,
                    total_cost: best.trace.total_cost(),
                    costs: best.trace.cost.clone(),
                }
            })
            .collect()
    };
    let reports = episodes
        .iter()
        .map(|e| {
            let cmp = comparators
                .iter()
                .find(|c| c.seed == e.seed)
                .expect("comparator per seed");
            RegretReport::new(&e.controller, e.seed, &e.trace.cost, cmp)
        })
        .collect();
    Ok(ExperimentOutput {
        config_hash: cfg.config_hash(),
        horizon: cfg.horizon,
        controllers: resolved,
        episodes,
        comparators,
        reports,
    })
}
