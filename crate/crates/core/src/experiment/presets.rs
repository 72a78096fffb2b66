//! Ready-made configurations.

use super::config::{ComparatorMode, ControllerSpec, CostSpec, ExperimentConfig, ScheduleOverrides, SystemSpec};
use crate::lds::{DisturbanceSignal, SignalKind};

/// The three disturbance settings of the comparison study.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StudySignal {
    GaussianLinear,
    ReluResidual,
    StuLike,
}

impl StudySignal {
    pub const ALL: [StudySignal; 3] = [
        StudySignal::GaussianLinear,
        StudySignal::ReluResidual,
        StudySignal::StuLike,
    ];

    pub fn label(self) -> &'static str {
        match self {
            StudySignal::GaussianLinear => "gaussian_linear",
            StudySignal::ReluResidual => "relu_residual",
            StudySignal::StuLike => "stu_like",
        }
    }

    fn signal(self) -> DisturbanceSignal {
        let kind = match self {
            StudySignal::GaussianLinear => SignalKind::Gaussian { scale: 0.5 },
            StudySignal::ReluResidual => SignalKind::ReluResidual { noise_scale: 0.5 },
            StudySignal::StuLike => SignalKind::StuLike {
                hidden: 16,
                noise_scale: 1.0,
                rho_min: 0.9,
                rho_max: 0.999,
            },
        };
        DisturbanceSignal::new(kind, 0, 1.0)
    }
}

fn osc_gpc() -> Vec<ControllerSpec> {
    vec![
        ControllerSpec::Osc {
            name: None,
            m: None,
            h: Some(STUDY_FILTERS),
            eta: None,
            m_x: None,
            fast_path: None,
            stabilize: None,
            radius: None,
        },
        ControllerSpec::Gpc {
            name: None,
            memory: None,
            eta: None,
            m_x: None,
            stabilize: None,
            radius: None,
        },
    ]
}

/// Filters used by the spectral controller in the comparison study.
pub const STUDY_FILTERS: usize = 8;
/// Common step-size multiplier for both learners in the comparison study.
pub const STUDY_ETA_SCALE: f64 = 30.0;

fn study(signal: StudySignal, d: usize, n: usize, horizon: usize) -> ExperimentConfig {
    ExperimentConfig {
        name: format!("study_{}_d{d}_n{n}", signal.label()),
        system: SystemSpec::Generate {
            d,
            n,
            rho_max: 0.9,
            seed: 7,
            kappa_b: None,
            w_bound: 1.0,
        },
        signal: signal.signal(),
        cost: CostSpec::Quadratic { q: 1.0, r: 1.0 },
        controllers: osc_gpc(),
        schedule: ScheduleOverrides {
            g: None,
            eta_scale: STUDY_ETA_SCALE,
        },
        horizon,
        seeds: vec![0, 1, 2],
        x0: None,
        x0_scale: (signal == StudySignal::GaussianLinear || signal == StudySignal::ReluResidual)
            .then_some(1.0),
        comparator: ComparatorMode::BestOfRun,
        hindsight: None,
        output_dir: None,
    }
}

/// Desk-scale comparison: `d = 10`, `n = 4`, spectral radius 0.9, `T = 2000`.
pub fn study_desk(signal: StudySignal) -> ExperimentConfig {
    study(signal, 10, 4, 2000)
}

/// Full-size comparison: `d = 100`, `n = 40`. Long-running.
pub fn study_full(signal: StudySignal) -> ExperimentConfig {
    study(signal, 100, 40, 2000)
}

/// Step-size multiplier used by the regret sweep for both learners.
pub const SWEEP_ETA_SCALE: f64 = 1.0;

/// Scalar `a = 0.9`, `b = 1`, sinusoidal disturbances, quadratic cost, exact
/// hindsight comparator.
pub fn regret_sweep_base() -> ExperimentConfig {
    ExperimentConfig {
        name: "regret_sweep_scalar".into(),
        system: SystemSpec::Scalar {
            a: 0.9,
            b: 1.0,
            gamma: 0.1,
            kappa: 1.0,
            w_bound: 1.0,
        },
        signal: DisturbanceSignal::new(
            SignalKind::Sinusoidal {
                amplitude: 1.0,
                omega_min: 0.05,
                omega_max: 0.5,
            },
            0,
            1.0,
        ),
        cost: CostSpec::Quadratic { q: 1.0, r: 1.0 },
        controllers: osc_gpc(),
        schedule: ScheduleOverrides {
            g: None,
            eta_scale: SWEEP_ETA_SCALE,
        },
        horizon: 500,
        seeds: vec![3],
        x0: None,
        x0_scale: None,
        comparator: ComparatorMode::Hindsight,
        hindsight: None,
        output_dir: None,
    }
}

/// Sweep horizons.
pub const SWEEP_HORIZONS: [usize; 4] = [500, 1000, 2000, 4000];
