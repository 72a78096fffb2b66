use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{check_dim, Error, Result};
use crate::fastconv::ConvMode;
use crate::lds::{generate_system, CostFunction, DisturbanceSignal, GenerateOptions, LdsSystem, SystemBounds};
use crate::linalg::from_row_major;

use super::hindsight::GridSpec;

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SystemSpec {
    /// Random system from [`generate_system`].
    Generate {
        d: usize,
        n: usize,
        rho_max: f64,
        seed: u64,
        #[serde(default, rename = "kappa_B")]
        kappa_b: Option<f64>,
        #[serde(default = "one", rename = "W")]
        w_bound: f64,
    },
    Scalar {
        a: f64,
        b: f64,
        gamma: f64,
        #[serde(default = "one")]
        kappa: f64,
        #[serde(default = "one", rename = "W")]
        w_bound: f64,
    },
    /// Row-major `A` and `B` with explicit bounds.
    Inline {
        #[serde(rename = "A")]
        a: Vec<f64>,
        #[serde(rename = "B")]
        b: Vec<f64>,
        d: usize,
        n: usize,
        kappa: f64,
        #[serde(rename = "kappa_B")]
        kappa_b: f64,
        #[serde(rename = "W")]
        w_bound: f64,
        gamma: f64,
    },
}

impl SystemSpec {
    pub fn build(&self) -> Result<LdsSystem> {
        match self {
            SystemSpec::Generate {
                d,
                n,
                rho_max,
                seed,
                kappa_b,
                w_bound,
            } => generate_system(
                *d,
                *n,
                *rho_max,
                *seed,
                GenerateOptions {
                    kappa_b: *kappa_b,
                    w_bound: *w_bound,
                    ..GenerateOptions::default()
                },
            ),
            SystemSpec::Scalar {
                a,
                b,
                gamma,
                kappa,
                w_bound,
            } => LdsSystem::new(
                DMatrix::from_element(1, 1, *a),
                DMatrix::from_element(1, 1, *b),
                SystemBounds {
                    kappa: *kappa,
                    kappa_b: b.abs().max(1.0),
                    w_bound: *w_bound,
                    gamma: *gamma,
                },
            ),
            SystemSpec::Inline {
                a,
                b,
                d,
                n,
                kappa,
                kappa_b,
                w_bound,
                gamma,
            } => LdsSystem::new(
                from_row_major(*d, *d, a)?,
                from_row_major(*d, *n, b)?,
                SystemBounds {
                    kappa: *kappa,
                    kappa_b: *kappa_b,
                    w_bound: *w_bound,
                    gamma: *gamma,
                },
            ),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CostSpec {
    /// `q ||x||^2 + r ||u||^2`.
    Quadratic {
        #[serde(default = "one")]
        q: f64,
        #[serde(default = "one")]
        r: f64,
    },
    QuadraticDiag {
        q: Vec<f64>,
        r: Vec<f64>,
    },
    HingeState,
}

impl CostSpec {
    pub fn build(&self, d: usize, n: usize) -> Result<CostFunction> {
        match self {
            CostSpec::Quadratic { q, r } => CostFunction::quadratic(
                DMatrix::identity(d, d) * *q,
                DMatrix::identity(n, n) * *r,
            ),
            CostSpec::QuadraticDiag { q, r } => {
                check_dim("cost Q diagonal", d, q.len())?;
                check_dim("cost R diagonal", n, r.len())?;
                CostFunction::quadratic(
                    DMatrix::from_diagonal(&DVector::from_column_slice(q)),
                    DMatrix::from_diagonal(&DVector::from_column_slice(r)),
                )
            }
            CostSpec::HingeState => Ok(CostFunction::hinge_state()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ControllerSpec {
    /// Spectral controller; unset fields follow the horizon schedule.
    Osc {
        #[serde(default)]
        name: Option<String>,
        #[serde(default)]
        m: Option<usize>,
        #[serde(default)]
        h: Option<usize>,
        #[serde(default)]
        eta: Option<f64>,
        #[serde(default)]
        m_x: Option<usize>,
        #[serde(default)]
        fast_path: Option<ConvMode>,
        /// Target closed-loop radius for a pole-placement stabilizer.
        #[serde(default)]
        stabilize: Option<f64>,
        #[serde(default)]
        radius: Option<f64>,
    },
    /// Disturbance-feedback baseline with memory `ceil(ln T / gamma)` by default.
    Gpc {
        #[serde(default)]
        name: Option<String>,
        #[serde(default)]
        memory: Option<usize>,
        #[serde(default)]
        eta: Option<f64>,
        #[serde(default)]
        m_x: Option<usize>,
        #[serde(default)]
        stabilize: Option<f64>,
        #[serde(default)]
        radius: Option<f64>,
    },
    /// Fixed `u = K x`, `K` row-major `n x d`.
    FixedK {
        #[serde(default)]
        name: Option<String>,
        k: Vec<f64>,
    },
    Zero {
        #[serde(default)]
        name: Option<String>,
    },
}

impl ControllerSpec {
    pub fn name(&self) -> String {
        let (name, default) = match self {
            ControllerSpec::Osc { name, .. } => (name, "osc"),
            ControllerSpec::Gpc { name, .. } => (name, "gpc"),
            ControllerSpec::FixedK { name, .. } => (name, "fixed_k"),
            ControllerSpec::Zero { name } => (name, "zero"),
        };
        name.clone().unwrap_or_else(|| default.to_string())
    }

    /// Whether the policy is fixed in advance (eligible as a comparator).
    pub fn is_fixed(&self) -> bool {
        matches!(self, ControllerSpec::FixedK { .. } | ControllerSpec::Zero { .. })
    }
}

/// Overrides shared by the learning controllers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleOverrides {
    /// Lipschitz scale; defaults to the cost's own.
    #[serde(default, rename = "G")]
    pub g: Option<f64>,
    /// Common multiplier on every default step size.
    #[serde(default = "one")]
    pub eta_scale: f64,
}

impl Default for ScheduleOverrides {
    fn default() -> Self {
        ScheduleOverrides {
            g: None,
            eta_scale: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComparatorMode {
    /// Hindsight grid search when `d * n <= 4`, best fixed run otherwise.
    #[default]
    Auto,
    Hindsight,
    BestOfRun,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub system: SystemSpec,
    pub signal: DisturbanceSignal,
    pub cost: CostSpec,
    pub controllers: Vec<ControllerSpec>,
    #[serde(default)]
    pub schedule: ScheduleOverrides,
    #[serde(rename = "T")]
    pub horizon: usize,
    /// Each seed reseeds the signal (and the sampled initial state).
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    /// Standard deviation of a Gaussian initial state drawn per seed.
    #[serde(default)]
    pub x0_scale: Option<f64>,
    #[serde(default)]
    pub comparator: ComparatorMode,
    #[serde(default)]
    pub hindsight: Option<GridSpec>,
    #[serde(default)]
    pub output_dir: Option<String>,
}

fn default_name() -> String {
    "experiment".into()
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon < 1 {
            return Err(Error::Config("T must be at least 1".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if self.controllers.is_empty() {
            return Err(Error::Config("at least one controller is required".into()));
        }
        let mut names: Vec<String> = self.controllers.iter().map(|c| c.name()).collect();
        names.sort();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("controller names must be unique".into()));
        }
        if names
            .iter()
            .any(|n| n.is_empty() || !n.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-'))
        {
            return Err(Error::Config(
                "controller names may only use ASCII letters, digits, '_' and '-'".into(),
            ));
        }
        if !(self.schedule.eta_scale >= 0.0 && self.schedule.eta_scale.is_finite()) {
            return Err(Error::Config("eta_scale must be finite and >= 0".into()));
        }
        Ok(())
    }

    /// SHA-256 of the canonical (sorted-key, compact) JSON form, ignoring
    /// `output_dir`.
    pub fn config_hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = None;
        let value = serde_json::to_value(&c).expect("config serializes");
        let mut canonical = String::new();
        write_canonical(&value, &mut canonical);
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }

    /// Initial state for a seed.
    pub fn initial_state(&self, d: usize, seed: u64) -> Result<Option<DVector<f64>>> {
        if let Some(x0) = &self.x0 {
            check_dim("x0", d, x0.len())?;
            return Ok(Some(DVector::from_column_slice(x0)));
        }
        Ok(self.x0_scale.map(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
            DVector::from_fn(d, |_, _| {
                let z: f64 = StandardNormal.sample(&mut rng);
                s * z
            })
        }))
    }
}

fn write_canonical(v: &serde_json::Value, out: &mut String) {
    use serde_json::Value;
    match v {
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, k) in keys.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&Value::String(k.clone()).to_string());
                out.push(':');
                write_canonical(&map[k], out);
            }
            out.push('}');
        }
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_canonical(item, out);
            }
            out.push(']');
        }
        other => out.push_str(&other.to_string()),
    }
}
