use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::lds::LdsSystem;
use crate::linalg::clip_norm;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SignalKind {
    Zero,
    Constant {
        value: Vec<f64>,
    },
    /// I.i.d. `N(0, scale^2 I)`.
    Gaussian {
        scale: f64,
    },
    /// Coordinate-wise `amplitude * sin(omega_k t + phase_k)` with seeded
    /// `omega_k ~ U[omega_min, omega_max]` and `phase_k ~ U[0, 2 pi)`.
    Sinusoidal {
        amplitude: f64,
        omega_min: f64,
        omega_max: f64,
    },
    /// `relu(A x_t) - A x_t`, plus optional Gaussian noise, so the effective
    /// transition becomes `relu(A x_t) + B u_t`.
    ReluResidual {
        #[serde(default)]
        noise_scale: f64,
    },
    /// Output `C z_t` of a hidden diagonal LDS `z_{t+1} = L z_t + xi_t` whose
    /// modes lie in `[rho_min, rho_max]`, driven by i.i.d. Gaussian inputs.
    StuLike {
        hidden: usize,
        noise_scale: f64,
        rho_min: f64,
        rho_max: f64,
    },
}

/// Disturbance source. Every emitted vector satisfies `||w_t|| <= w_clip`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisturbanceSignal {
    #[serde(rename = "source")]
    pub kind: SignalKind,
    #[serde(default)]
    pub seed: u64,
    pub w_clip: f64,
}

impl DisturbanceSignal {
    pub fn new(kind: SignalKind, seed: u64, w_clip: f64) -> Self {
        DisturbanceSignal { kind, seed, w_clip }
    }

    pub fn zero() -> Self {
        Self::new(SignalKind::Zero, 0, 1.0)
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        DisturbanceSignal {
            seed,
            ..self.clone()
        }
    }

    /// Whether the signal depends on the running state.
    pub fn is_online(&self) -> bool {
        matches!(self.kind, SignalKind::ReluResidual { .. })
    }

    pub fn start(&self, sys: &LdsSystem) -> Result<SignalGenerator> {
        if !(self.w_clip > 0.0) {
            return Err(Error::invalid("w_clip must be positive"));
        }
        let d = sys.d();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let state = match &self.kind {
            SignalKind::Zero | SignalKind::Gaussian { .. } => GenState::Stateless,
            SignalKind::Constant { value } => {
                check_dim("constant signal", d, value.len())?;
                GenState::Stateless
            }
            SignalKind::Sinusoidal {
                omega_min,
                omega_max,
                ..
            } => {
                if !(omega_min <= omega_max) {
                    return Err(Error::invalid("omega_min must not exceed omega_max"));
                }
                let omegas = (0..d)
                    .map(|_| {
                        if omega_max > omega_min {
                            rng.random_range(*omega_min..*omega_max)
                        } else {
                            *omega_min
                        }
                    })
                    .collect();
                let phases = (0..d)
                    .map(|_| rng.random_range(0.0..std::f64::consts::TAU))
                    .collect();
                GenState::Sinusoid { omegas, phases }
            }
            SignalKind::ReluResidual { .. } => GenState::Relu { a: sys.a().clone() },
            SignalKind::StuLike {
                hidden,
                rho_min,
                rho_max,
                ..
            } => {
                if *hidden == 0 || !(0.0 <= *rho_min && rho_min <= rho_max && *rho_max < 1.0) {
                    return Err(Error::invalid(
                        "stu-like signal needs hidden > 0 and 0 <= rho_min <= rho_max < 1",
                    ));
                }
                let modes = DVector::from_fn(*hidden, |_, _| {
                    if rho_max > rho_min {
                        rng.random_range(*rho_min..*rho_max)
                    } else {
                        *rho_min
                    }
                });
                let scale = 1.0 / (*hidden as f64).sqrt();
                let c = DMatrix::from_fn(d, *hidden, |_, _| {
                    { let z: f64 = StandardNormal.sample(&mut rng); scale * z }
                });
                GenState::Hidden {
                    modes,
                    c,
                    z: DVector::zeros(*hidden),
                }
            }
        };
        Ok(SignalGenerator {
            signal: self.clone(),
            d,
            state,
            next_t: 0,
        })
    }
}

#[derive(Clone, Debug)]
enum GenState {
    Stateless,
    Sinusoid { omegas: Vec<f64>, phases: Vec<f64> },
    Relu { a: DMatrix<f64> },
    Hidden {
        modes: DVector<f64>,
        c: DMatrix<f64>,
        z: DVector<f64>,
    },
}

/// Running instance of a [`DisturbanceSignal`]. Must be queried for
/// `t = 0, 1, 2, ...` in order.
#[derive(Clone, Debug)]
pub struct SignalGenerator {
    signal: DisturbanceSignal,
    d: usize,
    state: GenState,
    next_t: usize,
}

/// Fresh Gaussian draws for step `t`; a pure function of `(seed, t)`.
fn gaussian_draw(seed: u64, t: usize, len: usize, scale: f64) -> DVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(t as u64 + 1);
    DVector::from_fn(len, |_, _| { let z: f64 = StandardNormal.sample(&mut rng); scale * z })
}

impl SignalGenerator {
    pub fn next(&mut self, t: usize, x: &DVector<f64>) -> Result<DVector<f64>> {
        if t != self.next_t {
            return Err(Error::invalid(format!(
                "signal queried out of order: expected t = {}, got {t}",
                self.next_t
            )));
        }
        self.next_t += 1;
        let d = self.d;
        let seed = self.signal.seed;
        let raw = match (&self.signal.kind, &mut self.state) {
            (SignalKind::Zero, _) => DVector::zeros(d),
            (SignalKind::Constant { value }, _) => DVector::from_column_slice(value),
            (SignalKind::Gaussian { scale }, _) => gaussian_draw(seed, t, d, *scale),
            (SignalKind::Sinusoidal { amplitude, .. }, GenState::Sinusoid { omegas, phases }) => {
                let tf = t as f64;
                DVector::from_fn(d, |k, _| amplitude * (omegas[k] * tf + phases[k]).sin())
            }
            (SignalKind::ReluResidual { noise_scale }, GenState::Relu { a }) => {
                check_dim("state", d, x.len())?;
                let ax = &*a * x;
                let mut w = ax.map(|v| v.max(0.0)) - ax;
                if *noise_scale > 0.0 {
                    w += gaussian_draw(seed, t, d, *noise_scale);
                }
                w
            }
            (SignalKind::StuLike { noise_scale, .. }, GenState::Hidden { modes, c, z }) => {
                let xi = gaussian_draw(seed, t, z.len(), *noise_scale);
                let out = &*c * &*z;
                *z = z.component_mul(modes) + xi;
                out
            }
            _ => unreachable!("generator state matches its signal kind"),
        };
        Ok(clip_norm(raw, self.signal.w_clip))
    }
}

/// Length-`horizon` disturbance sequence. State-dependent kinds are
/// evaluated along the zero-control trajectory from `x_0 = 0`.
pub fn generate_signal(
    sig: &DisturbanceSignal,
    sys: &LdsSystem,
    horizon: usize,
) -> Result<Vec<DVector<f64>>> {
    if horizon < 1 {
        return Err(Error::invalid("horizon must be at least 1"));
    }
    let mut gen = sig.start(sys)?;
    let mut x = DVector::zeros(sys.d());
    let u = DVector::zeros(sys.n());
    let mut out = Vec::with_capacity(horizon);
    for t in 0..horizon {
        let w = gen.next(t, &x)?;
        x = sys.step(&x, &u, &w)?;
        out.push(w);
    }
    Ok(out)
}
