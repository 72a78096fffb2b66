use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::controllers::LinearController;
use crate::error::{Error, Result};
use crate::lds::{simulate, CostFunction, DisturbanceSignal, EpisodeTrace, LdsSystem, SimOptions};
use crate::linalg::eigenvalues;
use crate::par::{self, Execution};

/// Per-axis grid over the entries of `K`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
    #[serde(default = "default_rounds")]
    pub max_rounds: usize,
}

fn default_rounds() -> usize {
    3
}

/// Refinement stops once the relative improvement falls below this.
const REFINE_TOL: f64 = 1e-4;
const MAX_GRID_POINTS: usize = 1_000_000;

impl GridSpec {
    /// `[-2, 2]` per axis with a spacing that keeps the grid near 10^4 points.
    pub fn default_for(entries: usize) -> Self {
        let step = match entries {
            0 | 1 => 0.001,
            2 => 0.04,
            3 => 0.2,
            _ => 0.4,
        };
        GridSpec {
            lo: -2.0,
            hi: 2.0,
            step,
            max_rounds: default_rounds(),
        }
    }

    fn axis(&self) -> Vec<f64> {
        let count = ((self.hi - self.lo) / self.step + 1e-9).floor() as usize + 1;
        (0..count).map(|i| self.lo + i as f64 * self.step).collect()
    }
}

#[derive(Clone, Debug)]
pub struct HindsightResult {
    pub k: DMatrix<f64>,
    pub total_cost: f64,
    pub trace: EpisodeTrace,
    pub candidates_evaluated: usize,
    pub rounds: usize,
}

/// Whether `A + B K` has a real, nonnegative spectrum of radius at most `1 - gamma`.
pub fn in_stable_class(sys: &LdsSystem, k: &DMatrix<f64>) -> bool {
    let cl = sys.a() + sys.b() * k;
    let limit = 1.0 - sys.bounds().gamma;
    eigenvalues(&cl)
        .into_iter()
        .all(|(re, im)| im.abs() <= 1e-9 && re >= -1e-12 && re <= limit + 1e-9)
}

fn cartesian(axes: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::new()];
    for axis in axes {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                axis.iter().map(move |&v| {
                    let mut p = prefix.clone();
                    p.push(v);
                    p
                })
            })
            .collect();
    }
    out
}

/// Best stable linear feedback in hindsight by exhaustive grid search with
/// local refinement.
#[allow(clippy::too_many_arguments)]
pub fn best_linear_in_hindsight(
    sys: &LdsSystem,
    sig: &DisturbanceSignal,
    cost: &CostFunction,
    horizon: usize,
    grid: &GridSpec,
    x0: Option<DVector<f64>>,
    exec: Execution,
) -> Result<HindsightResult> {
    let (d, n) = (sys.d(), sys.n());
    let entries = d * n;
    if entries > 4 {
        return Err(Error::DimensionTooLarge(entries));
    }
    if !(grid.step > 0.0 && grid.hi >= grid.lo) {
        return Err(Error::invalid("grid needs step > 0 and hi >= lo"));
    }
    let opts = SimOptions {
        x0,
        record_timing: false,
    };
    let evaluate = |cands: &[Vec<f64>]| -> Result<Vec<(f64, Vec<f64>)>> {
        let costs = par::map(exec, cands, |c| -> Result<Option<f64>> {
            let k = DMatrix::from_row_slice(n, d, c);
            if !in_stable_class(sys, &k) {
                return Ok(None);
            }
            let mut ctl = LinearController::new(k);
            let tr = simulate(sys, &mut ctl, sig, cost, horizon, &opts)?;
            Ok(Some(tr.total_cost()))
        });
        let mut out = Vec::new();
        for (c, r) in cands.iter().zip(costs) {
            if let Some(v) = r? {
                out.push((v, c.clone()));
            }
        }
        Ok(out)
    };
    let best_of = |scored: &[(f64, Vec<f64>)]| {
        scored
            .iter()
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .cloned()
    };

    let axis = grid.axis();
    if axis.len().saturating_pow(entries as u32) > MAX_GRID_POINTS {
        return Err(Error::invalid(format!(
            "grid has more than {MAX_GRID_POINTS} points"
        )));
    }
    let cands = cartesian(&vec![axis; entries]);
    let scored = evaluate(&cands)?;
    let mut evaluated = scored.len();
    let (mut best_cost, mut best) = best_of(&scored)
        .ok_or_else(|| Error::NumericalFailure("no grid point passes the stability filter".into()))?;
    let mut spacing = grid.step;
    let mut rounds = 0;
    while rounds < grid.max_rounds {
        spacing /= 2.0;
        rounds += 1;
        let axes: Vec<Vec<f64>> = best
            .iter()
            .map(|&c| (-2..=2).map(|i| c + i as f64 * spacing).collect())
            .collect();
        let scored = evaluate(&cartesian(&axes))?;
        evaluated += scored.len();
        let Some((c, k)) = best_of(&scored) else { break };
        let improvement = best_cost - c;
        if c < best_cost {
            best_cost = c;
            best = k;
        }
        if improvement <= REFINE_TOL * best_cost.abs().max(f64::MIN_POSITIVE) {
            break;
        }
    }
    let k = DMatrix::from_row_slice(n, d, &best);
    let mut ctl = LinearController::new(k.clone());
    let trace = simulate(sys, &mut ctl, sig, cost, horizon, &opts)?;
    Ok(HindsightResult {
        k,
        total_cost: trace.total_cost(),
        trace,
        candidates_evaluated: evaluated,
        rounds,
    })
}
