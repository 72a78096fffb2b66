use serde::Serialize;

use crate::error::{Error, Result};

/// `-(1 - (1 - gamma)^T) / gamma`: the best total hinge cost over stable
/// scalar feedbacks from `x_0 = 1` without noise.
pub fn min_cost_closed_form(gamma: f64, horizon: usize) -> f64 {
    if gamma >= 1.0 {
        return -1.0;
    }
    // (1 - gamma)^T via exp/ln1p stays accurate for tiny gamma
    -(-(horizon as f64 * (-gamma).ln_1p()).exp_m1()) / gamma
}

/// `(-1/gamma, -(1 - e^{-gamma T}) / gamma)`.
pub fn sandwich_bounds(gamma: f64, horizon: usize) -> (f64, f64) {
    (-1.0 / gamma, -(-(-gamma * horizon as f64).exp_m1()) / gamma)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GammaCurvePoint {
    #[serde(rename = "T")]
    pub horizon: usize,
    pub cost_poly: f64,
    pub cost_polylog: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GammaDemoReport {
    #[serde(rename = "T")]
    pub horizon: usize,
    pub k: f64,
    /// `1 / T^k`.
    pub gamma_poly: f64,
    /// `1 / ln^2 T`.
    pub gamma_polylog: f64,
    pub cost_poly: f64,
    pub cost_polylog: f64,
    /// `cost_polylog - cost_poly`; positive when the smaller margin wins.
    pub gap: f64,
    /// `T^k / 2 - ln^2 T`.
    pub predicted_gap: f64,
    pub gap_positive: bool,
    /// `gap >= predicted_gap` (checked whenever the prediction is positive).
    pub gap_bound_holds: bool,
    pub sandwich_holds: bool,
    /// Smallest `ln T` at which the gap turns positive for this `k`.
    pub crossover_ln_t: Option<f64>,
    pub curve: Vec<GammaCurvePoint>,
}

fn gap_at(ln_t: f64, k: f64) -> f64 {
    // both costs are at their -1/gamma limits once gamma T is large
    let t_k = (k * ln_t).exp();
    t_k - ln_t * ln_t
}

/// Compares the best achievable cost for `gamma = 1/T^k` against
/// `gamma = 1/ln^2 T` with the exact closed form.
pub fn gamma_advantage_demo(horizon: usize, k: f64) -> Result<GammaDemoReport> {
    if !(k > 0.0 && k < 1.0 / 12.0) {
        return Err(Error::invalid(format!("k must lie in (0, 1/12), got {k}")));
    }
    if horizon < 100 {
        return Err(Error::invalid("T must be at least 100"));
    }
    let tf = horizon as f64;
    let gamma_poly = tf.powf(-k);
    let gamma_polylog = 1.0 / tf.ln().powi(2);
    let cost_poly = min_cost_closed_form(gamma_poly, horizon);
    let cost_polylog = min_cost_closed_form(gamma_polylog, horizon);
    let gap = cost_polylog - cost_poly;
    let predicted_gap = tf.powf(k) / 2.0 - tf.ln().powi(2);
    let sandwich_holds = [gamma_poly, gamma_polylog].iter().all(|&g| {
        let c = min_cost_closed_form(g, horizon);
        let (lo, hi) = sandwich_bounds(g, horizon);
        lo <= c + 1e-12 * lo.abs() && c <= hi + 1e-12 * lo.abs()
    });
    let crossover_ln_t = {
        // gap_at is negative then positive in ln T; scan then bisect
        let mut lo = tf.ln();
        let mut hi = lo;
        let mut found = gap_at(lo, k) > 0.0;
        while !found && hi < 1e6 {
            lo = hi;
            hi *= 2.0;
            found = gap_at(hi, k) > 0.0;
        }
        found.then(|| {
            if gap_at(lo, k) > 0.0 {
                return lo;
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if gap_at(mid, k) > 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            hi
        })
    };
    let mut curve = Vec::new();
    let mut t = 100usize;
    while t < horizon {
        curve.push(point(t, k));
        t *= 10;
    }
    curve.push(point(horizon, k));
    Ok(GammaDemoReport {
        horizon,
        k,
        gamma_poly,
        gamma_polylog,
        cost_poly,
        cost_polylog,
        gap,
        predicted_gap,
        gap_positive: gap > 0.0,
        gap_bound_holds: predicted_gap <= 0.0 || gap >= predicted_gap,
        sandwich_holds,
        crossover_ln_t,
        curve,
    })
}

fn point(horizon: usize, k: f64) -> GammaCurvePoint {
    let tf = horizon as f64;
    GammaCurvePoint {
        horizon,
        cost_poly: min_cost_closed_form(tf.powf(-k), horizon),
        cost_polylog: min_cost_closed_form(1.0 / tf.ln().powi(2), horizon),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_values() {
        assert!((min_cost_closed_form(0.25, 16) + 3.959_909_617).abs() < 1e-8);
        assert_eq!(min_cost_closed_form(1.0, 50), -1.0);
        let direct: f64 = -(0..16).map(|t| 0.75f64.powi(t)).sum::<f64>();
        assert!((min_cost_closed_form(0.25, 16) - direct).abs() < 1e-13);
    }

    #[test]
    fn exponent_range_checked() {
        assert!(gamma_advantage_demo(1000, 0.1).is_err());
        assert!(gamma_advantage_demo(1000, 0.0).is_err());
        assert!(gamma_advantage_demo(50, 0.05).is_err());
    }
}
