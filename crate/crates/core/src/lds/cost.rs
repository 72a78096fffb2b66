use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};

/// Value and gradients of a cost at one point.
#[derive(Clone, Debug, PartialEq)]
pub struct CostEval {
    pub value: f64,
    pub grad_x: DVector<f64>,
    pub grad_u: DVector<f64>,
}

/// User-supplied convex cost.
pub trait CostPlugin: Send + Sync + fmt::Debug {
    fn eval(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<CostEval>;
}

#[derive(Clone, Debug)]
pub enum CostKind {
    /// `x^T Q x + u^T R u`.
    Quadratic { q: DMatrix<f64>, r: DMatrix<f64> },
    /// `max{-x[0], -1}`, independent of `u`.
    HingeState,
    Plugin(Arc<dyn CostPlugin>),
}

#[derive(Clone, Debug)]
pub struct CostFunction {
    pub kind: CostKind,
    /// Lipschitz scale `G`: gradients are bounded by `G * D` on the ball of radius `D`.
    pub lipschitz: f64,
}

fn is_psd(m: &DMatrix<f64>) -> bool {
    if m.is_empty() {
        return true;
    }
    let sym = 0.5 * (m + m.transpose());
    if (m - &sym).amax() > 1e-12 * m.amax().max(1.0) {
        return false;
    }
    let min = sym.clone().symmetric_eigenvalues().min();
    min >= -1e-10 * sym.trace().abs().max(f64::MIN_POSITIVE)
}

impl CostFunction {
    pub fn quadratic(q: DMatrix<f64>, r: DMatrix<f64>) -> Result<Self> {
        if !q.is_square() || !r.is_square() {
            return Err(Error::invalid("Q and R must be square"));
        }
        if !is_psd(&q) || !is_psd(&r) {
            return Err(Error::invalid("Q and R must be symmetric positive semidefinite"));
        }
        let top = |m: &DMatrix<f64>| {
            if m.is_empty() {
                0.0
            } else {
                m.clone().symmetric_eigenvalues().max()
            }
        };
        let lipschitz = (2.0 * top(&q).max(top(&r))).max(1.0);
        Ok(CostFunction {
            kind: CostKind::Quadratic { q, r },
            lipschitz,
        })
    }

    /// `||x||^2 + ||u||^2`.
    pub fn identity(d: usize, n: usize) -> Self {
        Self::quadratic(DMatrix::identity(d, d), DMatrix::identity(n, n))
            .expect("identity is PSD")
    }

    pub fn hinge_state() -> Self {
        CostFunction {
            kind: CostKind::HingeState,
            lipschitz: 1.0,
        }
    }

    pub fn plugin(p: Arc<dyn CostPlugin>, lipschitz: f64) -> Self {
        CostFunction {
            kind: CostKind::Plugin(p),
            lipschitz,
        }
    }

    pub fn eval(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<CostEval> {
        match &self.kind {
            CostKind::Quadratic { q, r } => {
                check_dim("cost state", q.nrows(), x.len())?;
                check_dim("cost control", r.nrows(), u.len())?;
                let qx = q * x;
                let ru = r * u;
                Ok(CostEval {
                    value: x.dot(&qx) + u.dot(&ru),
                    grad_x: 2.0 * qx,
                    grad_u: 2.0 * ru,
                })
            }
            CostKind::HingeState => {
                if x.is_empty() {
                    return Err(Error::DimensionMismatch {
                        context: "hinge cost state",
                        expected: 1,
                        actual: 0,
                    });
                }
                let mut grad_x = DVector::zeros(x.len());
                // subgradient 0 at the kink x = 1
                let value = if x[0] < 1.0 {
                    grad_x[0] = -1.0;
                    -x[0]
                } else {
                    -1.0
                };
                Ok(CostEval {
                    value,
                    grad_x,
                    grad_u: DVector::zeros(u.len()),
                })
            }
            CostKind::Plugin(p) => {
                let out = p.eval(x, u)?;
                if !out.value.is_finite() {
                    return Err(Error::CostEvaluation(format!(
                        "plugin returned non-finite value {}",
                        out.value
                    )));
                }
                check_dim("plugin grad_x", x.len(), out.grad_x.len())?;
                check_dim("plugin grad_u", u.len(), out.grad_u.len())?;
                Ok(out)
            }
        }
    }
}
