//! Range-only source estimator.
//!
//! Three first-order filters driven by the squared range `D^2`, the agent's
//! squared norm `|y|^2` and the agent position `y` produce signals `eta`, `m`
//! and `V` (the filter derivatives themselves, so no differentiation of
//! measured data is needed). Because `D^2 = |y|^2 - 2 y.x + |x|^2`, the
//! combination `eta - m + V.x` obeys `p' = -alpha p` and is therefore a
//! decaying linear-in-`x` regression residual. The estimator is a gradient
//! flow on the squared residual evaluated at the estimate.

use nalgebra::DVector;

use crate::error::{check_gain, Error, Result};

/// Filter states `z1`, `z2` (scalars) and `z3` (vector).
#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    pub z1: f64,
    pub z2: f64,
    pub z3: DVector<f64>,
}

impl FilterState {
    pub fn zeros(n: usize) -> Self {
        Self {
            z1: 0.0,
            z2: 0.0,
            z3: DVector::zeros(n),
        }
    }
}

/// Filter outputs; also the time derivatives of the filter states.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutputs {
    pub eta: f64,
    pub m: f64,
    pub v: DVector<f64>,
}

/// `eta = -alpha z1 + D^2/2`, `m = -alpha z2 + |y|^2/2`, `V = -alpha z3 + y`.
pub fn filter_outputs(f: &FilterState, range: f64, y: &DVector<f64>, alpha: f64) -> Result<FilterOutputs> {
    check_gain("alpha", alpha)?;
    if f.z3.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: f.z3.len(),
            got: y.len(),
        });
    }
    Ok(FilterOutputs {
        eta: -alpha * f.z1 + 0.5 * range * range,
        m: -alpha * f.z2 + 0.5 * y.dot(y),
        v: y - &f.z3 * alpha,
    })
}

/// Estimator velocity `-gamma V (eta - m + V.x_hat)`.
pub fn estimator_derivative(x_hat: &DVector<f64>, out: &FilterOutputs, gamma: f64) -> Result<DVector<f64>> {
    check_gain("gamma", gamma)?;
    if x_hat.len() != out.v.len() {
        return Err(Error::DimensionMismatch {
            expected: out.v.len(),
            got: x_hat.len(),
        });
    }
    let err = out.eta - out.m + out.v.dot(x_hat);
    Ok(&out.v * (-gamma * err))
}

/// Consistency residual `p = eta - m + V.x` at the true source position.
/// Decays as `exp(-alpha t)` for a stationary source and exact ranges.
pub fn residual(out: &FilterOutputs, x: &DVector<f64>) -> f64 {
    out.eta - out.m + out.v.dot(x)
}
