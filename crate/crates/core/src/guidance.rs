//! Circumnavigation control law.
//!
//! The agent velocity follows the estimate, contracts or expands radially
//! until the estimated range equals `d`, and rotates about the estimate
//! through the skew schedule:
//!
//! ```text
//! y' = x_hat' - ((D_hat^2 - d^2) I - A(t)) (y - x_hat)
//! ```

use nalgebra::{DMatrix, DVector};

/// Below this norm a velocity is treated as zero when normalizing.
pub const NORMALIZE_EPS: f64 = 1e-12;

/// Smallest admissible initial estimated range.
pub const MIN_INITIAL_RANGE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct ControlCommand {
    /// Commanded velocity (normalized when the constant-speed variant is on).
    pub velocity: DVector<f64>,
    /// Output of the control law before any normalization.
    pub raw_velocity: DVector<f64>,
}

/// Estimated range `|y - x_hat|`.
pub fn d_hat(y: &DVector<f64>, x_hat: &DVector<f64>) -> f64 {
    (y - x_hat).norm()
}

pub fn control_velocity(
    y: &DVector<f64>,
    x_hat: &DVector<f64>,
    x_hat_dot: &DVector<f64>,
    a_t: &DMatrix<f64>,
    d: f64,
) -> DVector<f64> {
    let rel = y - x_hat;
    let radial = rel.norm_squared() - d * d;
    x_hat_dot - &rel * radial + a_t * &rel
}

/// `v / |v|`, or zero when `|v| <= NORMALIZE_EPS`.
pub fn normalize(v: &DVector<f64>) -> DVector<f64> {
    let n = v.norm();
    if n > NORMALIZE_EPS {
        v / n
    } else {
        DVector::zeros(v.len())
    }
}

/// Evaluate the control law and apply the optional constant-speed variant.
pub fn command(
    y: &DVector<f64>,
    x_hat: &DVector<f64>,
    x_hat_dot: &DVector<f64>,
    a_t: &DMatrix<f64>,
    d: f64,
    normalized: bool,
) -> ControlCommand {
    let raw_velocity = control_velocity(y, x_hat, x_hat_dot, a_t, d);
    let velocity = if normalized {
        normalize(&raw_velocity)
    } else {
        raw_velocity.clone()
    };
    ControlCommand { velocity, raw_velocity }
}
