//! Classical fixed-step fourth-order Runge-Kutta.
//!
//! States are flat `DVector<f64>`; callers pack structured states into a
//! vector and unpack inside the right-hand side. The right-hand side may fail,
//! in which case the step is abandoned and the error is returned unchanged.

use nalgebra::DVector;

/// Advance `x` from `t` to `t + dt` with one RK4 step.
pub fn rk4_step<E, F>(t: f64, x: &DVector<f64>, dt: f64, mut rhs: F) -> Result<DVector<f64>, E>
where
    F: FnMut(f64, &DVector<f64>) -> Result<DVector<f64>, E>,
{
    let half = 0.5 * dt;
    let k1 = rhs(t, x)?;
    let k2 = rhs(t + half, &(x + &k1 * half))?;
    let k3 = rhs(t + half, &(x + &k2 * half))?;
    let k4 = rhs(t + dt, &(x + &k3 * dt))?;
    Ok(x + (k1 + (k2 + k3) * 2.0 + k4) * (dt / 6.0))
}

/// Number of fixed steps of size `dt` needed to cover `span`.
///
/// Spans that are within rounding of an integer multiple of `dt` are not
/// padded with an extra step.
pub fn step_count(span: f64, dt: f64) -> usize {
    if span <= 0.0 {
        return 0;
    }
    let raw = span / dt;
    let nearest = raw.round();
    if (raw - nearest).abs() <= 1e-9 * nearest.max(1.0) {
        nearest as usize
    } else {
        raw.ceil() as usize
    }
}

/// Integrate from `t0` to `t1` with steps no larger than `dt`; the last step
/// is shortened so the endpoint is hit exactly.
pub fn integrate<E, F>(t0: f64, t1: f64, x0: DVector<f64>, dt: f64, mut rhs: F) -> Result<DVector<f64>, E>
where
    F: FnMut(f64, &DVector<f64>) -> Result<DVector<f64>, E>,
{
    let steps = step_count(t1 - t0, dt);
    let mut x = x0;
    for k in 0..steps {
        let t = t0 + k as f64 * dt;
        let h = if k + 1 == steps { t1 - t } else { dt };
        x = rk4_step(t, &x, h, &mut rhs)?;
    }
    Ok(x)
}
