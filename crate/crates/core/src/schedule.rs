//! Periodic skew-symmetric rotation schedules `A(t)`.
//!
//! Two constructions are provided. In the plane a constant multiple of the
//! quarter-turn generator `E = [[0, 1], [-1, 0]]` suffices. In space no
//! constant skew matrix works (every 3x3 skew matrix is singular), so the
//! spatial schedule alternates between rotating about the first axis
//! (`B = 0 ⊕ bE`) and about the third axis (`C = cE ⊕ 0`), blending in and out
//! of each generator with [`smooth_step`] over a window of length `rho`:
//!
//! ```text
//! r in [0,  T1]   g(r / rho) B
//! r in [T1, T2]   B
//! r in [T2, T3]   (1 - g((r - T2) / rho)) B
//! r in [T3, T4]   g((r - T3) / rho) C
//! r in [T4, T5]   C
//! r in [T5, T ]   (1 - g((r - T5) / rho)) C
//! ```
//!
//! where `r = t mod T` and the breakpoints are
//! `T1 = rho`, `T2 = rho + pi/|b|`, `T3 = 2 rho + pi/|b|`, `T4 = 3 rho + pi/|b|`,
//! `T5 = 3 rho + pi/|b| + pi/|c|`, `T = 4 rho + pi/|b| + pi/|c|`.

use std::convert::Infallible;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Matrix2, Matrix3};

use crate::error::{Error, Result};
use crate::integrator;

/// Twice-differentiable-in-spirit ramp: 0 below 0, 1 above 1,
/// `(1 - cos(pi t)) / 2` in between.
pub fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        0.5 * (1.0 - (PI * t).cos())
    }
}

/// The planar generator `E`.
pub fn quarter_turn() -> Matrix2<f64> {
    Matrix2::new(0.0, 1.0, -1.0, 0.0)
}

/// Largest admissible (exclusive) blend time for the spatial schedule.
pub fn max_blend_time(b: f64, c: f64) -> f64 {
    1.0 / (4.0 * (b.abs() + c.abs()))
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScheduleKind {
    /// `A(t) = aE`.
    Planar { a: f64 },
    /// Blended switching between `B = 0 ⊕ bE` and `C = cE ⊕ 0`.
    Spatial { b: f64, c: f64, rho: f64 },
    /// A fixed 3x3 skew matrix. Always singular, so never persistently
    /// spanning; only useful as a negative example.
    ConstantSpatial(Matrix3<f64>),
}

/// Immutable, periodic, skew-symmetric matrix function of time.
#[derive(Debug, Clone, PartialEq)]
pub struct RotationSchedule {
    kind: ScheduleKind,
    period: f64,
    breakpoints: Option<[f64; 6]>,
}

impl RotationSchedule {
    pub fn planar(a: f64) -> Result<Self> {
        if a == 0.0 || !a.is_finite() {
            return Err(Error::ZeroRate);
        }
        Ok(Self {
            kind: ScheduleKind::Planar { a },
            period: 2.0 * PI / a.abs(),
            breakpoints: None,
        })
    }

    pub fn spatial(b: f64, c: f64, rho: f64) -> Result<Self> {
        if b == 0.0 || c == 0.0 || !b.is_finite() || !c.is_finite() {
            return Err(Error::ZeroRate);
        }
        let bound = max_blend_time(b, c);
        if !(rho > 0.0 && rho < bound) {
            return Err(Error::RhoOutOfRange { rho, bound });
        }
        let half_b = PI / b.abs();
        let half_c = PI / c.abs();
        let bp = [
            rho,
            rho + half_b,
            2.0 * rho + half_b,
            3.0 * rho + half_b,
            3.0 * rho + half_b + half_c,
            4.0 * rho + half_b + half_c,
        ];
        Ok(Self {
            kind: ScheduleKind::Spatial { b, c, rho },
            period: bp[5],
            breakpoints: Some(bp),
        })
    }

    /// `b = c = 1` with `rho` at the middle of its admissible range.
    pub fn default_spatial() -> Self {
        Self::spatial(1.0, 1.0, 0.5 * max_blend_time(1.0, 1.0)).expect("default spatial parameters are admissible")
    }

    /// A constant skew schedule. `nominal_period` only sets analysis windows.
    pub fn constant_spatial(m: Matrix3<f64>, nominal_period: f64) -> Result<Self> {
        if m != -m.transpose() {
            return Err(Error::ConfigInvalid(
                "constant schedule matrix is not skew-symmetric".into(),
            ));
        }
        if nominal_period.is_nan() || nominal_period <= 0.0 {
            return Err(Error::ConfigInvalid("nominal period must be positive".into()));
        }
        Ok(Self {
            kind: ScheduleKind::ConstantSpatial(m),
            period: nominal_period,
            breakpoints: None,
        })
    }

    pub fn kind(&self) -> &ScheduleKind {
        &self.kind
    }

    pub fn dimension(&self) -> usize {
        match self.kind {
            ScheduleKind::Planar { .. } => 2,
            _ => 3,
        }
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    /// `[T1, .., T6]` for the spatial schedule.
    pub fn breakpoints(&self) -> Option<[f64; 6]> {
        self.breakpoints
    }

    /// Whether the schedule meets the persistent-spanning requirement and may
    /// drive the closed loop.
    pub fn is_admissible(&self) -> bool {
        !matches!(self.kind, ScheduleKind::ConstantSpatial(_))
    }

    /// Position of `t` within its period, `t - floor(t / T) T`.
    pub fn phase(&self, t: f64) -> f64 {
        let r = t - (t / self.period).floor() * self.period;
        r.clamp(0.0, self.period)
    }

    /// Evaluate `A(t)`. The result is skew-symmetric bit for bit.
    pub fn eval(&self, t: f64) -> DMatrix<f64> {
        match &self.kind {
            ScheduleKind::Planar { a } => {
                let m = quarter_turn() * *a;
                DMatrix::from_iterator(2, 2, m.iter().copied())
            }
            ScheduleKind::ConstantSpatial(m) => DMatrix::from_iterator(3, 3, m.iter().copied()),
            ScheduleKind::Spatial { b, c, rho } => {
                let bp = self.breakpoints.expect("spatial schedule has breakpoints");
                let r = self.phase(t);
                let (weight, on_b) = if r <= bp[0] {
                    (smooth_step(r / rho), true)
                } else if r <= bp[1] {
                    (1.0, true)
                } else if r <= bp[2] {
                    (1.0 - smooth_step((r - bp[1]) / rho), true)
                } else if r <= bp[3] {
                    (smooth_step((r - bp[2]) / rho), false)
                } else if r <= bp[4] {
                    (1.0, false)
                } else {
                    (1.0 - smooth_step((r - bp[4]) / rho), false)
                };
                let mut m = DMatrix::zeros(3, 3);
                if on_b {
                    let s = weight * b;
                    m[(1, 2)] = s;
                    m[(2, 1)] = -s;
                } else {
                    let s = weight * c;
                    m[(0, 1)] = s;
                    m[(1, 0)] = -s;
                }
                m
            }
        }
    }

    /// Numerical state transition matrix `Phi(t1, t0)` of `y' = A(t) y`,
    /// integrated with fixed-step RK4 from the identity.
    pub fn transition_matrix(&self, t0: f64, t1: f64, dt: f64) -> DMatrix<f64> {
        let n = self.dimension();
        let phi0 = DVector::from_iterator(n * n, DMatrix::<f64>::identity(n, n).iter().copied());
        let phi = integrator::integrate(t0, t1, phi0, dt, |t, flat: &DVector<f64>| {
            let phi = DMatrix::from_column_slice(n, n, flat.as_slice());
            let dphi = self.eval(t) * phi;
            Ok::<_, Infallible>(DVector::from_column_slice(dphi.as_slice()))
        })
        .unwrap_or_else(|never| match never {});
        DMatrix::from_column_slice(n, n, phi.as_slice())
    }
}
