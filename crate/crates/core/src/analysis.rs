//! Numerical certification of the closed loop's provable properties on
//! recorded trajectories.
//!
//! Everything here is read-only over a [`Trajectory`] (or a schedule) and
//! reports measured quantities; pass/fail thresholds live in
//! [`crate::verify`].

use std::convert::Infallible;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::config::{LoopParams, ScheduleSpec};
use crate::error::{Error, Result};
use crate::estimation::{FilterOutputs, FilterState};
use crate::integrator;
use crate::schedule::RotationSchedule;
use crate::simulation::{SystemState, Trajectory};

/// Values at or below this are treated as zero by the decay fit.
pub const DECAY_CLIP: f64 = 1e-300;
/// Fraction of the fitted segment dropped at the start.
pub const FIT_HEAD_TRIM: f64 = 0.10;
/// Fraction of the fitted segment dropped at the end.
pub const FIT_TAIL_TRIM: f64 = 0.05;
/// Decay fits stop once the signal falls below this fraction of its peak;
/// beyond that the samples are dominated by rounding.
pub const FIT_RELATIVE_FLOOR: f64 = 1e-9;
/// The transient is over once `|D_hat^2 - d^2| < TRANSIENT_FRACTION d^2`.
pub const TRANSIENT_FRACTION: f64 = 0.01;
/// Orbit comparison starts once estimate and range errors are below this
/// fraction of `d`.
pub const ORBIT_START_TOL: f64 = 1e-4;
/// Scale-free PE floor: minimum eigenvalue relative to the largest observed.
pub const PE_RELATIVE_FLOOR: f64 = 1e-3;

/// Lyapunov function of the closed loop:
///
/// ```text
/// L = p^2 / (4 alpha) + |x_tilde|^2 / (2 gamma) + (D_hat^2 - d^2)^2 / 4
///     + (z1(0) e^{-alpha t})^2 + (z2(0) e^{-alpha t})^2 + (|z3(0)| e^{-alpha t})^2
/// ```
///
/// with `p = eta - m + V.x`.
pub fn lyapunov(
    outputs: &FilterOutputs,
    y: &DVector<f64>,
    x_hat: &DVector<f64>,
    x: &DVector<f64>,
    z0: &FilterState,
    t: f64,
    params: &LoopParams,
) -> f64 {
    let p = outputs.eta - outputs.m + outputs.v.dot(x);
    let xt = (x_hat - x).norm_squared();
    let radial = (y - x_hat).norm_squared() - params.distance * params.distance;
    let fade = (-params.alpha * t).exp();
    let tails = (z0.z1 * fade).powi(2) + (z0.z2 * fade).powi(2) + (z0.z3.norm() * fade).powi(2);
    p * p / (4.0 * params.alpha) + xt / (2.0 * params.gamma) + 0.25 * radial * radial + tails
}

/// Largest one-sample increase of the recorded Lyapunov values.
pub fn lyapunov_max_increase(traj: &Trajectory) -> f64 {
    traj.samples
        .windows(2)
        .map(|w| w[1].lyapunov - w[0].lyapunov)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// A uniformly sampled vector signal.
#[derive(Debug, Clone, Copy)]
pub struct Series<'a> {
    pub t_first: f64,
    pub spacing: f64,
    pub values: &'a [DVector<f64>],
}

impl Series<'_> {
    fn last_time(&self) -> f64 {
        self.t_first + (self.values.len().saturating_sub(1)) as f64 * self.spacing
    }

    fn window_indices(&self, t0: f64, window: f64) -> Result<(usize, usize)> {
        let out_of_range = || Error::WindowOutOfRange {
            start: t0,
            end: t0 + window,
            first: self.t_first,
            last: self.last_time(),
        };
        if self.values.is_empty() || window < 0.0 || t0 < self.t_first - 1e-9 * self.spacing {
            return Err(out_of_range());
        }
        let start = ((t0 - self.t_first) / self.spacing).round() as usize;
        let len = (window / self.spacing).round() as usize;
        if start + len >= self.values.len() {
            return Err(out_of_range());
        }
        Ok((start, len))
    }
}

fn outer(w: &DVector<f64>) -> DMatrix<f64> {
    w * w.transpose()
}

/// Trapezoidal `int_{t0}^{t0 + window} w w^T dt`.
pub fn pe_gram(series: Series<'_>, t0: f64, window: f64) -> Result<DMatrix<f64>> {
    let (start, len) = series.window_indices(t0, window)?;
    let n = series.values[0].len();
    let mut g = DMatrix::zeros(n, n);
    if len == 0 {
        return Ok(g);
    }
    g += outer(&series.values[start]) * 0.5;
    g += outer(&series.values[start + len]) * 0.5;
    for w in &series.values[start + 1..start + len] {
        g += outer(w);
    }
    Ok(g * series.spacing)
}

fn eig_band(g: &DMatrix<f64>) -> (f64, f64) {
    let sym = (g + g.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym).eigenvalues;
    (eig.min(), eig.max())
}

#[derive(Debug, Clone, PartialEq)]
pub struct GramWindow {
    pub t0: f64,
    pub min_eig: f64,
    pub max_eig: f64,
}

/// Eigenvalue bands of sliding-window Gram matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct PEReport {
    pub window: f64,
    pub floor: f64,
    pub windows: Vec<GramWindow>,
    /// Smallest eigenvalue over all reported windows.
    pub alpha_lo: f64,
    /// Largest eigenvalue over all reported windows.
    pub alpha_hi: f64,
    pub passed: bool,
}

impl PEReport {
    /// Re-judge against a different floor.
    pub fn with_floor(mut self, floor: f64) -> Self {
        self.floor = floor;
        self.passed = !self.windows.is_empty() && self.alpha_lo >= floor;
        self
    }
}

/// Slide a window of length `window` over `series`, starting at
/// `start_time` and advancing `stride` samples at a time, and report the
/// Gram eigenvalue bands. Passes iff every window's smallest eigenvalue is
/// at least `floor`.
pub fn certify_pe(series: Series<'_>, window: f64, floor: f64, start_time: f64, stride: usize) -> Result<PEReport> {
    let (first, len) = series.window_indices(start_time, window)?;
    let n = series.values[0].len();
    let h = series.spacing;
    // cumulative trapezoid so each window is a difference of two prefixes
    let mut prefix = Vec::with_capacity(series.values.len());
    let mut acc = DMatrix::zeros(n, n);
    prefix.push(acc.clone());
    let mut prev = outer(&series.values[0]);
    for w in &series.values[1..] {
        let cur = outer(w);
        acc += (&prev + &cur) * (0.5 * h);
        prefix.push(acc.clone());
        prev = cur;
    }
    let stride = stride.max(1);
    let mut windows = Vec::new();
    let mut start = first;
    while start + len < series.values.len() {
        let g = &prefix[start + len] - &prefix[start];
        let (min_eig, max_eig) = eig_band(&g);
        windows.push(GramWindow {
            t0: series.t_first + start as f64 * h,
            min_eig,
            max_eig,
        });
        start += stride;
    }
    let alpha_lo = windows.iter().map(|w| w.min_eig).fold(f64::INFINITY, f64::min);
    let alpha_hi = windows.iter().map(|w| w.max_eig).fold(f64::NEG_INFINITY, f64::max);
    Ok(PEReport {
        window,
        floor,
        windows,
        alpha_lo,
        alpha_hi,
        passed: false,
    }
    .with_floor(floor))
}

/// Least-squares slope of `ln v` against `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    /// Fitted exponential rate (negative for decay), 1/s.
    pub rate: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: usize,
}

pub fn fit_decay_rate(t: &[f64], v: &[f64]) -> Result<DecayFit> {
    let pts: Vec<(f64, f64)> = t
        .iter()
        .zip(v)
        .filter(|(_, &v)| v > DECAY_CLIP && v.is_finite())
        .map(|(&t, &v)| (t, v.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::InsufficientData(pts.len()));
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ml = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let stt = pts.iter().map(|p| (p.0 - mt).powi(2)).sum::<f64>();
    let stl = pts.iter().map(|p| (p.0 - mt) * (p.1 - ml)).sum::<f64>();
    let sll = pts.iter().map(|p| (p.1 - ml).powi(2)).sum::<f64>();
    if stt == 0.0 {
        return Err(Error::InsufficientData(1));
    }
    let rate = stl / stt;
    let intercept = ml - rate * mt;
    let sse = pts.iter().map(|p| (p.1 - intercept - rate * p.0).powi(2)).sum::<f64>();
    let r_squared = if sll == 0.0 { 1.0 } else { 1.0 - sse / sll };
    Ok(DecayFit {
        rate,
        intercept,
        r_squared,
        points: pts.len(),
    })
}

/// Fit over the leading segment where `v` stays above
/// `relative_floor * max(v)`, dropping the first 10% and last 5% of it.
pub fn fit_decay_trimmed(t: &[f64], v: &[f64], relative_floor: f64) -> Result<DecayFit> {
    let peak = v.iter().copied().filter(|x| x.is_finite()).fold(0.0, f64::max);
    let cut = v
        .iter()
        .position(|&x| x.is_nan() || x <= relative_floor * peak)
        .unwrap_or(v.len());
    let head = (cut as f64 * FIT_HEAD_TRIM).floor() as usize;
    let tail = (cut as f64 * FIT_TAIL_TRIM).floor() as usize;
    let end = cut - tail;
    if end <= head {
        return Err(Error::InsufficientData(0));
    }
    fit_decay_rate(&t[head..end], &v[head..end])
}

/// Distances to the invariant set: `(|x_hat - x|, ||y - x| - d|,
/// |z1 - z2 + z3.x - |x|^2 / (2 alpha)|)`.
pub fn invariant_set_residual(s: &SystemState, x: &DVector<f64>, alpha: f64, d: f64) -> (f64, f64, f64) {
    let f = &s.filters;
    (
        (&s.x_hat - x).norm(),
        ((&s.y - x).norm() - d).abs(),
        (f.z1 - f.z2 + f.z3.dot(x) - x.dot(x) / (2.0 * alpha)).abs(),
    )
}

/// Frobenius norm of `Phi^T Phi - I` over `[t0, t1]`.
pub fn orthogonality_defect(schedule: &RotationSchedule, t0: f64, t1: f64, dt: f64) -> f64 {
    let phi = schedule.transition_matrix(t0, t1, dt);
    let n = phi.nrows();
    (phi.transpose() * &phi - DMatrix::identity(n, n)).norm()
}

/// Largest `|v^T A(t) v|` over the given probe times and vectors.
pub fn skew_defect(schedule: &RotationSchedule, times: &[f64], probes: &[DVector<f64>]) -> f64 {
    let mut worst: f64 = 0.0;
    for &t in times {
        let a = schedule.eval(t);
        for v in probes {
            worst = worst.max(v.dot(&(&a * v)).abs());
        }
    }
    worst
}

/// Sampled solution of the free rotation `y' = A(t) y`.
#[derive(Debug, Clone, PartialEq)]
pub struct FreeRotation {
    pub t_first: f64,
    pub spacing: f64,
    pub y: Vec<DVector<f64>>,
    pub y_dot: Vec<DVector<f64>>,
}

impl FreeRotation {
    pub fn velocity_series(&self) -> Series<'_> {
        Series {
            t_first: self.t_first,
            spacing: self.spacing,
            values: &self.y_dot,
        }
    }
}

/// Integrate `y' = A(t) y` from `y0` at `t0` for `duration` with step `dt`,
/// recording every step.
pub fn free_rotation(schedule: &RotationSchedule, y0: &DVector<f64>, t0: f64, duration: f64, dt: f64) -> FreeRotation {
    let steps = integrator::step_count(duration, dt);
    let mut y = Vec::with_capacity(steps + 1);
    let mut y_dot = Vec::with_capacity(steps + 1);
    let mut cur = y0.clone();
    for k in 0..=steps {
        let t = t0 + k as f64 * dt;
        y_dot.push(schedule.eval(t) * &cur);
        y.push(cur.clone());
        if k < steps {
            cur = integrator::rk4_step(t, &cur, dt, |t, v: &DVector<f64>| {
                Ok::<_, Infallible>(schedule.eval(t) * v)
            })
            .unwrap_or_else(|never| match never {});
        }
    }
    FreeRotation {
        t_first: t0,
        spacing: dt,
        y,
        y_dot,
    }
}

/// First time `|D_hat^2 - d^2| < TRANSIENT_FRACTION d^2`.
pub fn transient_end(traj: &Trajectory) -> Option<f64> {
    let d2 = traj.config.params.distance.powi(2);
    traj.samples
        .iter()
        .find(|s| (s.d_hat * s.d_hat - d2).abs() < TRANSIENT_FRACTION * d2)
        .map(|s| s.t)
}

/// First time both `|x_tilde|` and `|D_hat - d|` are below `tol * d`.
pub fn convergence_time(traj: &Trajectory, tol: f64) -> Option<f64> {
    let d = traj.config.params.distance;
    traj.samples
        .iter()
        .find(|s| s.xtilde_norm < tol * d && (s.d_hat - d).abs() < tol * d)
        .map(|s| s.t)
}

/// Max over `t >= from` of `|y(t) - x - y*(t)|`, where `y*` solves the free
/// rotation from `y*(from) = d (y(from) - x) / |y(from) - x|`.
pub fn orbit_tracking_error(traj: &Trajectory, from: f64) -> f64 {
    let k0 = traj.index_at(from);
    let s0 = &traj.samples[k0];
    let d = traj.config.params.distance;
    let rel = &s0.y - &s0.source;
    let mut ystar = &rel * (d / rel.norm());
    let step = traj.config.dt.min(traj.spacing);
    let mut worst: f64 = 0.0;
    for w in traj.samples[k0..].windows(2) {
        let err = (&w[0].y - &w[0].source - &ystar).norm();
        worst = worst.max(err);
        ystar = integrator::integrate(w[0].t, w[1].t, ystar, step, |t, v: &DVector<f64>| {
            Ok::<_, Infallible>(traj.schedule.eval(t) * v)
        })
        .unwrap_or_else(|never| match never {});
    }
    let last = traj.last();
    worst.max((&last.y - &last.source - &ystar).norm())
}

/// `max_t |y| + |y'| + |y''|`, with `y''` from central differences of the
/// recorded velocity.
pub fn motion_bound(traj: &Trajectory) -> f64 {
    let s = &traj.samples;
    let h = traj.spacing;
    let mut worst: f64 = 0.0;
    for k in 0..s.len() {
        let acc = if s.len() < 3 {
            0.0
        } else if k == 0 {
            (&s[1].velocity - &s[0].velocity).norm() / h
        } else if k + 1 == s.len() {
            (&s[k].velocity - &s[k - 1].velocity).norm() / h
        } else {
            (&s[k + 1].velocity - &s[k - 1].velocity).norm() / (2.0 * h)
        };
        worst = worst.max(s[k].y.norm() + s[k].velocity.norm() + acc);
    }
    worst
}

/// Mean agent speed over samples at or after `from`.
pub fn mean_speed(traj: &Trajectory, from: f64) -> f64 {
    let k0 = traj.index_at(from);
    let tail = &traj.samples[k0..];
    tail.iter().map(|s| s.velocity.norm()).sum::<f64>() / tail.len() as f64
}

/// Window and floor for the agent-velocity PE check, when an analytic orbit
/// value is known (planar schedules): the asymptotic orbit is a circle of
/// radius `d` traversed at speed `s` with period `P`, whose Gram over one
/// period is `s^2 P / 2 I`; the floor is half of that.
pub fn planar_velocity_pe(params: &LoopParams, spec: &ScheduleSpec) -> Option<(f64, f64)> {
    let ScheduleSpec::Planar { a } = *spec else {
        return None;
    };
    let d = params.distance;
    let (speed, period) = if params.normalize {
        (1.0, 2.0 * std::f64::consts::PI * d)
    } else {
        (a.abs() * d, 2.0 * std::f64::consts::PI / a.abs())
    };
    Some((period, 0.5 * speed * speed * period / 2.0))
}

/// Aggregate of every trajectory-level measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisReport {
    pub lyapunov_max_increase: f64,
    pub residual_decay: Option<DecayFit>,
    pub xtilde_decay: Option<DecayFit>,
    /// Fit of `|D_hat^2 - d^2|`.
    pub dhat_decay: Option<DecayFit>,
    /// Fit of `|D - d|`.
    pub dist_decay: Option<DecayFit>,
    pub dhat_sq_min: f64,
    pub dhat_floor: f64,
    pub dhat_floor_ok: bool,
    pub transient_end: Option<f64>,
    pub pe_y: Option<PEReport>,
    pub pe_v: Option<PEReport>,
    pub final_dist_error: f64,
    pub final_xtilde: f64,
    /// Max `|D - d| / d` over the second half of the run.
    pub max_rel_dist_error_tail: f64,
    /// Mean `D` over the second half of the run.
    pub mean_dist_tail: f64,
    pub invariant_residual: (f64, f64, f64),
    pub orbit_tracking_error: Option<f64>,
    pub motion_bound: f64,
    pub mean_agent_speed: f64,
    pub source_speed: f64,
}

impl AnalysisReport {
    pub fn residual_decay_rate(&self) -> f64 {
        self.residual_decay.map_or(f64::NAN, |f| f.rate)
    }

    pub fn xtilde_decay_rate(&self) -> f64 {
        self.xtilde_decay.map_or(f64::NAN, |f| f.rate)
    }

    pub fn dist_decay_rate(&self) -> f64 {
        self.dist_decay.map_or(f64::NAN, |f| f.rate)
    }
}

pub fn analyze(traj: &Trajectory) -> AnalysisReport {
    let cfg = &traj.config;
    let params = &cfg.params;
    let d = params.distance;
    let d2 = d * d;
    let t = traj.times();
    let s = &traj.samples;

    let abs_series = |f: &dyn Fn(&crate::simulation::Sample) -> f64| s.iter().map(|x| f(x).abs()).collect::<Vec<_>>();
    let residual = abs_series(&|x| x.residual());
    let xtilde = abs_series(&|x| x.xtilde_norm);
    let dhat = abs_series(&|x| x.d_hat * x.d_hat - d2);
    let dist = abs_series(&|x| x.d_true - d);

    let dhat_sq_min = s.iter().map(|x| x.d_hat * x.d_hat).fold(f64::INFINITY, f64::min);
    let dhat_floor = (s[0].d_hat * s[0].d_hat).min(d2);

    let transient = transient_end(traj);
    let post = transient.unwrap_or(f64::INFINITY);
    let tail = &s[s.len() / 2..];
    let max_rel_dist_error_tail = tail.iter().map(|x| (x.d_true - d).abs() / d).fold(0.0, f64::max);
    let mean_dist_tail = tail.iter().map(|x| x.d_true).sum::<f64>() / tail.len() as f64;

    let velocities: Vec<DVector<f64>> = s.iter().map(|x| x.velocity.clone()).collect();
    let regressors: Vec<DVector<f64>> = s.iter().map(|x| x.outputs.v.clone()).collect();
    let series = |values| Series {
        t_first: s[0].t,
        spacing: traj.spacing,
        values,
    };
    let (window, y_floor) = match planar_velocity_pe(params, &cfg.schedule) {
        Some((w, f)) => (w, Some(f)),
        None => (traj.schedule.period(), None),
    };
    let stride = ((window / traj.spacing) as usize / 16).max(1);
    let relative = |r: PEReport| {
        let floor = PE_RELATIVE_FLOOR * r.alpha_hi;
        r.with_floor(floor)
    };
    let pe_y = transient
        .and_then(|t0| certify_pe(series(&velocities), window, y_floor.unwrap_or(0.0), t0, stride).ok())
        .map(|r| if y_floor.is_some() { r } else { relative(r) });
    let pe_v = transient
        .and_then(|t0| certify_pe(series(&regressors), window, 0.0, t0, stride).ok())
        .map(relative);

    let last = traj.last();
    let orbit = if params.normalize {
        None
    } else {
        convergence_time(traj, ORBIT_START_TOL).map(|from| orbit_tracking_error(traj, from))
    };

    AnalysisReport {
        lyapunov_max_increase: lyapunov_max_increase(traj),
        residual_decay: fit_decay_trimmed(&t, &residual, FIT_RELATIVE_FLOOR).ok(),
        xtilde_decay: fit_decay_trimmed(&t, &xtilde, FIT_RELATIVE_FLOOR).ok(),
        dhat_decay: fit_decay_trimmed(&t, &dhat, FIT_RELATIVE_FLOOR).ok(),
        dist_decay: fit_decay_trimmed(&t, &dist, FIT_RELATIVE_FLOOR).ok(),
        dhat_sq_min,
        dhat_floor,
        dhat_floor_ok: dhat_sq_min > dhat_floor - 1e-9,
        transient_end: transient,
        pe_y,
        pe_v,
        final_dist_error: (last.d_true - d).abs(),
        final_xtilde: last.xtilde_norm,
        max_rel_dist_error_tail,
        mean_dist_tail,
        invariant_residual: invariant_set_residual(&last.state(), &last.source, params.alpha, d),
        orbit_tracking_error: orbit,
        motion_bound: motion_bound(traj),
        mean_agent_speed: mean_speed(traj, post.min(last.t)),
        source_speed: cfg.source.speed(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(xs)
    }

    fn params() -> LoopParams {
        LoopParams {
            alpha: 1.0,
            gamma: 10.0,
            distance: 2.0,
            normalize: false,
        }
    }

    #[test]
    fn lyapunov_vanishes_on_invariant_set() {
        let x = v(&[0.5, 3.0]);
        let out = FilterOutputs {
            eta: 2.0,
            m: 2.0 + x.dot(&x) - x.dot(&x),
            v: v(&[0.0, 0.0]),
        };
        let l = lyapunov(
            &out,
            &(&x + v(&[2.0, 0.0])),
            &x,
            &x,
            &FilterState::zeros(2),
            3.0,
            &params(),
        );
        assert_eq!(l, 0.0);
    }

    #[test]
    fn lyapunov_estimate_term() {
        let x = v(&[0.0, 0.0]);
        let out = FilterOutputs {
            eta: 0.0,
            m: 0.0,
            v: v(&[0.0, 0.0]),
        };
        let l = lyapunov(
            &out,
            &v(&[3.0, 0.0]),
            &v(&[1.0, 0.0]),
            &x,
            &FilterState::zeros(2),
            0.0,
            &params(),
        );
        assert_relative_eq!(l, 0.05);
    }

    #[test]
    fn lyapunov_filter_tails_decay() {
        let x = v(&[0.0, 0.0]);
        let out = FilterOutputs {
            eta: 0.0,
            m: 0.0,
            v: v(&[0.0, 0.0]),
        };
        let z0 = FilterState {
            z1: 1.0,
            z2: 2.0,
            z3: v(&[3.0, 4.0]),
        };
        let at = |t| lyapunov(&out, &v(&[2.0, 0.0]), &x, &x, &z0, t, &params());
        assert_relative_eq!(at(0.0), 1.0 + 4.0 + 25.0);
        assert_relative_eq!(at(1.0), 30.0 * (-2.0f64).exp(), epsilon = 1e-12);
    }

    #[test]
    fn gram_of_zero_signal_is_zero() {
        let values = vec![DVector::zeros(2); 101];
        let g = pe_gram(
            Series {
                t_first: 0.0,
                spacing: 0.01,
                values: &values,
            },
            0.0,
            1.0,
        )
        .unwrap();
        assert_eq!(g, DMatrix::zeros(2, 2));
    }

    #[test]
    fn gram_of_constant_signal() {
        let values = vec![v(&[1.0, 2.0]); 201];
        let series = Series {
            t_first: 0.0,
            spacing: 0.01,
            values: &values,
        };
        let g = pe_gram(series, 0.5, 1.0).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!((g - expected).norm() < 1e-12);
        assert!(matches!(pe_gram(series, 1.5, 1.0), Err(Error::WindowOutOfRange { .. })));
        assert!(matches!(
            pe_gram(series, -0.5, 1.0),
            Err(Error::WindowOutOfRange { .. })
        ));
    }

    #[test]
    fn sliding_windows_match_direct_quadrature() {
        let values: Vec<_> = (0..500)
            .map(|k| {
                let t = k as f64 * 0.02;
                v(&[t.sin(), (2.0 * t).cos(), 0.3])
            })
            .collect();
        let series = Series {
            t_first: 1.0,
            spacing: 0.02,
            values: &values,
        };
        let report = certify_pe(series, 3.0, 0.0, 2.0, 7).unwrap();
        for w in &report.windows {
            let (lo, hi) = eig_band(&pe_gram(series, w.t0, 3.0).unwrap());
            assert_relative_eq!(w.min_eig, lo, epsilon = 1e-10);
            assert_relative_eq!(w.max_eig, hi, epsilon = 1e-10);
        }
        assert!(report.alpha_lo <= report.alpha_hi);
    }

    #[test]
    fn decay_fit_exact_exponential() {
        let t: Vec<f64> = (0..100).map(|k| k as f64 * 0.05).collect();
        let v: Vec<f64> = t.iter().map(|t| 3.0 * (-2.0 * t).exp()).collect();
        let fit = fit_decay_rate(&t, &v).unwrap();
        assert_relative_eq!(fit.rate, -2.0, epsilon = 1e-12);
        assert_relative_eq!(fit.r_squared, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn decay_fit_constant_and_short_series() {
        let t = [0.0, 1.0, 2.0, 3.0];
        let fit = fit_decay_rate(&t, &[5.0; 4]).unwrap();
        assert_eq!(fit.rate, 0.0);
        assert!(matches!(
            fit_decay_rate(&t, &[1.0, 0.0, 0.0, 1.0]),
            Err(Error::InsufficientData(2))
        ));
    }

    #[test]
    fn trimmed_fit_stops_at_floor() {
        let t: Vec<f64> = (0..1000).map(|k| k as f64 * 0.05).collect();
        // decays to 1e-12, then flat rounding noise
        let v: Vec<f64> = t.iter().map(|t| (-t).exp().max(1e-12)).collect();
        let fit = fit_decay_trimmed(&t, &v, 1e-9).unwrap();
        assert_relative_eq!(fit.rate, -1.0, epsilon = 1e-9);
        let naive = fit_decay_rate(&t, &v).unwrap();
        assert!(naive.rate > -0.9);
    }

    #[test]
    fn invariant_residual_examples() {
        let x = v(&[0.5, 3.0]);
        let on_set = SystemState {
            t: 0.0,
            y: &x + v(&[0.0, 2.0]),
            x_hat: x.clone(),
            filters: FilterState {
                z1: x.dot(&x) / 2.0,
                z2: 0.0,
                z3: v(&[0.0, 0.0]),
            },
        };
        assert_eq!(invariant_set_residual(&on_set, &x, 1.0, 2.0), (0.0, 0.0, 0.0));

        let start = SystemState {
            t: 0.0,
            y: v(&[8.0, 5.0]),
            x_hat: v(&[0.0, 0.0]),
            filters: FilterState::zeros(2),
        };
        let (a, b, c) = invariant_set_residual(&start, &x, 1.0, 2.0);
        assert_relative_eq!(a, 9.25f64.sqrt());
        assert_relative_eq!(b, 60.25f64.sqrt() - 2.0);
        assert_relative_eq!(c, 4.625);
    }

    #[test]
    fn orthogonality_defect_zero_interval() {
        let s = RotationSchedule::planar(1.0).unwrap();
        assert_eq!(orthogonality_defect(&s, 2.0, 2.0, 1e-3), 0.0);
    }

    #[test]
    fn free_rotation_preserves_norm() {
        let s = RotationSchedule::spatial(1.0, 2.0, 0.05).unwrap();
        let rot = free_rotation(&s, &v(&[0.3, -1.0, 2.0]), 0.0, s.period(), 1e-3);
        let n0 = rot.y[0].norm();
        for y in &rot.y {
            assert!((y.norm() - n0).abs() < 1e-10);
        }
    }

    #[test]
    fn planar_pe_window_and_floor() {
        let (w, f) = planar_velocity_pe(&params(), &ScheduleSpec::Planar { a: 1.0 }).unwrap();
        assert_relative_eq!(w, 2.0 * PI);
        assert_relative_eq!(f, 0.5 * PI * 4.0);
        assert!(planar_velocity_pe(
            &params(),
            &ScheduleSpec::Spatial {
                b: 1.0,
                c: 1.0,
                rho: 0.1
            }
        )
        .is_none());
    }
}
