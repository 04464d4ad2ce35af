//! Closed-loop simulation: source motion, range measurement, the coupled
//! ODE and its fixed-step integration into a [`Trajectory`].

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::analysis;
use crate::config::{LoopParams, ScenarioConfig};
use crate::error::{Error, Result};
use crate::estimation::{self, FilterOutputs, FilterState};
use crate::guidance;
use crate::integrator;
use crate::schedule::RotationSchedule;

/// Any state component beyond this norm aborts the run.
pub const BLOWUP_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub enum SourceModel {
    Stationary(DVector<f64>),
    /// Moves on a circle in the first two coordinates:
    /// `x(t) = center + radius [cos(omega t + phase), sin(omega t + phase), 0]`.
    CircularDrift {
        center: DVector<f64>,
        radius: f64,
        omega: f64,
        phase: f64,
    },
}

impl SourceModel {
    pub fn position(&self, t: f64) -> DVector<f64> {
        match self {
            SourceModel::Stationary(x) => x.clone(),
            SourceModel::CircularDrift {
                center,
                radius,
                omega,
                phase,
            } => {
                let (s, c) = (omega * t + phase).sin_cos();
                let mut x = center.clone();
                x[0] += radius * c;
                x[1] += radius * s;
                x
            }
        }
    }

    pub fn dimension(&self) -> usize {
        match self {
            SourceModel::Stationary(x) => x.len(),
            SourceModel::CircularDrift { center, .. } => center.len(),
        }
    }

    pub fn is_stationary(&self) -> bool {
        match self {
            SourceModel::Stationary(_) => true,
            SourceModel::CircularDrift { radius, omega, .. } => *radius == 0.0 || *omega == 0.0,
        }
    }

    /// Source speed (constant for both models).
    pub fn speed(&self) -> f64 {
        match self {
            SourceModel::Stationary(_) => 0.0,
            SourceModel::CircularDrift { radius, omega, .. } => radius * omega.abs(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseModel {
    None,
    /// `ln D_meas = ln D + mu`, `mu ~ N(0, sigma^2)`.
    LogNormal {
        sigma: f64,
        seed: u64,
    },
}

/// Draws the per-step log-noise `mu`. Deterministic for a given seed.
#[derive(Debug, Clone)]
pub struct NoiseSampler {
    inner: Option<(ChaCha8Rng, Normal<f64>)>,
}

impl NoiseSampler {
    pub fn new(model: &NoiseModel) -> Result<Self> {
        let inner = match *model {
            NoiseModel::None => None,
            NoiseModel::LogNormal { sigma, seed } => {
                let normal = Normal::new(0.0, sigma).map_err(|e| Error::ConfigInvalid(format!("noise.sigma: {e}")))?;
                Some((ChaCha8Rng::seed_from_u64(seed), normal))
            }
        };
        Ok(Self { inner })
    }

    /// `None` for noiseless measurement, otherwise the next `mu`.
    pub fn draw(&mut self) -> Option<f64> {
        self.inner.as_mut().map(|(rng, normal)| normal.sample(rng))
    }
}

/// Range from `y` to the source at time `t`, with the held log-noise `mu`
/// applied multiplicatively when present.
pub fn measure(src: &SourceModel, y: &DVector<f64>, t: f64, log_noise: Option<f64>) -> Result<f64> {
    let range = (y - src.position(t)).norm();
    match log_noise {
        None => Ok(range),
        Some(_) if range == 0.0 => Err(Error::DegenerateMeasurement),
        Some(mu) => Ok(range * mu.exp()),
    }
}

/// Full closed-loop state.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemState {
    pub t: f64,
    pub y: DVector<f64>,
    pub x_hat: DVector<f64>,
    pub filters: FilterState,
}

impl SystemState {
    pub fn initial(cfg: &ScenarioConfig) -> Self {
        Self {
            t: 0.0,
            y: cfg.y0.clone(),
            x_hat: cfg.x_hat0.clone(),
            filters: cfg.filters0.clone(),
        }
    }

    pub fn dimension(&self) -> usize {
        self.y.len()
    }

    /// Layout: `[y, x_hat, z1, z2, z3]`.
    pub fn to_vector(&self) -> DVector<f64> {
        let n = self.dimension();
        let mut v = DVector::zeros(3 * n + 2);
        v.rows_mut(0, n).copy_from(&self.y);
        v.rows_mut(n, n).copy_from(&self.x_hat);
        v[2 * n] = self.filters.z1;
        v[2 * n + 1] = self.filters.z2;
        v.rows_mut(2 * n + 2, n).copy_from(&self.filters.z3);
        v
    }

    pub fn from_vector(t: f64, v: &DVector<f64>) -> Result<Self> {
        if v.len() < 8 || !(v.len() - 2).is_multiple_of(3) {
            return Err(Error::DimensionMismatch {
                expected: 8,
                got: v.len(),
            });
        }
        let n = (v.len() - 2) / 3;
        Ok(Self {
            t,
            y: v.rows(0, n).into_owned(),
            x_hat: v.rows(n, n).into_owned(),
            filters: FilterState {
                z1: v[2 * n],
                z2: v[2 * n + 1],
                z3: v.rows(2 * n + 2, n).into_owned(),
            },
        })
    }
}

/// Time derivative of every state component plus the intermediate signals.
#[derive(Debug, Clone, PartialEq)]
pub struct StateDerivative {
    pub y_dot: DVector<f64>,
    pub x_hat_dot: DVector<f64>,
    pub outputs: FilterOutputs,
    pub raw_velocity: DVector<f64>,
}

impl StateDerivative {
    /// Same layout as [`SystemState::to_vector`].
    pub fn to_vector(&self) -> DVector<f64> {
        let n = self.y_dot.len();
        let mut v = DVector::zeros(3 * n + 2);
        v.rows_mut(0, n).copy_from(&self.y_dot);
        v.rows_mut(n, n).copy_from(&self.x_hat_dot);
        v[2 * n] = self.outputs.eta;
        v[2 * n + 1] = self.outputs.m;
        v.rows_mut(2 * n + 2, n).copy_from(&self.outputs.v);
        v
    }
}

/// Assemble the coupled right-hand side for a given range reading.
pub fn system_derivative(
    s: &SystemState,
    range: f64,
    schedule: &RotationSchedule,
    params: &LoopParams,
) -> Result<StateDerivative> {
    if schedule.dimension() != s.dimension() {
        return Err(Error::DimensionMismatch {
            expected: schedule.dimension(),
            got: s.dimension(),
        });
    }
    let outputs = estimation::filter_outputs(&s.filters, range, &s.y, params.alpha)?;
    let x_hat_dot = estimation::estimator_derivative(&s.x_hat, &outputs, params.gamma)?;
    let cmd = guidance::command(
        &s.y,
        &s.x_hat,
        &x_hat_dot,
        &schedule.eval(s.t),
        params.distance,
        params.normalize,
    );
    Ok(StateDerivative {
        y_dot: cmd.velocity,
        x_hat_dot,
        outputs,
        raw_velocity: cmd.raw_velocity,
    })
}

/// One recorded point of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub y: DVector<f64>,
    pub x_hat: DVector<f64>,
    pub filters: FilterState,
    /// True source position.
    pub source: DVector<f64>,
    pub d_true: f64,
    pub d_measured: f64,
    pub d_hat: f64,
    pub xtilde_norm: f64,
    pub lyapunov: f64,
    /// Applied agent velocity.
    pub velocity: DVector<f64>,
    pub x_hat_velocity: DVector<f64>,
    pub outputs: FilterOutputs,
}

impl Sample {
    /// `eta - m + V.x` at the true source position.
    pub fn residual(&self) -> f64 {
        estimation::residual(&self.outputs, &self.source)
    }

    pub fn state(&self) -> SystemState {
        SystemState {
            t: self.t,
            y: self.y.clone(),
            x_hat: self.x_hat.clone(),
            filters: self.filters.clone(),
        }
    }
}

/// A recorded run with uniform sample spacing.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub config: ScenarioConfig,
    pub schedule: RotationSchedule,
    /// Time between consecutive samples.
    pub spacing: f64,
    pub samples: Vec<Sample>,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn last(&self) -> &Sample {
        self.samples.last().expect("trajectories hold at least one sample")
    }

    /// Index of the first sample at or after `t`.
    pub fn index_at(&self, t: f64) -> usize {
        let first = self.samples[0].t;
        let k = ((t - first) / self.spacing - 1e-9).ceil().max(0.0) as usize;
        k.min(self.samples.len() - 1)
    }
}

fn check_blowup(x: &DVector<f64>, t: f64) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) && x.amax() <= BLOWUP_LIMIT {
        Ok(())
    } else {
        Err(Error::NumericalBlowup { t, limit: BLOWUP_LIMIT })
    }
}

/// Integrate the closed loop described by `cfg` with fixed-step RK4.
///
/// The log-noise is drawn once per step and held across the RK4 stages; the
/// true range is re-evaluated at every stage.
pub fn simulate(cfg: &ScenarioConfig) -> Result<Trajectory> {
    cfg.validate()?;
    let schedule = cfg.schedule.build()?;
    let mut sampler = NoiseSampler::new(&cfg.noise)?;
    let steps = integrator::step_count(cfg.duration, cfg.dt);
    let params = cfg.params;

    let rhs = |mu: Option<f64>| {
        let schedule = &schedule;
        move |t: f64, v: &DVector<f64>| -> Result<DVector<f64>> {
            let s = SystemState::from_vector(t, v)?;
            let range = measure(&cfg.source, &s.y, t, mu)?;
            Ok(system_derivative(&s, range, schedule, &params)?.to_vector())
        }
    };

    let record = |t: f64, v: &DVector<f64>, mu: Option<f64>| -> Result<Sample> {
        let s = SystemState::from_vector(t, v)?;
        let source = cfg.source.position(t);
        let d_true = (&s.y - &source).norm();
        let d_measured = measure(&cfg.source, &s.y, t, mu)?;
        let der = system_derivative(&s, d_measured, &schedule, &params)?;
        let lyapunov = analysis::lyapunov(&der.outputs, &s.y, &s.x_hat, &source, &cfg.filters0, t, &params);
        Ok(Sample {
            t,
            d_true,
            d_measured,
            d_hat: guidance::d_hat(&s.y, &s.x_hat),
            xtilde_norm: (&s.x_hat - &source).norm(),
            lyapunov,
            velocity: der.y_dot,
            x_hat_velocity: der.x_hat_dot,
            outputs: der.outputs,
            source,
            y: s.y,
            x_hat: s.x_hat,
            filters: s.filters,
        })
    };

    let mut x = SystemState::initial(cfg).to_vector();
    let mut samples = Vec::with_capacity(steps / cfg.sample_every + 1);
    for k in 0..steps {
        let t = k as f64 * cfg.dt;
        let mu = sampler.draw();
        if k.is_multiple_of(cfg.sample_every) {
            samples.push(record(t, &x, mu)?);
        }
        x = integrator::rk4_step(t, &x, cfg.dt, rhs(mu))?;
        check_blowup(&x, t + cfg.dt)?;
    }
    if steps.is_multiple_of(cfg.sample_every) {
        let mu = sampler.draw();
        samples.push(record(steps as f64 * cfg.dt, &x, mu)?);
    }

    Ok(Trajectory {
        config: cfg.clone(),
        schedule,
        spacing: cfg.dt * cfg.sample_every as f64,
        samples,
    })
}
