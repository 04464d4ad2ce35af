//! Scenario configuration.
//!
//! Configs are flat `key = value` text with dotted section names. Blank lines
//! and `#` comments are ignored; vectors are comma separated. Keys that are
//! absent fall back to the baseline planar scenario.
//!
//! ```text
//! dimension = 2
//! source.kind = stationary          # or circular_drift
//! source.position = 0.5, 3
//! target.distance = 2
//! gains.alpha = 1
//! gains.gamma = 10
//! schedule.kind = planar            # or spatial
//! schedule.a = 1
//! initial.y = 8, 5
//! integrator.dt = 0.001
//! integrator.duration = 60
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::estimation::FilterState;
use crate::guidance::MIN_INITIAL_RANGE;
use crate::schedule::{max_blend_time, RotationSchedule};
use crate::simulation::{NoiseModel, SourceModel};

pub const DEFAULT_ALPHA: f64 = 1.0;
pub const DEFAULT_GAMMA: f64 = 0.5;
pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_DURATION: f64 = 60.0;
pub const DEFAULT_SIGMA: f64 = 0.05;
pub const DEFAULT_DRIFT_OMEGA: f64 = 0.005;
pub const DEFAULT_DRIFT_RADIUS: f64 = 1.0;

/// Which rotation schedule drives the closed loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScheduleSpec {
    Planar { a: f64 },
    Spatial { b: f64, c: f64, rho: f64 },
}

impl ScheduleSpec {
    pub fn build(&self) -> Result<RotationSchedule> {
        match *self {
            ScheduleSpec::Planar { a } => RotationSchedule::planar(a),
            ScheduleSpec::Spatial { b, c, rho } => RotationSchedule::spatial(b, c, rho),
        }
    }

    pub fn dimension(&self) -> usize {
        match self {
            ScheduleSpec::Planar { .. } => 2,
            ScheduleSpec::Spatial { .. } => 3,
        }
    }
}

/// Scalar loop parameters shared by every right-hand-side evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopParams {
    pub alpha: f64,
    pub gamma: f64,
    pub distance: f64,
    pub normalize: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputSpec {
    pub dir: String,
    pub csv: String,
    pub report: String,
    pub plots: bool,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            dir: "out".into(),
            csv: "trajectory.csv".into(),
            report: "report.txt".into(),
            plots: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    pub dimension: usize,
    pub source: SourceModel,
    pub noise: NoiseModel,
    pub params: LoopParams,
    pub schedule: ScheduleSpec,
    pub y0: DVector<f64>,
    pub x_hat0: DVector<f64>,
    pub filters0: FilterState,
    pub dt: f64,
    pub duration: f64,
    pub sample_every: usize,
    pub output: OutputSpec,
}

fn v(xs: &[f64]) -> DVector<f64> {
    DVector::from_row_slice(xs)
}

impl ScenarioConfig {
    /// Stationary source at `[0.5, 3]`, `d = 2`, agent starting at `[8, 5]`.
    pub fn baseline() -> Self {
        Self {
            name: "baseline".into(),
            dimension: 2,
            source: SourceModel::Stationary(v(&[0.5, 3.0])),
            noise: NoiseModel::None,
            params: LoopParams {
                alpha: DEFAULT_ALPHA,
                gamma: DEFAULT_GAMMA,
                distance: 2.0,
                normalize: false,
            },
            schedule: ScheduleSpec::Planar { a: 1.0 },
            y0: v(&[8.0, 5.0]),
            x_hat0: v(&[0.0, 0.0]),
            filters0: FilterState::zeros(2),
            dt: DEFAULT_DT,
            duration: DEFAULT_DURATION,
            sample_every: 1,
            output: OutputSpec::default(),
        }
    }

    /// Baseline with the constant-speed control variant.
    pub fn normalized() -> Self {
        let mut cfg = Self::baseline();
        cfg.name = "normalized".into();
        cfg.params.normalize = true;
        cfg
    }

    /// Baseline with the source drifting slowly on a unit circle.
    pub fn drift() -> Self {
        let mut cfg = Self::baseline();
        cfg.name = "drift".into();
        cfg.source = SourceModel::CircularDrift {
            center: v(&[0.5, 3.0]),
            radius: DEFAULT_DRIFT_RADIUS,
            omega: DEFAULT_DRIFT_OMEGA,
            phase: 0.0,
        };
        cfg
    }

    /// Baseline with log-normal multiplicative range noise.
    pub fn noisy(sigma: f64, seed: u64) -> Self {
        let mut cfg = Self::baseline();
        cfg.name = "noise".into();
        cfg.noise = NoiseModel::LogNormal { sigma, seed };
        cfg
    }

    /// Three-dimensional run with the default spatial schedule.
    pub fn spatial() -> Self {
        Self {
            name: "spatial".into(),
            dimension: 3,
            source: SourceModel::Stationary(v(&[0.5, 3.0, 1.0])),
            noise: NoiseModel::None,
            params: LoopParams {
                alpha: DEFAULT_ALPHA,
                gamma: DEFAULT_GAMMA,
                distance: 2.0,
                normalize: false,
            },
            schedule: default_spatial_spec(),
            y0: v(&[8.0, 5.0, 2.0]),
            x_hat0: v(&[0.0, 0.0, 0.0]),
            filters0: FilterState::zeros(3),
            dt: DEFAULT_DT,
            duration: 120.0,
            sample_every: 1,
            output: OutputSpec::default(),
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "baseline" => Ok(Self::baseline()),
            "normalized" => Ok(Self::normalized()),
            "drift" => Ok(Self::drift()),
            "noise" => Ok(Self::noisy(DEFAULT_SIGMA, 0)),
            "spatial" => Ok(Self::spatial()),
            other => Err(Error::ConfigInvalid(format!("unknown preset '{other}'"))),
        }
    }

    pub fn seed(&self) -> u64 {
        match self.noise {
            NoiseModel::LogNormal { seed, .. } => seed,
            NoiseModel::None => 0,
        }
    }

    /// Check every invariant needed before a run.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::ConfigInvalid(msg));
        let n = self.dimension;
        if n != 2 && n != 3 {
            return bad(format!("dimension must be 2 or 3, got {n}"));
        }
        if self.schedule.dimension() != n {
            return bad(format!(
                "schedule is {}-dimensional but dimension = {n}",
                self.schedule.dimension()
            ));
        }
        self.schedule.build().map_err(|e| Error::ConfigInvalid(e.to_string()))?;
        let dims = [
            ("initial.y", self.y0.len()),
            ("initial.x_hat", self.x_hat0.len()),
            ("initial.z3", self.filters0.z3.len()),
            ("source", self.source.dimension()),
        ];
        for (key, len) in dims {
            if len != n {
                return bad(format!("{key} has {len} components, expected {n}"));
            }
        }
        let p = &self.params;
        for (key, value) in [
            ("gains.alpha", p.alpha),
            ("gains.gamma", p.gamma),
            ("target.distance", p.distance),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                return bad(format!("{key} must be positive, got {value}"));
            }
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("integrator.dt must be positive, got {}", self.dt));
        }
        if !(self.duration >= 0.0 && self.duration.is_finite()) {
            return bad(format!(
                "integrator.duration must be nonnegative, got {}",
                self.duration
            ));
        }
        if self.sample_every == 0 {
            return bad("integrator.sample_every must be at least 1".into());
        }
        if let NoiseModel::LogNormal { sigma, .. } = self.noise {
            if !(sigma >= 0.0 && sigma.is_finite()) {
                return bad(format!("noise.sigma must be nonnegative, got {sigma}"));
            }
        }
        if let SourceModel::CircularDrift {
            radius, omega, phase, ..
        } = self.source
        {
            if !(radius >= 0.0 && radius.is_finite() && omega.is_finite() && phase.is_finite()) {
                return bad("source drift parameters must be finite with radius >= 0".into());
            }
        }
        let all_finite = self
            .y0
            .iter()
            .chain(self.x_hat0.iter())
            .chain(self.filters0.z3.iter())
            .all(|x| x.is_finite())
            && self.filters0.z1.is_finite()
            && self.filters0.z2.is_finite();
        if !all_finite {
            return bad("initial state must be finite".into());
        }
        let range0 = (&self.y0 - &self.x_hat0).norm();
        if range0.is_nan() || range0 <= MIN_INITIAL_RANGE {
            return bad(format!(
                "initial estimated range must exceed {MIN_INITIAL_RANGE:e}, got {range0:e}"
            ));
        }
        Ok(())
    }

    /// Parse a config document, apply `overrides` in order, validate.
    pub fn parse(text: &str, overrides: &[(String, String)]) -> Result<Self> {
        let mut map = parse_pairs(text)?;
        for (k, val) in overrides {
            map.insert(k.trim().to_string(), val.trim().to_string());
        }
        let cfg = Self::from_map(&map)?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn from_map(map: &BTreeMap<String, String>) -> Result<Self> {
        for key in map.keys() {
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(Error::ConfigInvalid(format!("unknown key '{key}'")));
            }
        }
        let kv = Kv(map);
        let mut cfg = match kv.get("preset") {
            Some(name) => Self::preset(name)?,
            None => Self::baseline(),
        };
        if let Some(n) = kv.usize("dimension")? {
            if n != cfg.dimension {
                cfg = cfg.with_dimension(n);
            }
        }
        if let Some(name) = kv.get("name") {
            cfg.name = name.to_string();
        }

        // source
        let kind = kv.get("source.kind").unwrap_or(match cfg.source {
            SourceModel::Stationary(_) => "stationary",
            SourceModel::CircularDrift { .. } => "circular_drift",
        });
        cfg.source = match kind {
            "stationary" => {
                let default = cfg.source.position(0.0);
                SourceModel::Stationary(kv.vector("source.position")?.unwrap_or(default))
            }
            "circular_drift" => {
                let (c0, r0, w0, p0) = match &cfg.source {
                    SourceModel::CircularDrift {
                        center,
                        radius,
                        omega,
                        phase,
                    } => (center.clone(), *radius, *omega, *phase),
                    SourceModel::Stationary(x) => (x.clone(), DEFAULT_DRIFT_RADIUS, DEFAULT_DRIFT_OMEGA, 0.0),
                };
                SourceModel::CircularDrift {
                    center: kv.vector("source.center")?.unwrap_or(c0),
                    radius: kv.f64("source.radius")?.unwrap_or(r0),
                    omega: kv.f64("source.omega")?.unwrap_or(w0),
                    phase: kv.f64("source.phase")?.unwrap_or(p0),
                }
            }
            other => return Err(Error::ConfigInvalid(format!("unknown source.kind '{other}'"))),
        };

        // noise
        let seed = kv.u64("seed")?.unwrap_or(cfg.seed());
        let kind = kv.get("noise.kind").unwrap_or(match cfg.noise {
            NoiseModel::None => "none",
            NoiseModel::LogNormal { .. } => "lognormal",
        });
        cfg.noise = match kind {
            "none" => NoiseModel::None,
            "lognormal" => {
                let s0 = match cfg.noise {
                    NoiseModel::LogNormal { sigma, .. } => sigma,
                    NoiseModel::None => DEFAULT_SIGMA,
                };
                NoiseModel::LogNormal {
                    sigma: kv.f64("noise.sigma")?.unwrap_or(s0),
                    seed,
                }
            }
            other => return Err(Error::ConfigInvalid(format!("unknown noise.kind '{other}'"))),
        };

        // loop parameters
        let p = &mut cfg.params;
        p.distance = kv.f64("target.distance")?.unwrap_or(p.distance);
        p.alpha = kv.f64("gains.alpha")?.unwrap_or(p.alpha);
        p.gamma = kv.f64("gains.gamma")?.unwrap_or(p.gamma);
        p.normalize = kv.bool("control.normalize")?.unwrap_or(p.normalize);

        // schedule
        let kind = kv.get("schedule.kind").unwrap_or(match cfg.schedule {
            ScheduleSpec::Planar { .. } => "planar",
            ScheduleSpec::Spatial { .. } => "spatial",
        });
        cfg.schedule = match kind {
            "planar" => {
                let a0 = match cfg.schedule {
                    ScheduleSpec::Planar { a } => a,
                    _ => 1.0,
                };
                ScheduleSpec::Planar {
                    a: kv.f64("schedule.a")?.unwrap_or(a0),
                }
            }
            "spatial" => {
                let (b0, c0, rho0) = match cfg.schedule {
                    ScheduleSpec::Spatial { b, c, rho } => (b, c, rho),
                    _ => (1.0, 1.0, f64::NAN),
                };
                let b = kv.f64("schedule.b")?.unwrap_or(b0);
                let c = kv.f64("schedule.c")?.unwrap_or(c0);
                let rho = match kv.f64("schedule.rho")? {
                    Some(rho) => rho,
                    None if rho0.is_finite() && b == b0 && c == c0 => rho0,
                    None => 0.5 * max_blend_time(b, c),
                };
                ScheduleSpec::Spatial { b, c, rho }
            }
            other => return Err(Error::ConfigInvalid(format!("unknown schedule.kind '{other}'"))),
        };

        // initial state
        if let Some(y) = kv.vector("initial.y")? {
            cfg.y0 = y;
        }
        if let Some(x) = kv.vector("initial.x_hat")? {
            cfg.x_hat0 = x;
        }
        cfg.filters0.z1 = kv.f64("initial.z1")?.unwrap_or(cfg.filters0.z1);
        cfg.filters0.z2 = kv.f64("initial.z2")?.unwrap_or(cfg.filters0.z2);
        if let Some(z3) = kv.vector("initial.z3")? {
            cfg.filters0.z3 = z3;
        }

        // integrator
        cfg.dt = kv.f64("integrator.dt")?.unwrap_or(cfg.dt);
        cfg.duration = kv.f64("integrator.duration")?.unwrap_or(cfg.duration);
        cfg.sample_every = kv.usize("integrator.sample_every")?.unwrap_or(cfg.sample_every);

        // output
        let o = &mut cfg.output;
        if let Some(dir) = kv.get("output.dir") {
            o.dir = dir.to_string();
        }
        if let Some(csv) = kv.get("output.csv") {
            o.csv = csv.to_string();
        }
        if let Some(report) = kv.get("output.report") {
            o.report = report.to_string();
        }
        o.plots = kv.bool("output.plots")?.unwrap_or(o.plots);

        Ok(cfg)
    }

    /// The same scenario lifted or projected to dimension `n`, using the
    /// default 3D (or 2D) geometry.
    fn with_dimension(&self, n: usize) -> Self {
        let mut cfg = match n {
            3 => Self::spatial(),
            2 => Self::baseline(),
            // invalid dimensions are rejected by validate()
            _ => {
                let mut c = Self::baseline();
                c.dimension = n;
                return c;
            }
        };
        cfg.name = self.name.clone();
        cfg.noise = self.noise;
        cfg.params = self.params;
        cfg.dt = self.dt;
        cfg.duration = self.duration;
        cfg.sample_every = self.sample_every;
        cfg.output = self.output.clone();
        cfg
    }

    /// Serialize to the key-value format; `parse` of the result reproduces
    /// this config.
    pub fn to_kv_string(&self) -> String {
        let mut s = String::new();
        let vec = |v: &DVector<f64>| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ");
        let _ = writeln!(s, "name = {}", self.name);
        let _ = writeln!(s, "dimension = {}", self.dimension);
        match &self.source {
            SourceModel::Stationary(x) => {
                let _ = writeln!(s, "source.kind = stationary");
                let _ = writeln!(s, "source.position = {}", vec(x));
            }
            SourceModel::CircularDrift {
                center,
                radius,
                omega,
                phase,
            } => {
                let _ = writeln!(s, "source.kind = circular_drift");
                let _ = writeln!(s, "source.center = {}", vec(center));
                let _ = writeln!(s, "source.radius = {radius:?}");
                let _ = writeln!(s, "source.omega = {omega:?}");
                let _ = writeln!(s, "source.phase = {phase:?}");
            }
        }
        match self.noise {
            NoiseModel::None => {
                let _ = writeln!(s, "noise.kind = none");
            }
            NoiseModel::LogNormal { sigma, .. } => {
                let _ = writeln!(s, "noise.kind = lognormal");
                let _ = writeln!(s, "noise.sigma = {sigma:?}");
            }
        }
        let _ = writeln!(s, "seed = {}", self.seed());
        let _ = writeln!(s, "target.distance = {:?}", self.params.distance);
        let _ = writeln!(s, "gains.alpha = {:?}", self.params.alpha);
        let _ = writeln!(s, "gains.gamma = {:?}", self.params.gamma);
        let _ = writeln!(s, "control.normalize = {}", self.params.normalize);
        match self.schedule {
            ScheduleSpec::Planar { a } => {
                let _ = writeln!(s, "schedule.kind = planar");
                let _ = writeln!(s, "schedule.a = {a:?}");
            }
            ScheduleSpec::Spatial { b, c, rho } => {
                let _ = writeln!(s, "schedule.kind = spatial");
                let _ = writeln!(s, "schedule.b = {b:?}");
                let _ = writeln!(s, "schedule.c = {c:?}");
                let _ = writeln!(s, "schedule.rho = {rho:?}");
            }
        }
        let _ = writeln!(s, "initial.y = {}", vec(&self.y0));
        let _ = writeln!(s, "initial.x_hat = {}", vec(&self.x_hat0));
        let _ = writeln!(s, "initial.z1 = {:?}", self.filters0.z1);
        let _ = writeln!(s, "initial.z2 = {:?}", self.filters0.z2);
        let _ = writeln!(s, "initial.z3 = {}", vec(&self.filters0.z3));
        let _ = writeln!(s, "integrator.dt = {:?}", self.dt);
        let _ = writeln!(s, "integrator.duration = {:?}", self.duration);
        let _ = writeln!(s, "integrator.sample_every = {}", self.sample_every);
        let _ = writeln!(s, "output.dir = {}", self.output.dir);
        let _ = writeln!(s, "output.csv = {}", self.output.csv);
        let _ = writeln!(s, "output.report = {}", self.output.report);
        let _ = writeln!(s, "output.plots = {}", self.output.plots);
        s
    }
}

fn default_spatial_spec() -> ScheduleSpec {
    ScheduleSpec::Spatial {
        b: 1.0,
        c: 1.0,
        rho: 0.5 * max_blend_time(1.0, 1.0),
    }
}

const KNOWN_KEYS: &[&str] = &[
    "preset",
    "name",
    "dimension",
    "seed",
    "source.kind",
    "source.position",
    "source.center",
    "source.radius",
    "source.omega",
    "source.phase",
    "noise.kind",
    "noise.sigma",
    "target.distance",
    "gains.alpha",
    "gains.gamma",
    "control.normalize",
    "schedule.kind",
    "schedule.a",
    "schedule.b",
    "schedule.c",
    "schedule.rho",
    "initial.y",
    "initial.x_hat",
    "initial.z1",
    "initial.z2",
    "initial.z3",
    "integrator.dt",
    "integrator.duration",
    "integrator.sample_every",
    "output.dir",
    "output.csv",
    "output.report",
    "output.plots",
];

/// Split a document into `key -> value`; later duplicates win.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::ConfigInvalid(format!(
                "line {}: expected 'key = value'",
                lineno + 1
            )));
        };
        let key = key.trim();
        if key.is_empty() {
            return Err(Error::ConfigInvalid(format!("line {}: empty key", lineno + 1)));
        }
        map.insert(key.to_string(), value.trim().to_string());
    }
    Ok(map)
}

/// Parse a `key=value` override.
pub fn parse_override(s: &str) -> Result<(String, String)> {
    match s.split_once('=') {
        Some((k, v)) if !k.trim().is_empty() => Ok((k.trim().to_string(), v.trim().to_string())),
        _ => Err(Error::ConfigInvalid(format!("override '{s}' is not key=value"))),
    }
}

struct Kv<'a>(&'a BTreeMap<String, String>);

impl Kv<'_> {
    fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    fn parse<T: std::str::FromStr>(&self, key: &str, what: &str) -> Result<Option<T>> {
        self.get(key)
            .map(|s| {
                s.parse::<T>()
                    .map_err(|_| Error::ConfigInvalid(format!("{key}: '{s}' is not {what}")))
            })
            .transpose()
    }

    fn f64(&self, key: &str) -> Result<Option<f64>> {
        self.parse(key, "a number")
    }

    fn usize(&self, key: &str) -> Result<Option<usize>> {
        self.parse(key, "a nonnegative integer")
    }

    fn u64(&self, key: &str) -> Result<Option<u64>> {
        self.parse(key, "an unsigned integer")
    }

    fn bool(&self, key: &str) -> Result<Option<bool>> {
        self.parse(key, "true or false")
    }

    fn vector(&self, key: &str) -> Result<Option<DVector<f64>>> {
        let Some(s) = self.get(key) else {
            return Ok(None);
        };
        let items = s
            .split(',')
            .map(|p| {
                p.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::ConfigInvalid(format!("{key}: '{}' is not a number", p.trim())))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Some(DVector::from_vec(items)))
    }
}
