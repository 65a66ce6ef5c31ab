//! Run configuration: flat `key = value` text with dotted keys.
//!
//! ```text
//! # model
//! model.a = 1.0
//! model.b = 1.0
//! model.epsilon = 1.0
//! sim.master_seed = 314159
//! verify.decay.times = 1, 2, 4, 8, 16
//! ```
//!
//! Blank lines and `#` comments are ignored. Unknown keys, repeated keys and
//! unparseable values are [`Error::Parse`]; values that parse but violate a
//! model or simulation invariant surface as the corresponding semantic error.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::estimators::VerifyPolicy;
use crate::model::ModelParams;
use crate::planner::{Endpoint, DEFAULT_FRACTION};
use crate::sde::{Scheme, SimConfig, DEFAULT_CLAMP_EPS, DEFAULT_DT};

pub const DEFAULT_SEED: u64 = 314159;
pub const DEFAULT_N_PATHS: usize = 10_000;
pub const DEFAULT_T_MAX: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
    Both,
}

impl ReportFormat {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "json" => Some(Self::Json),
            "csv" => Some(Self::Csv),
            "both" => Some(Self::Both),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Json => "json",
            Self::Csv => "csv",
            Self::Both => "both",
        }
    }

    pub fn json(&self) -> bool {
        matches!(self, Self::Json | Self::Both)
    }

    pub fn csv(&self) -> bool {
        matches!(self, Self::Csv | Self::Both)
    }
}

/// Stopping rule used by `simulate`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimulateStop {
    /// `τ_α` from the recurrence plan, with the `X^{-m-1}` functional.
    TauAlpha,
    /// The hit rule of the boundary check.
    Hit,
    None,
}

impl SimulateStop {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "tau_alpha" => Some(Self::TauAlpha),
            "hit" => Some(Self::Hit),
            "none" => Some(Self::None),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::TauAlpha => "tau_alpha",
            Self::Hit => "hit",
            Self::None => "none",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanInputs {
    pub c: f64,
    pub m_fraction: f64,
    pub alpha_fraction: f64,
    pub kappa_fraction: f64,
}

/// Per-check settings. `None` means derived from the plan at run time.
#[derive(Debug, Clone, PartialEq)]
pub struct VerifySettings {
    pub policy: VerifyPolicy,
    pub grid_size: usize,
    /// Defaults to `α / 2`.
    pub recurrence_x0: Option<f64>,
    pub boundary_x0: f64,
    pub boundary_horizon: f64,
    pub contrast: Option<ModelParams>,
    pub hit_endpoint: Endpoint,
    /// Defaults to distance `0.8 κ` from the endpoint.
    pub hit_x0: Option<f64>,
    /// Defaults to distance `0.08 κ` from the endpoint.
    pub hit_beta: Option<f64>,
    pub stationary_x0: f64,
    pub stationary_time: f64,
    pub decay_x0: f64,
    pub decay_times: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelParams,
    pub sim: SimConfig,
    /// Worker threads; not part of the resolved config since results do not
    /// depend on it.
    pub threads: Option<usize>,
    pub plan: PlanInputs,
    pub verify: VerifySettings,
    pub simulate_x0: Option<f64>,
    pub simulate_stop: SimulateStop,
    pub out_dir: PathBuf,
    pub format: ReportFormat,
}

pub const KEYS: &[&str] = &[
    "model.a",
    "model.b",
    "model.epsilon",
    "sim.scheme",
    "sim.dt",
    "sim.t_max",
    "sim.clamp_eps",
    "sim.master_seed",
    "sim.n_paths",
    "sim.threads",
    "plan.c",
    "plan.m_fraction",
    "plan.alpha_fraction",
    "plan.kappa_fraction",
    "verify.sigma_multiplier",
    "verify.censor_tolerance",
    "verify.kurtosis_threshold",
    "verify.bins",
    "verify.grid_size",
    "verify.recurrence.x0",
    "verify.boundary.x0",
    "verify.boundary.horizon",
    "verify.boundary.touch_tolerance",
    "verify.boundary.contrast",
    "verify.boundary.contrast_a",
    "verify.boundary.contrast_b",
    "verify.boundary.contrast_epsilon",
    "verify.hitprob.endpoint",
    "verify.hitprob.x0",
    "verify.hitprob.beta",
    "verify.stationary.x0",
    "verify.stationary.time",
    "verify.stationary.tv_tolerance",
    "verify.decay.x0",
    "verify.decay.times",
    "simulate.x0",
    "simulate.stop",
    "output.dir",
    "output.format",
];

/// Raw `key = value` pairs after syntax checks.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let lineno = i + 1;
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("line {lineno}: expected `key = value`")))?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || value.is_empty() {
            return Err(Error::Parse(format!("line {lineno}: empty key or value")));
        }
        if !KEYS.contains(&key) {
            return Err(Error::Parse(format!("line {lineno}: unknown key `{key}`")));
        }
        if out.insert(key.to_string(), value.to_string()).is_some() {
            return Err(Error::Parse(format!("line {lineno}: duplicate key `{key}`")));
        }
    }
    Ok(out)
}

struct Pairs(BTreeMap<String, String>);

impl Pairs {
    fn get<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.0.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| Error::Parse(format!("`{key}`: cannot parse `{v}`"))),
        }
    }

    fn opt<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.0.get(key).map(String::as_str) {
            None | Some("auto") => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::Parse(format!("`{key}`: cannot parse `{v}`"))),
        }
    }

    fn choice<T>(&self, key: &str, default: T, parse: impl Fn(&str) -> Option<T>) -> Result<T> {
        match self.0.get(key) {
            None => Ok(default),
            Some(v) => parse(v).ok_or_else(|| Error::Parse(format!("`{key}`: unknown value `{v}`"))),
        }
    }

    fn list(&self, key: &str, default: &[f64]) -> Result<Vec<f64>> {
        match self.0.get(key) {
            None => Ok(default.to_vec()),
            Some(v) => v
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse()
                        .map_err(|_| Error::Parse(format!("`{key}`: cannot parse `{s}`")))
                })
                .collect(),
        }
    }
}

fn require(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Config(msg()))
    }
}

impl FromStr for RunConfig {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let kv = Pairs(parse_pairs(text)?);
        let defaults = VerifyPolicy::default();

        let model = ModelParams::new(
            kv.get("model.a", 1.0)?,
            kv.get("model.b", 1.0)?,
            kv.get("model.epsilon", 1.0)?,
        )?;
        let sim = SimConfig::new(
            kv.choice("sim.scheme", Scheme::EulerClamp, Scheme::parse)?,
            kv.get("sim.dt", DEFAULT_DT)?,
            kv.get("sim.t_max", DEFAULT_T_MAX)?,
            kv.get("sim.clamp_eps", DEFAULT_CLAMP_EPS)?,
            kv.get("sim.master_seed", DEFAULT_SEED)?,
            kv.get("sim.n_paths", DEFAULT_N_PATHS)?,
        )?;
        let threads: Option<usize> = kv.opt("sim.threads")?;
        require(threads != Some(0), || "sim.threads must be positive".into())?;

        let plan = PlanInputs {
            c: kv.get("plan.c", 1.0)?,
            m_fraction: kv.get("plan.m_fraction", DEFAULT_FRACTION)?,
            alpha_fraction: kv.get("plan.alpha_fraction", DEFAULT_FRACTION)?,
            kappa_fraction: kv.get("plan.kappa_fraction", DEFAULT_FRACTION)?,
        };

        let policy = VerifyPolicy {
            sigma_multiplier: kv.get("verify.sigma_multiplier", defaults.sigma_multiplier)?,
            censor_tolerance: kv.get("verify.censor_tolerance", defaults.censor_tolerance)?,
            kurtosis_threshold: kv.get("verify.kurtosis_threshold", defaults.kurtosis_threshold)?,
            boundary_touch_tolerance: kv
                .get("verify.boundary.touch_tolerance", defaults.boundary_touch_tolerance)?,
            stationary_tv_tolerance: kv
                .get("verify.stationary.tv_tolerance", defaults.stationary_tv_tolerance)?,
            bins: kv.get("verify.bins", defaults.bins)?,
        };
        require(policy.bins >= 1, || "verify.bins must be positive".into())?;

        let contrast = if kv.get("verify.boundary.contrast", true)? {
            Some(ModelParams::new(
                kv.get("verify.boundary.contrast_a", 0.1)?,
                kv.get("verify.boundary.contrast_b", 0.1)?,
                kv.get("verify.boundary.contrast_epsilon", 1.0)?,
            )?)
        } else {
            None
        };
        let decay_times = kv.list("verify.decay.times", &[1.0, 2.0, 4.0, 8.0, 16.0])?;
        let verify = VerifySettings {
            policy,
            grid_size: kv.get("verify.grid_size", crate::drift::DEFAULT_GRID_SIZE)?,
            recurrence_x0: kv.opt("verify.recurrence.x0")?,
            boundary_x0: kv.get("verify.boundary.x0", 0.5)?,
            boundary_horizon: kv.get("verify.boundary.horizon", 10.0)?,
            contrast,
            hit_endpoint: kv.choice("verify.hitprob.endpoint", Endpoint::Zero, |s| match s {
                "0" => Some(Endpoint::Zero),
                "1" => Some(Endpoint::One),
                _ => None,
            })?,
            hit_x0: kv.opt("verify.hitprob.x0")?,
            hit_beta: kv.opt("verify.hitprob.beta")?,
            stationary_x0: kv.get("verify.stationary.x0", 0.5)?,
            stationary_time: kv.get("verify.stationary.time", 50.0)?,
            decay_x0: kv.get("verify.decay.x0", 0.05)?,
            decay_times,
        };
        require(verify.grid_size >= 2, || "verify.grid_size must be at least 2".into())?;
        require(verify.boundary_horizon > sim.dt, || {
            "verify.boundary.horizon must exceed sim.dt".into()
        })?;
        require(verify.stationary_time > sim.dt, || {
            "verify.stationary.time must exceed sim.dt".into()
        })?;

        Ok(Self {
            model,
            sim,
            threads,
            plan,
            verify,
            simulate_x0: kv.opt("simulate.x0")?,
            simulate_stop: kv.choice("simulate.stop", SimulateStop::TauAlpha, SimulateStop::parse)?,
            out_dir: PathBuf::from(kv.get("output.dir", "out".to_string())?),
            format: kv.choice("output.format", ReportFormat::Json, ReportFormat::parse)?,
        })
    }
}

fn auto(v: Option<f64>) -> String {
    v.map_or_else(|| "auto".to_string(), |x| x.to_string())
}

impl Default for RunConfig {
    fn default() -> Self {
        "".parse().expect("defaults are valid")
    }
}

impl RunConfig {
    pub fn load(path: &std::path::Path) -> Result<Self> {
        std::fs::read_to_string(path)?.parse()
    }

    /// Every semantic key with its value, in key order. Execution-only keys
    /// (`sim.threads`, `output.dir`) are left out so that reports do not
    /// depend on where or how they were produced. Plan-derived values read
    /// `auto` until a command resolves them.
    pub fn to_map(&self) -> BTreeMap<String, String> {
        let v = &self.verify;
        let mut m = BTreeMap::new();
        let mut put = |k: &str, val: String| {
            m.insert(k.to_string(), val);
        };
        put("model.a", self.model.a().to_string());
        put("model.b", self.model.b().to_string());
        put("model.epsilon", self.model.epsilon().to_string());
        put("sim.scheme", self.sim.scheme.name().into());
        put("sim.dt", self.sim.dt.to_string());
        put("sim.t_max", self.sim.t_max.to_string());
        put("sim.clamp_eps", self.sim.clamp_eps.to_string());
        put("sim.master_seed", self.sim.master_seed.to_string());
        put("sim.n_paths", self.sim.n_paths.to_string());
        put("plan.c", self.plan.c.to_string());
        put("plan.m_fraction", self.plan.m_fraction.to_string());
        put("plan.alpha_fraction", self.plan.alpha_fraction.to_string());
        put("plan.kappa_fraction", self.plan.kappa_fraction.to_string());
        put("verify.sigma_multiplier", v.policy.sigma_multiplier.to_string());
        put("verify.censor_tolerance", v.policy.censor_tolerance.to_string());
        put("verify.kurtosis_threshold", v.policy.kurtosis_threshold.to_string());
        put("verify.bins", v.policy.bins.to_string());
        put("verify.grid_size", v.grid_size.to_string());
        put("verify.recurrence.x0", auto(v.recurrence_x0));
        put("verify.boundary.x0", v.boundary_x0.to_string());
        put("verify.boundary.horizon", v.boundary_horizon.to_string());
        put("verify.boundary.touch_tolerance", v.policy.boundary_touch_tolerance.to_string());
        put("verify.boundary.contrast", v.contrast.is_some().to_string());
        if let Some(q) = &v.contrast {
            put("verify.boundary.contrast_a", q.a().to_string());
            put("verify.boundary.contrast_b", q.b().to_string());
            put("verify.boundary.contrast_epsilon", q.epsilon().to_string());
        }
        put(
            "verify.hitprob.endpoint",
            match v.hit_endpoint {
                Endpoint::Zero => "0".into(),
                Endpoint::One => "1".into(),
            },
        );
        put("verify.hitprob.x0", auto(v.hit_x0));
        put("verify.hitprob.beta", auto(v.hit_beta));
        put("verify.stationary.x0", v.stationary_x0.to_string());
        put("verify.stationary.time", v.stationary_time.to_string());
        put("verify.stationary.tv_tolerance", v.policy.stationary_tv_tolerance.to_string());
        put("verify.decay.x0", v.decay_x0.to_string());
        put(
            "verify.decay.times",
            v.decay_times.iter().map(f64::to_string).collect::<Vec<_>>().join(", "),
        );
        put("simulate.x0", auto(self.simulate_x0));
        put("simulate.stop", self.simulate_stop.name().into());
        put("output.format", self.format.name().into());
        m
    }
}
