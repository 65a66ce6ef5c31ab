//! Discretized sample paths, stopping times and boundary monitoring.

mod batch;
mod path;
mod rng;
mod scheme;

pub use batch::{run_batch, write_paths_csv, CSV_FIXED_COLUMNS};
pub use path::{run_path, run_path_with_noise};
pub use rng::{NoiseSource, PathRng, SequenceNoise};
pub use scheme::{step, StepOutcome, Stepper};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_DT: f64 = 1e-4;
pub const DEFAULT_CLAMP_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Euler–Maruyama, clipped into `[δ, 1 - δ]`.
    EulerClamp,
    /// Euler–Maruyama, reflected at `δ` and `1 - δ`.
    EulerReflect,
    /// Euler in the Lamperti coordinate `y = (2/ε) asin √x`, where the noise is additive.
    Lamperti,
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::EulerClamp => "euler_clamp",
            Scheme::EulerReflect => "euler_reflect",
            Scheme::Lamperti => "lamperti",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "euler_clamp" => Some(Scheme::EulerClamp),
            "euler_reflect" => Some(Scheme::EulerReflect),
            "lamperti" => Some(Scheme::Lamperti),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub scheme: Scheme,
    pub dt: f64,
    pub t_max: f64,
    /// Numerical floor δ; states are kept in `[δ, 1 - δ]`.
    pub clamp_eps: f64,
    pub master_seed: u64,
    pub n_paths: usize,
}

impl SimConfig {
    pub fn new(
        scheme: Scheme,
        dt: f64,
        t_max: f64,
        clamp_eps: f64,
        master_seed: u64,
        n_paths: usize,
    ) -> Result<Self> {
        let cfg = Self {
            scheme,
            dt,
            t_max,
            clamp_eps,
            master_seed,
            n_paths,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Default scheme, step and floor.
    pub fn with_defaults(t_max: f64, master_seed: u64, n_paths: usize) -> Result<Self> {
        Self::new(Scheme::EulerClamp, DEFAULT_DT, t_max, DEFAULT_CLAMP_EPS, master_seed, n_paths)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::Config(format!("dt must be > 0, got {}", self.dt)));
        }
        if !(self.t_max.is_finite() && self.t_max > self.dt) {
            return Err(Error::Config(format!(
                "t_max = {} must exceed dt = {}",
                self.t_max, self.dt
            )));
        }
        if !(self.clamp_eps > 0.0 && self.clamp_eps < 1e-6) {
            return Err(Error::Config(format!(
                "clamp_eps must lie in (0, 1e-6), got {}",
                self.clamp_eps
            )));
        }
        if self.n_paths == 0 {
            return Err(Error::Config("n_paths must be >= 1".into()));
        }
        Ok(())
    }

    /// Number of grid steps up to the horizon.
    pub fn n_steps(&self) -> u64 {
        (self.t_max / self.dt).round() as u64
    }

    pub fn time_of(&self, step: u64) -> f64 {
        step as f64 * self.dt
    }
}

/// Stopping conditions, checked at grid points only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum StoppingRule {
    /// First entry into `[α, 1 - α]`.
    TauAlpha { alpha: f64 },
    /// First time `X ≤ β`.
    GammaBeta { beta: f64 },
    /// First time `X ≥ κ`.
    TKappa { kappa: f64 },
    /// Whichever listed condition fires first (the earliest listed wins ties).
    FirstOf(Vec<StoppingRule>),
    /// Run to the horizon.
    Never,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    TauAlpha,
    GammaBeta,
    TKappa,
    /// The horizon was reached before the stopping condition fired.
    Censored,
    /// The horizon was reached by a path with no stopping condition.
    Horizon,
}

impl StopReason {
    pub const ALL: [StopReason; 5] = [
        StopReason::TauAlpha,
        StopReason::GammaBeta,
        StopReason::TKappa,
        StopReason::Censored,
        StopReason::Horizon,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            StopReason::TauAlpha => "tau_alpha",
            StopReason::GammaBeta => "gamma_beta",
            StopReason::TKappa => "t_kappa",
            StopReason::Censored => "censored",
            StopReason::Horizon => "horizon",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Trigger {
    Inside { lo: f64, hi: f64 },
    AtMost(f64),
    AtLeast(f64),
}

impl StoppingRule {
    fn check_threshold(name: &str, v: f64) -> Result<()> {
        if v > 0.0 && v < 1.0 {
            Ok(())
        } else {
            Err(Error::Config(format!("{name} threshold {v} outside (0, 1)")))
        }
    }

    /// Flattens into leaf triggers in priority order.
    pub(crate) fn compile(&self) -> Result<Vec<(Trigger, StopReason)>> {
        let mut out = Vec::new();
        self.compile_into(&mut out)?;
        Ok(out)
    }

    fn compile_into(&self, out: &mut Vec<(Trigger, StopReason)>) -> Result<()> {
        match self {
            StoppingRule::TauAlpha { alpha } => {
                Self::check_threshold("alpha", *alpha)?;
                if *alpha >= 0.5 {
                    return Err(Error::Config(format!("alpha = {alpha} must be < 1/2")));
                }
                out.push((
                    Trigger::Inside {
                        lo: *alpha,
                        hi: 1.0 - alpha,
                    },
                    StopReason::TauAlpha,
                ));
            }
            StoppingRule::GammaBeta { beta } => {
                Self::check_threshold("beta", *beta)?;
                out.push((Trigger::AtMost(*beta), StopReason::GammaBeta));
            }
            StoppingRule::TKappa { kappa } => {
                Self::check_threshold("kappa", *kappa)?;
                out.push((Trigger::AtLeast(*kappa), StopReason::TKappa));
            }
            StoppingRule::FirstOf(rules) => {
                if rules.is_empty() {
                    return Err(Error::Config("empty stopping specification".into()));
                }
                for r in rules {
                    r.compile_into(out)?;
                }
            }
            StoppingRule::Never => {}
        }
        Ok(())
    }
}

/// Additive functionals `∫_0^τ f(X_s) ds`, accumulated by the left-endpoint rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Functional {
    /// `f(x) = x^{-exponent}`
    InversePower { exponent: f64 },
    /// `f(x) = (1 - x)^{-exponent}`
    UpperInversePower { exponent: f64 },
}

impl Functional {
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Functional::InversePower { exponent } => x.powf(-exponent),
            Functional::UpperInversePower { exponent } => (1.0 - x).powf(-exponent),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Functional::InversePower { exponent } => format!("int_x_pow_neg_{exponent}"),
            Functional::UpperInversePower { exponent } => format!("int_1mx_pow_neg_{exponent}"),
        }
    }
}

/// What to do along each path.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PathRequest {
    pub stop: Option<StoppingRule>,
    pub functionals: Vec<Functional>,
    /// Times at which to record the state; rounded to the grid.
    pub snapshot_times: Vec<f64>,
}

impl PathRequest {
    pub fn stopping(stop: StoppingRule) -> Self {
        Self {
            stop: Some(stop),
            ..Self::default()
        }
    }

    pub fn with_functional(mut self, f: Functional) -> Self {
        self.functionals.push(f);
        self
    }

    pub fn with_snapshots(mut self, times: &[f64]) -> Self {
        self.snapshot_times.extend_from_slice(times);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathRecord {
    pub path_index: usize,
    pub initial_x: f64,
    /// Stopping time, or `t_max` for censored and horizon paths.
    pub stop_time: f64,
    pub stop_reason: StopReason,
    /// State at `stop_time`.
    pub final_x: f64,
    /// One entry per requested functional, in request order.
    pub integrals: Vec<f64>,
    /// One entry per requested snapshot; NaN when the path stopped earlier.
    pub snapshots: Vec<f64>,
    /// Steps at which the scheme left `[δ, 1 - δ]`.
    pub clamp_events: u64,
    pub min_x: f64,
    pub max_x: f64,
}

impl PathRecord {
    pub fn is_censored(&self) -> bool {
        self.stop_reason == StopReason::Censored
    }
}
