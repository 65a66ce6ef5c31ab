use crate::model::ModelParams;

use super::{Scheme, SimConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub x: f64,
    /// The raw update left `[δ, 1 - δ]` and was clipped or reflected.
    pub clamped: bool,
}

/// One-step map for a fixed model and configuration, with constants hoisted.
#[derive(Debug, Clone, Copy)]
pub struct Stepper {
    scheme: Scheme,
    a: f64,
    a_plus_b: f64,
    epsilon: f64,
    dt: f64,
    sqrt_dt: f64,
    floor: f64,
    ceil: f64,
    // Lamperti coordinate bounds, F(δ) and F(1 - δ)
    y_floor: f64,
    y_ceil: f64,
}

impl Stepper {
    pub fn new(p: &ModelParams, cfg: &SimConfig) -> Self {
        let floor = cfg.clamp_eps;
        let ceil = 1.0 - cfg.clamp_eps;
        let lamperti = |x: f64| 2.0 / p.epsilon() * x.sqrt().asin();
        Self {
            scheme: cfg.scheme,
            a: p.a(),
            a_plus_b: p.a() + p.b(),
            epsilon: p.epsilon(),
            dt: cfg.dt,
            sqrt_dt: cfg.dt.sqrt(),
            floor,
            ceil,
            y_floor: lamperti(floor),
            y_ceil: lamperti(ceil),
        }
    }

    #[inline]
    pub fn advance(&self, x: f64, noise: f64) -> StepOutcome {
        match self.scheme {
            Scheme::EulerClamp => {
                let next = self.euler(x, noise);
                if next < self.floor {
                    StepOutcome { x: self.floor, clamped: true }
                } else if next > self.ceil {
                    StepOutcome { x: self.ceil, clamped: true }
                } else {
                    StepOutcome { x: next, clamped: false }
                }
            }
            Scheme::EulerReflect => {
                let next = self.euler(x, noise);
                if next < self.floor {
                    let r = 2.0 * self.floor - next;
                    StepOutcome { x: r.min(self.ceil), clamped: true }
                } else if next > self.ceil {
                    let r = 2.0 * self.ceil - next;
                    StepOutcome { x: r.max(self.floor), clamped: true }
                } else {
                    StepOutcome { x: next, clamped: false }
                }
            }
            Scheme::Lamperti => self.lamperti(x, noise),
        }
    }

    #[inline]
    fn euler(&self, x: f64, noise: f64) -> f64 {
        let drift = self.a - self.a_plus_b * x;
        let sigma = self.epsilon * (x * (1.0 - x)).sqrt();
        x + drift * self.dt + sigma * self.sqrt_dt * noise
    }

    fn lamperti(&self, x: f64, noise: f64) -> StepOutcome {
        let e = self.epsilon;
        let root = (x * (1.0 - x)).sqrt();
        let sigma = e * root;
        let dsigma = e * (1.0 - 2.0 * x) / (2.0 * root);
        let y = 2.0 / e * x.sqrt().asin();
        let drift_y = (self.a - self.a_plus_b * x) / sigma - 0.5 * dsigma;
        let y_next = y + drift_y * self.dt + self.sqrt_dt * noise;
        if y_next < self.y_floor {
            StepOutcome { x: self.floor, clamped: true }
        } else if y_next > self.y_ceil {
            StepOutcome { x: self.ceil, clamped: true }
        } else {
            let s = (0.5 * e * y_next).sin();
            StepOutcome {
                x: (s * s).clamp(self.floor, self.ceil),
                clamped: false,
            }
        }
    }
}

/// Single step of the configured scheme from `x` with standard normal `noise`.
pub fn step(p: &ModelParams, cfg: &SimConfig, x: f64, noise: f64) -> StepOutcome {
    Stepper::new(p, cfg).advance(x, noise)
}
