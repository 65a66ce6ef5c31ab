//! The Wright–Fisher diffusion with two-way mutation,
//!
//! ```text
//! dX_t = [a(1 - X_t) - b X_t] dt + ε √(X_t (1 - X_t)) dW_t,
//! ```
//!
//! on the unit interval. `a` pushes the allele frequency toward 1, `b` toward 0.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Model parameters `(a, b, ε)`. All three are strictly positive and finite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    a: f64,
    b: f64,
    epsilon: f64,
}

impl ModelParams {
    pub fn new(a: f64, b: f64, epsilon: f64) -> Result<Self> {
        for (name, v) in [("a", a), ("b", b), ("epsilon", epsilon)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParams(format!(
                    "{name} must be finite and > 0, got {v}"
                )));
            }
        }
        Ok(Self { a, b, epsilon })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// `ε²/2`, the critical mutation rate.
    pub fn half_noise_sq(&self) -> f64 {
        0.5 * self.epsilon * self.epsilon
    }

    /// The mirrored model seen through `y = 1 - x`: `a` and `b` exchange roles.
    pub fn swapped(&self) -> Self {
        Self {
            a: self.b,
            b: self.a,
            epsilon: self.epsilon,
        }
    }

    /// Zero of the drift, `a / (a + b)`.
    pub fn drift_zero(&self) -> f64 {
        self.a / (self.a + self.b)
    }

    #[inline]
    pub(crate) fn drift_raw(&self, x: f64) -> f64 {
        self.a - (self.a + self.b) * x
    }

    #[inline]
    pub(crate) fn diffusion_raw(&self, x: f64) -> f64 {
        self.epsilon * (x * (1.0 - x)).sqrt()
    }
}

/// A population fraction in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct StateValue(f64);

impl StateValue {
    pub fn new(x: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&x) {
            Ok(Self(x))
        } else {
            Err(Error::Domain(format!("state {x} outside [0, 1]")))
        }
    }

    /// Accepts only the open interval `(0, 1)`.
    pub fn interior(x: f64) -> Result<Self> {
        if x > 0.0 && x < 1.0 {
            Ok(Self(x))
        } else {
            Err(Error::Domain(format!("state {x} outside (0, 1)")))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }

    pub fn is_interior(self) -> bool {
        self.0 > 0.0 && self.0 < 1.0
    }
}

/// Feller's condition `min(a, b) > ε²/2` (strict).
pub fn feller_satisfied(p: &ModelParams) -> bool {
    p.a.min(p.b) > p.half_noise_sq()
}

/// Drift coefficient `B(x) = a - (a + b) x`.
pub fn drift(p: &ModelParams, x: StateValue) -> f64 {
    p.drift_raw(x.0)
}

/// Diffusion coefficient `ε √(x (1 - x))`; exactly zero at both endpoints.
pub fn diffusion(p: &ModelParams, x: StateValue) -> f64 {
    p.diffusion_raw(x.0)
}

pub(crate) fn require_feller(p: &ModelParams) -> Result<()> {
    if feller_satisfied(p) {
        Ok(())
    } else {
        Err(Error::FellerViolated(format!(
            "min(a, b) = {} must exceed epsilon^2/2 = {}",
            p.a.min(p.b),
            p.half_noise_sq()
        )))
    }
}
