//! Stationary law of the diffusion: `Beta(2a/ε², 2b/ε²)`.
//!
//! The density comes from the zero-flux solution of the stationary
//! Fokker–Planck equation. Normalization uses `ln Γ`; bin masses and the CDF
//! are computed by adaptive quadrature of the density.

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::model::{require_feller, ModelParams, StateValue};
use crate::quadrature;

/// Absolute tolerance for density quadrature.
pub const QUADRATURE_TOL: f64 = 1e-10;

/// Shape parameters `(2a/ε², 2b/ε²)` of the invariant Beta law.
pub fn beta_shapes(p: &ModelParams) -> (f64, f64) {
    let e2 = p.epsilon() * p.epsilon();
    (2.0 * p.a() / e2, 2.0 * p.b() / e2)
}

#[derive(Debug, Clone, Copy)]
pub struct StationaryLaw {
    alpha: f64,
    beta: f64,
    log_norm: f64,
}

impl StationaryLaw {
    pub fn new(p: &ModelParams) -> Result<Self> {
        require_feller(p)?;
        let (alpha, beta) = beta_shapes(p);
        let log_norm = ln_gamma(alpha) + ln_gamma(beta) - ln_gamma(alpha + beta);
        Ok(Self {
            alpha,
            beta,
            log_norm,
        })
    }

    pub fn shapes(&self) -> (f64, f64) {
        (self.alpha, self.beta)
    }

    /// Density at `x`; zero outside `(0, 1)`.
    pub fn density(&self, x: f64) -> f64 {
        if !(x > 0.0 && x < 1.0) {
            return 0.0;
        }
        ((self.alpha - 1.0) * x.ln() + (self.beta - 1.0) * (-x).ln_1p() - self.log_norm).exp()
    }

    pub fn mean(&self) -> f64 {
        self.alpha / (self.alpha + self.beta)
    }

    /// Probability of `[lo, hi]`.
    pub fn mass(&self, lo: f64, hi: f64) -> f64 {
        let (lo, hi) = (lo.max(0.0), hi.min(1.0));
        if hi <= lo {
            return 0.0;
        }
        quadrature::integrate(|x| self.density(x), lo, hi, QUADRATURE_TOL)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.mass(0.0, x).min(1.0)
    }

    /// Masses of consecutive bins delimited by `edges`.
    pub fn bin_masses(&self, edges: &[f64]) -> Vec<f64> {
        edges.windows(2).map(|w| self.mass(w[0], w[1])).collect()
    }
}

/// `x^{2a/ε²-1} (1-x)^{2b/ε²-1} / B(2a/ε², 2b/ε²)`.
pub fn stationary_density(p: &ModelParams, x: StateValue) -> Result<f64> {
    let law = StationaryLaw::new(p)?;
    if !x.is_interior() {
        return Err(Error::Domain(format!(
            "stationary density requires 0 < x < 1, got {}",
            x.get()
        )));
    }
    Ok(law.density(x.get()))
}
