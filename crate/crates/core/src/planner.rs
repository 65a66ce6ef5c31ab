//! Constructive parameter choices for the recurrence and inattainability
//! certificates, and the right-hand sides of the resulting bounds.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelParams, StateValue};

/// Factor in the α choice `g_m ≥ MULTIPLIER · (c + (a+b)m) α`.
pub const ALPHA_MULTIPLIER: f64 = 2.0;
pub const DEFAULT_FRACTION: f64 = 0.5;

/// Certified `(c, m, α, C(m))` for the exponential moment of `τ_α`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecurrencePlan {
    pub c: f64,
    pub m: f64,
    pub alpha: f64,
    #[serde(rename = "C_m")]
    pub c_m: f64,
    /// Margin `(a∧b) m - ε² m (m+1) / 2`.
    pub g_m: f64,
    /// Supremum of the admissible `m` interval, `2(a∧b)/ε² - 1`.
    pub m_max: f64,
    /// Supremum of the admissible `α` interval for this `m`.
    pub alpha_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Endpoint {
    #[serde(rename = "0")]
    Zero,
    #[serde(rename = "1")]
    One,
}

/// Certified `(κ, b₀, n)` for inattainability of one endpoint.
///
/// `kappa` is a distance from the endpoint: the certified neighbourhood is
/// `(0, κ]` for `Endpoint::Zero` and `[1 - κ, 1)` for `Endpoint::One`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPlan {
    pub kappa: f64,
    pub b0: f64,
    pub n: f64,
    pub endpoint: Endpoint,
    /// Supremum of the admissible `κ` interval.
    pub kappa_max: f64,
}

fn check_fraction(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidFraction { name, value })
    }
}

/// Recurrence margin `g(m) = (a∧b) m - ε² m (m+1) / 2`.
pub fn recurrence_margin(p: &ModelParams, m: f64) -> f64 {
    p.a().min(p.b()) * m - p.epsilon() * p.epsilon() * m * (m + 1.0) / 2.0
}

/// Supremum of admissible α for given `(c, m)`: `g(m) / (2 (c + (a+b) m))`.
pub fn alpha_supremum(p: &ModelParams, c: f64, m: f64) -> f64 {
    recurrence_margin(p, m) / (ALPHA_MULTIPLIER * (c + (p.a() + p.b()) * m))
}

/// Picks `m` and `α` as fixed fractions of their admissible intervals.
pub fn plan_recurrence(
    p: &ModelParams,
    c: f64,
    m_fraction: f64,
    alpha_fraction: f64,
) -> Result<RecurrencePlan> {
    let min_rate = p.a().min(p.b());
    let e2 = p.epsilon() * p.epsilon();
    if min_rate <= e2 / 2.0 {
        return Err(Error::FellerViolated(format!(
            "min(a, b) = {min_rate} must exceed epsilon^2/2 = {}",
            e2 / 2.0
        )));
    }
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::InvalidParams(format!("rate c must be > 0, got {c}")));
    }
    check_fraction("m_fraction", m_fraction)?;
    check_fraction("alpha_fraction", alpha_fraction)?;

    let m_max = 2.0 * min_rate / e2 - 1.0;
    let m = m_fraction * m_max;
    let g_m = recurrence_margin(p, m);
    let alpha_max = alpha_supremum(p, c, m);
    Ok(RecurrencePlan {
        c,
        m,
        alpha: alpha_fraction * alpha_max,
        c_m: 2.0 / g_m,
        g_m,
        m_max,
        alpha_max,
    })
}

impl RecurrencePlan {
    /// Checks the plan's defining inequalities against `p`.
    pub fn validate(&self, p: &ModelParams) -> Result<()> {
        let fail = |what: String| Err(Error::InvalidParams(format!("recurrence plan: {what}")));
        let m_max = 2.0 * p.a().min(p.b()) / (p.epsilon() * p.epsilon()) - 1.0;
        if !(self.m > 0.0 && self.m < m_max) {
            return fail(format!("m = {} outside (0, {m_max})", self.m));
        }
        if self.g_m <= 0.0 || self.g_m.is_nan() {
            return fail(format!("g_m = {} not positive", self.g_m));
        }
        let sup = alpha_supremum(p, self.c, self.m);
        if !(self.alpha > 0.0 && self.alpha < sup && self.alpha < 0.5) {
            return fail(format!("alpha = {} outside (0, {sup})", self.alpha));
        }
        if self.c_m != 2.0 / self.g_m {
            return fail(format!("C_m = {} differs from 2/g_m", self.c_m));
        }
        Ok(())
    }

    fn lyapunov_sum(&self, x: StateValue) -> Result<f64> {
        if !x.is_interior() {
            return Err(Error::Domain(format!("bound requires 0 < x < 1, got {}", x.get())));
        }
        let x = x.get();
        Ok(x.powf(-self.m) + (1.0 - x).powf(-self.m))
    }

    /// `α^{m+1} (x^{-m} + (1-x)^{-m})` as `α ((α/x)^m + (α/(1-x))^m)`, finite
    /// when the two factors separately overflow and underflow.
    fn scaled_lyapunov_sum(&self, x: StateValue) -> Result<f64> {
        self.lyapunov_sum(x)?;
        let (a, x) = (self.alpha, x.get());
        Ok(a * ((a / x).powf(self.m) + (a / (1.0 - x)).powf(self.m)))
    }
}

/// `C(m) c α^{m+1} (x^{-m} + (1-x)^{-m}) + 1`, the bound on `E_x e^{c τ_α}`.
pub fn bound_exp_moment(plan: &RecurrencePlan, x: StateValue) -> Result<f64> {
    Ok(plan.c_m * plan.c * plan.scaled_lyapunov_sum(x)? + 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FunctionalBound {
    /// Carries the factor `c α^{m+1}`.
    AsStated,
    /// Without the factor; this is what the supermartingale argument yields.
    AsProved,
}

/// Bound on `E_x ∫_0^{τ_α} X_s^{-m-1} ds`.
pub fn bound_additive_functional(
    plan: &RecurrencePlan,
    x: StateValue,
    variant: FunctionalBound,
) -> Result<f64> {
    Ok(match variant {
        FunctionalBound::AsStated => plan.c_m * plan.c * plan.scaled_lyapunov_sum(x)?,
        FunctionalBound::AsProved => plan.c_m * plan.lyapunov_sum(x)?,
    })
}

/// Picks `κ` as a fraction of its admissible interval and `n` at the closed
/// upper end `2 b₀/ε² - 1`.
pub fn plan_boundary(p: &ModelParams, endpoint: Endpoint, kappa_fraction: f64) -> Result<BoundaryPlan> {
    let q = match endpoint {
        Endpoint::Zero => *p,
        Endpoint::One => p.swapped(),
    };
    let (a, b, e2) = (q.a(), q.b(), q.epsilon() * q.epsilon());
    if a <= e2 / 2.0 {
        return Err(Error::FellerViolated(format!(
            "mutation rate away from endpoint {endpoint:?} is {a}, must exceed epsilon^2/2 = {}",
            e2 / 2.0
        )));
    }
    check_fraction("kappa_fraction", kappa_fraction)?;
    let kappa_max = (a - e2 / 2.0) / (a + b);
    let kappa = kappa_fraction * kappa_max;
    let b0 = a - (a + b) * kappa;
    Ok(BoundaryPlan {
        kappa,
        b0,
        n: 2.0 * b0 / e2 - 1.0,
        endpoint,
        kappa_max,
    })
}

impl BoundaryPlan {
    /// Model as seen from this plan's endpoint (endpoint 1 maps to 0 via `y = 1 - x`).
    pub fn oriented(&self, p: &ModelParams) -> ModelParams {
        match self.endpoint {
            Endpoint::Zero => *p,
            Endpoint::One => p.swapped(),
        }
    }

    pub fn validate(&self, p: &ModelParams) -> Result<()> {
        let q = self.oriented(p);
        let (a, b, e2) = (q.a(), q.b(), q.epsilon() * q.epsilon());
        let fail = |what: String| Err(Error::InvalidParams(format!("boundary plan: {what}")));
        let kappa_max = (a - e2 / 2.0) / (a + b);
        if !(self.kappa > 0.0 && self.kappa < kappa_max) {
            return fail(format!("kappa = {} outside (0, {kappa_max})", self.kappa));
        }
        if self.b0 != a - (a + b) * self.kappa || self.b0 <= e2 / 2.0 {
            return fail(format!("b0 = {} inconsistent", self.b0));
        }
        let n_max = 2.0 * self.b0 / e2 - 1.0;
        if !(self.n > 0.0 && self.n <= n_max) {
            return fail(format!("n = {} outside (0, {n_max}]", self.n));
        }
        Ok(())
    }

    /// Distance of a state from this plan's endpoint.
    pub fn distance(&self, x: f64) -> f64 {
        match self.endpoint {
            Endpoint::Zero => x,
            Endpoint::One => 1.0 - x,
        }
    }
}

/// `min(1, (β/x)^n)` bound on the probability of reaching the level `β`
/// before leaving the κ-neighbourhood.
///
/// `x` and `beta` are states; for endpoint 1 both are mirrored through `1 - x`.
pub fn bound_hit_probability(plan: &BoundaryPlan, x: StateValue, beta: f64) -> Result<f64> {
    let (dx, db) = (plan.distance(x.get()), plan.distance(beta));
    if !(db > 0.0 && db < dx && dx < 1.0) {
        return Err(Error::Ordering(format!(
            "need beta strictly between the endpoint and x (beta = {beta}, x = {})",
            x.get()
        )));
    }
    if db >= plan.kappa {
        return Err(Error::Ordering(format!(
            "beta must lie inside the kappa-neighbourhood (distance {db} >= kappa {})",
            plan.kappa
        )));
    }
    Ok((db / dx).powf(plan.n).min(1.0))
}
