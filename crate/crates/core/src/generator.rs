//! Lyapunov test functions and the generator
//! `A V = ∂_t V + B(x) ∂_x V + (ε²/2) x (1 - x) ∂_xx V` applied to them.
//!
//! [`generator_apply`] evaluates the grouped closed form used in the recurrence
//! and inattainability arguments. [`generator_terms`] evaluates the three raw
//! terms from analytic derivatives, and [`generator_apply_fd`] rebuilds them
//! from central differences of `V` alone. The three routes share no algebra.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelParams, StateValue};

/// Default finite-difference step.
pub const DEFAULT_FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LyapunovKind {
    /// `V(t, x) = e^{ct} x^{-m}`
    LowerEnd,
    /// `V(t, x) = e^{ct} (1 - x)^{-m}`
    UpperEnd,
    /// `V(x) = x^{-n}`
    Boundary,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovSpec {
    kind: LyapunovKind,
    exponent: f64,
    rate: f64,
}

impl LyapunovSpec {
    pub fn lower_end(m: f64, c: f64) -> Result<Self> {
        Self::checked(LyapunovKind::LowerEnd, m, c)
    }

    pub fn upper_end(m: f64, c: f64) -> Result<Self> {
        Self::checked(LyapunovKind::UpperEnd, m, c)
    }

    pub fn boundary(n: f64) -> Result<Self> {
        Self::checked(LyapunovKind::Boundary, n, 0.0)
    }

    fn checked(kind: LyapunovKind, exponent: f64, rate: f64) -> Result<Self> {
        // exponent 0 is allowed: V then depends on t only
        if !(exponent.is_finite() && exponent >= 0.0) {
            return Err(Error::InvalidParams(format!(
                "Lyapunov exponent must be finite and >= 0, got {exponent}"
            )));
        }
        if !(rate.is_finite() && rate >= 0.0) {
            return Err(Error::InvalidParams(format!(
                "exponential rate must be finite and >= 0, got {rate}"
            )));
        }
        Ok(Self {
            kind,
            exponent,
            rate,
        })
    }

    pub fn kind(&self) -> LyapunovKind {
        self.kind
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// `V(t, x)`.
    pub fn value(&self, t: f64, x: f64) -> f64 {
        let LyapunovSpec {
            kind,
            exponent: m,
            rate: c,
        } = *self;
        match kind {
            LyapunovKind::LowerEnd => (c * t).exp() * x.powf(-m),
            LyapunovKind::UpperEnd => (c * t).exp() * (1.0 - x).powf(-m),
            LyapunovKind::Boundary => x.powf(-m),
        }
    }

    /// `V(t + dt, x + dx) / V(t, x) - 1`, evaluated without cancellation so
    /// that differences of `V` keep full relative precision for tiny steps.
    fn relative_increment(&self, t_step: f64, x: f64, x_step: f64) -> f64 {
        let m = self.exponent;
        let log_ratio = match self.kind {
            LyapunovKind::LowerEnd => self.rate * t_step - m * (x_step / x).ln_1p(),
            LyapunovKind::UpperEnd => self.rate * t_step - m * (-x_step / (1.0 - x)).ln_1p(),
            LyapunovKind::Boundary => -m * (x_step / x).ln_1p(),
        };
        log_ratio.exp_m1()
    }
}

/// The three additive pieces of `A V`: time derivative, drift and diffusion terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorTerms {
    pub time: f64,
    pub drift: f64,
    pub diffusion: f64,
}

impl GeneratorTerms {
    pub fn total(&self) -> f64 {
        self.time + self.drift + self.diffusion
    }

    /// Sum of absolute values; the natural scale for relative comparisons when
    /// the terms cancel.
    pub fn magnitude(&self) -> f64 {
        self.time.abs() + self.drift.abs() + self.diffusion.abs()
    }
}

fn require_interior(x: f64) -> Result<()> {
    if x > 0.0 && x < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "generator requires 0 < x < 1, got {x}"
        )))
    }
}

/// Grouped form for `e^{ct} y^{-m}` near an endpoint at distance `y`, with
/// `toward` the mutation rate pushing away from that endpoint and `away` the other.
#[inline]
fn lower_end_grouped(toward: f64, away: f64, epsilon: f64, m: f64, c: f64, t: f64, y: f64) -> f64 {
    let q = epsilon * epsilon * m * (m + 1.0) / 2.0;
    (c * t).exp() * y.powf(-m - 1.0) * (-m * toward + q + (c + m * (toward + away) - q) * y)
}

/// Closed-form `A V(t, x)` grouped as in the Itô expansion.
///
/// `UpperEnd` is the `LowerEnd` expression of the mirrored model at `1 - x`.
/// `Boundary` is `-n B(x) x^{-n-1} + n(n+1)ε²/2 · x(1-x) x^{-n-2}`; `t` is ignored.
pub fn generator_apply(p: &ModelParams, spec: &LyapunovSpec, t: f64, x: StateValue) -> Result<f64> {
    let x = x.get();
    require_interior(x)?;
    Ok(grouped_unchecked(p, spec, t, x))
}

pub(crate) fn grouped_unchecked(p: &ModelParams, spec: &LyapunovSpec, t: f64, x: f64) -> f64 {
    let (m, c, e) = (spec.exponent, spec.rate, p.epsilon());
    match spec.kind {
        LyapunovKind::LowerEnd => lower_end_grouped(p.a(), p.b(), e, m, c, t, x),
        LyapunovKind::UpperEnd => lower_end_grouped(p.b(), p.a(), e, m, c, t, 1.0 - x),
        LyapunovKind::Boundary => {
            let n = m;
            let sigma_sq = x * (1.0 - x);
            -n * p.drift_raw(x) * x.powf(-n - 1.0)
                + n * (n + 1.0) * e * e / 2.0 * sigma_sq * x.powf(-n - 2.0)
        }
    }
}

/// Raw generator terms `c V`, `B V'`, `(ε²/2) x(1-x) V''` from analytic derivatives.
pub fn generator_terms(
    p: &ModelParams,
    spec: &LyapunovSpec,
    t: f64,
    x: StateValue,
) -> Result<GeneratorTerms> {
    let x = x.get();
    require_interior(x)?;
    let (m, c) = (spec.exponent, spec.rate);
    let v = spec.value(t, x);
    let (dv, d2v) = match spec.kind {
        LyapunovKind::LowerEnd | LyapunovKind::Boundary => (-m * v / x, m * (m + 1.0) * v / (x * x)),
        LyapunovKind::UpperEnd => {
            let y = 1.0 - x;
            (m * v / y, m * (m + 1.0) * v / (y * y))
        }
    };
    Ok(GeneratorTerms {
        time: c * v,
        drift: p.drift_raw(x) * dv,
        diffusion: p.half_noise_sq() * x * (1.0 - x) * d2v,
    })
}

fn central_terms(p: &ModelParams, spec: &LyapunovSpec, t: f64, x: f64, h: f64) -> GeneratorTerms {
    let v = spec.value(t, x);
    let up = spec.relative_increment(0.0, x, h);
    let down = spec.relative_increment(0.0, x, -h);
    let t_up = spec.relative_increment(h, x, 0.0);
    let t_down = spec.relative_increment(-h, x, 0.0);
    GeneratorTerms {
        time: v * (t_up - t_down) / (2.0 * h),
        drift: p.drift_raw(x) * v * (up - down) / (2.0 * h),
        diffusion: p.half_noise_sq() * x * (1.0 - x) * v * (up + down) / (h * h),
    }
}

/// Finite-difference generator terms: central differences at steps `h` and
/// `h/2`, combined by one Richardson step.
pub fn generator_terms_fd(
    p: &ModelParams,
    spec: &LyapunovSpec,
    t: f64,
    x: StateValue,
    h: f64,
) -> Result<GeneratorTerms> {
    let x = x.get();
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::Domain(format!("finite-difference step must be > 0, got {h}")));
    }
    if !(x - h > 0.0 && x + h < 1.0) {
        return Err(Error::Domain(format!(
            "stencil [{}, {}] leaves (0, 1)",
            x - h,
            x + h
        )));
    }
    let coarse = central_terms(p, spec, t, x, h);
    let fine = central_terms(p, spec, t, x, h / 2.0);
    let richardson = |f: f64, c: f64| (4.0 * f - c) / 3.0;
    Ok(GeneratorTerms {
        time: richardson(fine.time, coarse.time),
        drift: richardson(fine.drift, coarse.drift),
        diffusion: richardson(fine.diffusion, coarse.diffusion),
    })
}

/// Finite-difference approximation of `A V(t, x)` with stencil half-width `h`.
pub fn generator_apply_fd(
    p: &ModelParams,
    spec: &LyapunovSpec,
    t: f64,
    x: StateValue,
    h: f64,
) -> Result<f64> {
    generator_terms_fd(p, spec, t, x, h).map(|g| g.total())
}

/// `|value - reference| / max(|reference|, scale)`.
pub fn relative_discrepancy(value: f64, reference: f64, scale: f64) -> f64 {
    let denom = reference.abs().max(scale);
    if denom == 0.0 {
        (value - reference).abs()
    } else {
        (value - reference).abs() / denom
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> ModelParams {
        ModelParams::new(1.0, 1.0, 1.0).unwrap()
    }

    fn sv(x: f64) -> StateValue {
        StateValue::new(x).unwrap()
    }

    #[test]
    fn zero_exponent_leaves_only_time_derivative() {
        let p = ModelParams::new(2.0, 3.0, 0.8).unwrap();
        let spec = LyapunovSpec::lower_end(0.0, 1.3).unwrap();
        for &x in &[0.1, 0.5, 0.9] {
            let g = generator_apply(&p, &spec, 0.7, sv(x)).unwrap();
            let expect = 1.3 * (1.3f64 * 0.7).exp();
            assert!((g - expect).abs() <= 1e-14 * expect);
            let fd = generator_apply_fd(&p, &spec, 0.7, sv(x), DEFAULT_FD_STEP).unwrap();
            assert!((fd - expect).abs() <= 1e-8 * expect);
        }
    }

    #[test]
    fn lower_end_reference_value() {
        let spec = LyapunovSpec::lower_end(0.5, 1.0).unwrap();
        let g = generator_apply(&unit(), &spec, 0.0, sv(0.5)).unwrap();
        let expect = 0.6875 * 0.5f64.powf(-1.5);
        assert!((g - expect).abs() < 1e-12);
        assert!((g - 1.944544).abs() < 1e-6);
        let fd = generator_apply_fd(&unit(), &spec, 0.0, sv(0.5), 1e-5).unwrap();
        assert!((fd - g).abs() / g.abs() <= 1e-6);
    }

    #[test]
    fn boundary_matches_finite_differences() {
        let spec = LyapunovSpec::boundary(0.5).unwrap();
        let g = generator_apply(&unit(), &spec, 0.0, sv(0.25)).unwrap();
        let fd = generator_apply_fd(&unit(), &spec, 0.0, sv(0.25), 1e-5).unwrap();
        assert!((fd - g).abs() / g.abs() <= 1e-6, "{g} vs {fd}");
    }

    #[test]
    fn grouped_form_equals_raw_terms() {
        let p = ModelParams::new(0.7, 2.2, 0.9).unwrap();
        for spec in [
            LyapunovSpec::lower_end(0.3, 0.4).unwrap(),
            LyapunovSpec::upper_end(0.3, 0.4).unwrap(),
            LyapunovSpec::boundary(0.6).unwrap(),
        ] {
            for &x in &[0.03, 0.3, 0.77] {
                let g = generator_apply(&p, &spec, 0.2, sv(x)).unwrap();
                let raw = generator_terms(&p, &spec, 0.2, sv(x)).unwrap();
                assert!(relative_discrepancy(g, raw.total(), raw.magnitude()) < 1e-13);
            }
        }
    }

    #[test]
    fn upper_end_mirrors_lower_end_exactly() {
        let p = ModelParams::new(1.3, 0.4, 0.6).unwrap();
        let lower = LyapunovSpec::lower_end(0.2, 0.9).unwrap();
        let upper = LyapunovSpec::upper_end(0.2, 0.9).unwrap();
        // dyadic points: 1 - (1 - x) == x in floating point
        for k in 1..64 {
            let x = k as f64 / 64.0;
            let lo = generator_apply(&p, &lower, 0.3, sv(x)).unwrap();
            let hi = generator_apply(&p.swapped(), &upper, 0.3, sv(1.0 - x)).unwrap();
            assert_eq!(lo.to_bits(), hi.to_bits());
        }
    }

    #[test]
    fn second_order_convergence_of_plain_stencil() {
        // the unextrapolated stencil error shrinks by ~4 per halving
        let p = ModelParams::new(1.5, 0.8, 1.1).unwrap();
        let spec = LyapunovSpec::lower_end(0.4, 0.5).unwrap();
        let x = 0.2;
        let exact = generator_terms(&p, &spec, 0.0, sv(x)).unwrap().total();
        let e1 = (central_terms(&p, &spec, 0.0, x, 1e-2).total() - exact).abs();
        let e2 = (central_terms(&p, &spec, 0.0, x, 5e-3).total() - exact).abs();
        let ratio = e1 / e2;
        assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn domain_errors() {
        let spec = LyapunovSpec::lower_end(0.5, 1.0).unwrap();
        assert!(generator_apply(&unit(), &spec, 0.0, sv(0.0)).is_err());
        assert!(generator_apply(&unit(), &spec, 0.0, sv(1.0)).is_err());
        assert!(generator_apply_fd(&unit(), &spec, 0.0, sv(1e-6), 1e-5).is_err());
        assert!(generator_apply_fd(&unit(), &spec, 0.0, sv(0.5), 0.0).is_err());
        assert!(LyapunovSpec::lower_end(-0.1, 1.0).is_err());
        assert!(LyapunovSpec::upper_end(0.1, -1.0).is_err());
    }

    fn lower_end_case() -> impl proptest::strategy::Strategy<Value = (ModelParams, f64, f64, f64, f64)> {
        use proptest::prelude::*;
        (0.1..5.0f64, 0.1..5.0f64, 0.1..2.0f64, 0.0..1.0f64, 0.0..3.0f64, 0.0..2.0f64, 0.0..1.0f64)
            .prop_filter_map("Feller", |(a, b, e, mf, c, t, u)| {
                let p = ModelParams::new(a, b, e).ok()?;
                let m_max = 2.0 * a.min(b) / (e * e) - 1.0;
                if m_max <= 0.0 {
                    return None;
                }
                let m = (mf * m_max).min(20.0);
                // log-uniform distance, resolved by the stencil and finite
                let lo = (1e-3 * (m + 1.0)).clamp(1e-4, 0.5);
                let x = (lo.ln() + u * ((1.0 - 1e-4f64).ln() - lo.ln())).exp();
                Some((p, m, c, t, x))
            })
    }

    proptest::proptest! {
        #[test]
        fn closed_form_matches_fd((p, m, c, t, x) in lower_end_case()) {
            for (spec, at) in [
                (LyapunovSpec::lower_end(m, c).unwrap(), x),
                (LyapunovSpec::upper_end(m, c).unwrap(), 1.0 - x),
            ] {
                let closed = generator_apply(&p, &spec, t, sv(at)).unwrap();
                let terms = generator_terms(&p, &spec, t, sv(at)).unwrap();
                let fd = generator_apply_fd(&p, &spec, t, sv(at), DEFAULT_FD_STEP).unwrap();
                proptest::prop_assert!(relative_discrepancy(fd, closed, terms.magnitude()) <= 1e-6);
                proptest::prop_assert!(relative_discrepancy(closed, terms.total(), terms.magnitude()) <= 1e-12);
            }
        }

        #[test]
        fn mirror_symmetry((p, m, c, t, x) in lower_end_case()) {
            let lo = generator_apply(&p, &LyapunovSpec::lower_end(m, c).unwrap(), t, sv(x)).unwrap();
            let hi = generator_apply(&p.swapped(), &LyapunovSpec::upper_end(m, c).unwrap(), t, sv(1.0 - x)).unwrap();
            // 1 - (1 - x) may differ from x in the last bit
            proptest::prop_assert!(relative_discrepancy(hi, lo, lo.abs()) <= 1e-9);
        }
    }
}
