//! Monte Carlo estimates and verdicts against the recurrence, inattainability
//! and convergence bounds.
//!
//! All checks are one-sided: a bound passes when `mean + 3 · std_error` does
//! not exceed it. Thresholds are policy choices collected in [`VerifyPolicy`].

mod boundary;
mod distribution;
mod recurrence;

pub use boundary::{hit_probability_report, hit_rule, touch_fraction, verify_boundary_avoidance, verify_hit_probability};
pub use distribution::{
    decay_report, empirical_distribution, empirical_distributions, fit_log_linear, fit_tv_decay,
    stationary_report, tv_between, tv_distance, verify_stationarity, DistributionEstimate, TvDecayFit,
};
pub use recurrence::{
    additive_functional_report, exp_moment_report, run_recurrence, verify_additive_functional,
    verify_exp_moment, AdditiveFunctionalReport,
};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Two-sided 99% normal quantile.
pub const Z_99: f64 = 2.575_829_303_548_901;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifyPolicy {
    /// Number of standard errors added to the estimate before comparing.
    pub sigma_multiplier: f64,
    pub censor_tolerance: f64,
    /// Upper limit of the sample kurtosis before a verdict degrades to Inconclusive.
    pub kurtosis_threshold: f64,
    pub boundary_touch_tolerance: f64,
    pub stationary_tv_tolerance: f64,
    pub bins: usize,
}

impl Default for VerifyPolicy {
    fn default() -> Self {
        Self {
            sigma_multiplier: 3.0,
            censor_tolerance: 0.0,
            kurtosis_threshold: 100.0,
            boundary_touch_tolerance: 1e-3,
            stationary_tv_tolerance: 0.05,
            bins: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n: usize,
    pub censored_fraction: f64,
    pub ci99_halfwidth: f64,
    /// Sample kurtosis `m4 / m2²`; zero for a degenerate sample.
    pub kurtosis: f64,
}

impl MonteCarloEstimate {
    /// Summarizes samples in the given order; sums run sequentially so the
    /// result is bit-stable for a fixed order.
    pub fn from_samples(samples: &[f64], censored: usize) -> Self {
        let n = samples.len();
        let nf = n as f64;
        let mean = samples.iter().sum::<f64>() / nf;
        let (m2, m4) = samples.iter().fold((0.0, 0.0), |(s2, s4), &v| {
            let d = v - mean;
            let d2 = d * d;
            (s2 + d2, s4 + d2 * d2)
        });
        let variance = if n > 1 { m2 / (nf - 1.0) } else { 0.0 };
        let std_error = (variance / nf).sqrt();
        let kurtosis = if m2 > 0.0 { nf * m4 / (m2 * m2) } else { 0.0 };
        Self {
            mean,
            std_error,
            n,
            censored_fraction: censored as f64 / nf,
            ci99_halfwidth: Z_99 * std_error,
            kurtosis,
        }
    }

    /// Binomial proportion with its standard error `√(p(1-p)/n)`.
    pub fn proportion(successes: usize, n: usize, censored: usize) -> Self {
        let nf = n as f64;
        let p = successes as f64 / nf;
        let std_error = (p * (1.0 - p) / nf).sqrt();
        Self {
            mean: p,
            std_error,
            n,
            censored_fraction: censored as f64 / nf,
            ci99_halfwidth: Z_99 * std_error,
            kurtosis: 0.0,
        }
    }

    /// A computed (non-random) quantity over `n` evaluations.
    pub fn deterministic(value: f64, n: usize) -> Self {
        Self {
            mean: value,
            std_error: 0.0,
            n,
            censored_fraction: 0.0,
            ci99_halfwidth: 0.0,
            kurtosis: 0.0,
        }
    }

    pub fn upper(&self, sigma_multiplier: f64) -> f64 {
        self.mean + sigma_multiplier * self.std_error
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub quantity: String,
    /// Short name of the inequality being checked.
    pub bound_tag: String,
    pub bound_value: f64,
    #[serde(flatten)]
    pub estimate: MonteCarloEstimate,
    pub verdict: Verdict,
    /// Verdict is reported but does not count toward the overall outcome.
    pub informational: bool,
    pub notes: String,
    pub extras: BTreeMap<String, f64>,
}

impl VerificationReport {
    /// Re-derives the verdict of an upper-bound check from the stored fields.
    /// `kurtosis_guard` is set for the `e^{c τ}` check only.
    pub fn recheck_upper_bound(&self, policy: &VerifyPolicy, kurtosis_guard: bool) -> Verdict {
        upper_bound_verdict(&self.estimate, self.bound_value, policy, kurtosis_guard)
    }
}

pub(crate) const POLICY_NOTE: &str =
    "pass thresholds are artifact policy (mean + 3 standard errors against the bound)";

pub(crate) fn upper_bound_verdict(
    est: &MonteCarloEstimate,
    bound: f64,
    policy: &VerifyPolicy,
    kurtosis_guard: bool,
) -> Verdict {
    let heavy_tailed = kurtosis_guard && est.kurtosis > policy.kurtosis_threshold;
    if est.censored_fraction > policy.censor_tolerance || heavy_tailed {
        Verdict::Inconclusive
    } else if est.upper(policy.sigma_multiplier) <= bound {
        Verdict::Pass
    } else {
        Verdict::Fail
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn estimate_of_constant_sample() {
        let e = MonteCarloEstimate::from_samples(&[1.0; 10], 0);
        assert_eq!(e.mean, 1.0);
        assert_eq!(e.std_error, 0.0);
        assert_eq!(e.kurtosis, 0.0);
        assert_eq!(e.censored_fraction, 0.0);
    }

    #[test]
    fn estimate_moments() {
        let e = MonteCarloEstimate::from_samples(&[1.0, 2.0, 3.0, 4.0], 1);
        assert_eq!(e.mean, 2.5);
        let var = (2.25 + 0.25 + 0.25 + 2.25) / 3.0;
        assert!((e.std_error - (var / 4.0f64).sqrt()).abs() < 1e-15);
        assert_eq!(e.censored_fraction, 0.25);
        // m4/m2² for a uniform 4-point sample
        let m2 = 5.0 / 4.0;
        let m4 = (2.0 * 1.5f64.powi(4) + 2.0 * 0.5f64.powi(4)) / 4.0;
        assert!((e.kurtosis - m4 / (m2 * m2)).abs() < 1e-12);
    }

    #[test]
    fn verdict_rules() {
        let policy = VerifyPolicy::default();
        let mut est = MonteCarloEstimate::from_samples(&[1.0, 1.2, 0.9, 1.1], 0);
        assert_eq!(upper_bound_verdict(&est, 10.0, &policy, true), Verdict::Pass);
        assert_eq!(upper_bound_verdict(&est, 1.0, &policy, true), Verdict::Fail);
        est.censored_fraction = 0.25;
        assert_eq!(upper_bound_verdict(&est, 10.0, &policy, true), Verdict::Inconclusive);
        est.censored_fraction = 0.0;
        est.kurtosis = 1e3;
        assert_eq!(upper_bound_verdict(&est, 10.0, &policy, true), Verdict::Inconclusive);
        assert_eq!(upper_bound_verdict(&est, 10.0, &policy, false), Verdict::Pass);
    }

    #[test]
    fn heavy_tail_sample_trips_kurtosis() {
        let mut v = vec![1.0; 10_000];
        v[17] = 1e6;
        let e = MonteCarloEstimate::from_samples(&v, 0);
        assert!(e.kurtosis > 100.0);
    }

    #[test]
    fn report_json_has_stable_field_names() {
        let r = VerificationReport {
            quantity: "q".into(),
            bound_tag: "t".into(),
            bound_value: 2.0,
            estimate: MonteCarloEstimate::from_samples(&[1.0, 2.0], 0),
            verdict: Verdict::Pass,
            informational: false,
            notes: String::new(),
            extras: BTreeMap::new(),
        };
        let v = serde_json::to_value(&r).unwrap();
        for key in ["quantity", "bound_value", "mean", "std_error", "n", "censored_fraction", "verdict", "notes"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(v["verdict"], "Pass");
    }
}
