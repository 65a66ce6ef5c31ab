use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::{feller_satisfied, ModelParams, StateValue};
use crate::planner::{bound_hit_probability, BoundaryPlan, Endpoint};
use crate::sde::{run_batch, PathRecord, PathRequest, SimConfig, StoppingRule};

use super::{upper_bound_verdict, MonteCarloEstimate, Verdict, VerificationReport, VerifyPolicy, POLICY_NOTE};

/// Fraction of paths with at least one clamp event over `[0, cfg.t_max]`.
pub fn touch_fraction(p: &ModelParams, cfg: &SimConfig, x0: f64) -> Result<MonteCarloEstimate> {
    StateValue::interior(x0)?;
    let records = run_batch(p, cfg, x0, &PathRequest::default())?;
    let touched = records.iter().filter(|r| r.clamp_events > 0).count();
    Ok(MonteCarloEstimate::proportion(touched, records.len(), 0))
}

/// Boundary-touch proxy for inattainability of `{0, 1}`, optionally with a
/// contrast run for a second (typically Feller-violating) model.
pub fn verify_boundary_avoidance(
    p: &ModelParams,
    cfg: &SimConfig,
    x0: f64,
    horizon: f64,
    policy: &VerifyPolicy,
    contrast: Option<&ModelParams>,
) -> Result<VerificationReport> {
    let cfg = SimConfig { t_max: horizon, ..*cfg };
    cfg.validate()?;
    let est = touch_fraction(p, &cfg, x0)?;
    let verdict = if est.mean <= policy.boundary_touch_tolerance {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    let mut extras = BTreeMap::new();
    extras.insert("horizon".into(), horizon);
    extras.insert("clamp_eps".into(), cfg.clamp_eps);
    extras.insert("dt".into(), cfg.dt);
    let mut notes = vec![
        "touch = any step leaving [clamp_eps, 1 - clamp_eps]; the continuum process never touches".to_string(),
        "tolerance is artifact policy".to_string(),
    ];
    if !feller_satisfied(p) {
        notes.push("model violates the Feller condition".into());
    }
    if let Some(q) = contrast {
        let c = touch_fraction(q, &cfg, x0)?;
        extras.insert("contrast_touch_fraction".into(), c.mean);
        extras.insert("contrast_std_error".into(), c.std_error);
        extras.insert("contrast_a".into(), q.a());
        extras.insert("contrast_b".into(), q.b());
        extras.insert("contrast_epsilon".into(), q.epsilon());
        notes.push(format!(
            "contrast model (a={}, b={}, epsilon={}, feller={}) touch fraction {}",
            q.a(),
            q.b(),
            q.epsilon(),
            feller_satisfied(q),
            c.mean
        ));
    }
    Ok(VerificationReport {
        quantity: "boundary_touch_fraction".into(),
        bound_tag: "boundary-inattainability".into(),
        bound_value: policy.boundary_touch_tolerance,
        estimate: est,
        verdict,
        informational: false,
        notes: notes.join("; "),
        extras,
    })
}

/// Stop at level `beta` or on leaving the κ-neighbourhood of the plan's endpoint.
pub fn hit_rule(plan: &BoundaryPlan, beta: f64) -> StoppingRule {
    match plan.endpoint {
        Endpoint::Zero => StoppingRule::FirstOf(vec![
            StoppingRule::GammaBeta { beta },
            StoppingRule::TKappa { kappa: plan.kappa },
        ]),
        Endpoint::One => StoppingRule::FirstOf(vec![
            StoppingRule::TKappa { kappa: beta },
            StoppingRule::GammaBeta {
                beta: 1.0 - plan.kappa,
            },
        ]),
    }
}

/// Hit-probability check from an existing batch stopped by the hit rule.
pub fn hit_probability_report(
    plan: &BoundaryPlan,
    x0: f64,
    beta: f64,
    records: &[PathRecord],
    policy: &VerifyPolicy,
) -> Result<VerificationReport> {
    if records.is_empty() {
        return Err(Error::Config("empty batch".into()));
    }
    let bound = bound_hit_probability(plan, StateValue::interior(x0)?, beta)?;
    let level = plan.distance(beta);
    let hits = records.iter().filter(|r| plan.distance(r.final_x) <= level).count();
    let censored = records.iter().filter(|r| r.is_censored()).count();
    let est = MonteCarloEstimate::proportion(hits, records.len(), censored);
    let verdict = upper_bound_verdict(&est, bound, policy, false);
    let mut extras = BTreeMap::new();
    extras.insert("estimate_plus_3se".into(), est.upper(policy.sigma_multiplier));
    extras.insert("beta".into(), beta);
    extras.insert("kappa".into(), plan.kappa);
    extras.insert("n_exponent".into(), plan.n);
    Ok(VerificationReport {
        quantity: "hit_probability".into(),
        bound_tag: "chebyshev-hit-bound".into(),
        bound_value: bound,
        estimate: est,
        verdict,
        informational: false,
        notes: [
            "event: level beta reached before leaving the kappa-neighbourhood, within t_max",
            POLICY_NOTE,
        ]
        .join("; "),
        extras,
    })
}

/// Empirical probability of reaching `beta` before exiting `(0, κ)` (mirrored
/// for endpoint 1) against the Chebyshev bound `(β/x)^n`.
pub fn verify_hit_probability(
    p: &ModelParams,
    plan: &BoundaryPlan,
    x0: f64,
    beta: f64,
    cfg: &SimConfig,
    policy: &VerifyPolicy,
) -> Result<VerificationReport> {
    plan.validate(p)?;
    let (dx, db) = (plan.distance(x0), plan.distance(beta));
    if !(0.0 < db && db < dx && dx < plan.kappa) {
        return Err(Error::Ordering(format!(
            "need 0 < beta < x0 < kappa in distance from the endpoint (beta {db}, x0 {dx}, kappa {})",
            plan.kappa
        )));
    }
    let records = run_batch(p, cfg, x0, &PathRequest::stopping(hit_rule(plan, beta)))?;
    hit_probability_report(plan, x0, beta, &records, policy)
}
