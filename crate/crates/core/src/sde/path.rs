use crate::error::{Error, Result};
use crate::model::ModelParams;

use super::rng::{NoiseSource, PathRng};
use super::scheme::Stepper;
use super::{PathRecord, PathRequest, SimConfig, StopReason, Trigger};

#[inline]
fn fired(triggers: &[(Trigger, StopReason)], x: f64) -> Option<StopReason> {
    triggers.iter().find_map(|&(t, reason)| {
        let hit = match t {
            Trigger::Inside { lo, hi } => x >= lo && x <= hi,
            Trigger::AtMost(level) => x <= level,
            Trigger::AtLeast(level) => x >= level,
        };
        hit.then_some(reason)
    })
}

/// Runs path `path_index` with its own stream derived from the master seed.
pub fn run_path(
    p: &ModelParams,
    cfg: &SimConfig,
    x0: f64,
    request: &PathRequest,
    path_index: usize,
) -> Result<PathRecord> {
    let mut noise = PathRng::new(cfg.master_seed, path_index as u64);
    run_path_with_noise(p, cfg, x0, request, path_index, &mut noise)
}

/// Path driver with an explicit noise source.
///
/// The stopping condition is tested at every grid point `k dt`, starting at
/// `k = 0`. Functionals accumulate `f(X_k) dt` for every step taken before
/// the stop.
pub fn run_path_with_noise<N: NoiseSource>(
    p: &ModelParams,
    cfg: &SimConfig,
    x0: f64,
    request: &PathRequest,
    path_index: usize,
    noise: &mut N,
) -> Result<PathRecord> {
    cfg.validate()?;
    if !(x0 >= cfg.clamp_eps && x0 <= 1.0 - cfg.clamp_eps) {
        return Err(Error::Config(format!(
            "initial state {x0} outside [{}, {}]",
            cfg.clamp_eps,
            1.0 - cfg.clamp_eps
        )));
    }
    let triggers = match &request.stop {
        Some(rule) => rule.compile()?,
        None => Vec::new(),
    };
    let n_steps = cfg.n_steps();
    // (grid step, output slot), visited in step order
    let mut snapshot_steps = Vec::with_capacity(request.snapshot_times.len());
    for (slot, &t) in request.snapshot_times.iter().enumerate() {
        let k = (t / cfg.dt).round();
        if !(t >= 0.0 && k <= n_steps as f64) {
            return Err(Error::Config(format!(
                "snapshot time {t} outside [0, t_max = {}]",
                cfg.t_max
            )));
        }
        snapshot_steps.push((k as u64, slot));
    }
    snapshot_steps.sort_unstable();

    let stepper = Stepper::new(p, cfg);
    let mut snapshots = vec![f64::NAN; snapshot_steps.len()];
    let mut integrals = vec![0.0; request.functionals.len()];
    let (mut min_x, mut max_x) = (x0, x0);
    let mut clamp_events = 0u64;
    let mut x = x0;
    let mut k = 0u64;
    let mut next_snapshot = 0;
    let reason = loop {
        while let Some(&(sk, slot)) = snapshot_steps.get(next_snapshot) {
            if sk != k {
                break;
            }
            snapshots[slot] = x;
            next_snapshot += 1;
        }
        if let Some(reason) = fired(&triggers, x) {
            break reason;
        }
        if k == n_steps {
            break if triggers.is_empty() {
                StopReason::Horizon
            } else {
                StopReason::Censored
            };
        }
        for (acc, f) in integrals.iter_mut().zip(&request.functionals) {
            *acc += f.eval(x) * cfg.dt;
        }
        let out = stepper.advance(x, noise.next_normal());
        x = out.x;
        clamp_events += out.clamped as u64;
        min_x = min_x.min(x);
        max_x = max_x.max(x);
        k += 1;
    };

    Ok(PathRecord {
        path_index,
        initial_x: x0,
        stop_time: cfg.time_of(k),
        stop_reason: reason,
        final_x: x,
        integrals,
        snapshots,
        clamp_events,
        min_x,
        max_x,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sde::{Functional, Scheme, SequenceNoise, StoppingRule, DEFAULT_CLAMP_EPS};

    fn cfg(dt: f64, t_max: f64) -> SimConfig {
        SimConfig::new(Scheme::EulerClamp, dt, t_max, DEFAULT_CLAMP_EPS, 5, 1).unwrap()
    }

    #[test]
    fn immediate_stop_inside_target() {
        let p = ModelParams::new(1.0, 1.0, 1.0).unwrap();
        let req = PathRequest::stopping(StoppingRule::TauAlpha { alpha: 0.1 })
            .with_functional(Functional::InversePower { exponent: 1.5 });
        let rec = run_path(&p, &cfg(1e-3, 1.0), 0.3, &req, 0).unwrap();
        assert_eq!(rec.stop_time, 0.0);
        assert_eq!(rec.stop_reason, StopReason::TauAlpha);
        assert_eq!(rec.integrals, vec![0.0]);
        assert_eq!(rec.clamp_events, 0);
    }

    #[test]
    fn deterministic_limit_matches_ode() {
        // ẋ = 1 - 2x from 0.01 reaches 0.1 at t = ½ ln(0.49 / 0.4)
        let p = ModelParams::new(1.0, 1.0, 1e-9).unwrap();
        let dt = 1e-5;
        let req = PathRequest::stopping(StoppingRule::TauAlpha { alpha: 0.1 });
        let rec = run_path(&p, &cfg(dt, 5.0), 0.01, &req, 0).unwrap();
        let exact = 0.5 * (0.49f64 / 0.4).ln();
        assert!((rec.stop_time - exact).abs() < 2.0 * dt, "{} vs {exact}", rec.stop_time);
    }

    #[test]
    fn grid_crossing_step_is_exact() {
        // zero noise: x_k = 1/2 - (1/2 - x0)(1 - 2dt)^k for a = b = 1
        let p = ModelParams::new(1.0, 1.0, 1.0).unwrap();
        let (dt, x0, alpha): (f64, f64, f64) = (1e-3, 0.01, 0.2);
        let k = ((0.5 - alpha) / (0.5 - x0)).ln() / (1.0 - 2.0 * dt).ln();
        let k = k.ceil() as u64;
        let req = PathRequest::stopping(StoppingRule::TauAlpha { alpha });
        let rec =
            run_path_with_noise(&p, &cfg(dt, 10.0), x0, &req, 0, &mut SequenceNoise::zeros()).unwrap();
        assert_eq!(rec.stop_time, k as f64 * dt);
    }

    #[test]
    fn left_endpoint_functional() {
        let p = ModelParams::new(1.0, 1.0, 1.0).unwrap();
        let dt = 1e-2;
        let req = PathRequest::stopping(StoppingRule::TKappa { kappa: 0.5 })
            .with_functional(Functional::InversePower { exponent: 1.0 });
        // one jump from 0.1 straight past 0.5
        let mut noise = SequenceNoise::new(vec![20.0]);
        let rec = run_path_with_noise(&p, &cfg(dt, 1.0), 0.1, &req, 0, &mut noise).unwrap();
        assert_eq!(rec.stop_time, dt);
        assert!((rec.integrals[0] - dt / 0.1).abs() < 1e-15);
    }

    #[test]
    fn censoring_and_horizon() {
        let p = ModelParams::new(1.0, 1.0, 1.0).unwrap();
        let c = cfg(1e-3, 0.01);
        let req = PathRequest::stopping(StoppingRule::GammaBeta { beta: 1e-9 });
        let rec = run_path(&p, &c, 0.5, &req, 0).unwrap();
        assert_eq!(rec.stop_reason, StopReason::Censored);
        assert!((rec.stop_time - 0.01).abs() < 1e-15);
        let free = run_path(&p, &c, 0.5, &PathRequest::default(), 0).unwrap();
        assert_eq!(free.stop_reason, StopReason::Horizon);
        assert!(free.min_x >= c.clamp_eps && free.max_x <= 1.0 - c.clamp_eps);
    }

    #[test]
    fn first_of_reports_the_rule_that_fired() {
        let p = ModelParams::new(1.0, 1.0, 1.0).unwrap();
        let rule = StoppingRule::FirstOf(vec![
            StoppingRule::GammaBeta { beta: 0.05 },
            StoppingRule::TKappa { kappa: 0.2 },
        ]);
        let req = PathRequest::stopping(rule);
        let mut down = SequenceNoise::new(vec![-30.0]);
        let rec = run_path_with_noise(&p, &cfg(1e-2, 1.0), 0.1, &req, 0, &mut down).unwrap();
        assert_eq!(rec.stop_reason, StopReason::GammaBeta);
        assert!(rec.final_x <= 0.05);
        let mut up = SequenceNoise::new(vec![30.0]);
        let rec = run_path_with_noise(&p, &cfg(1e-2, 1.0), 0.1, &req, 0, &mut up).unwrap();
        assert_eq!(rec.stop_reason, StopReason::TKappa);
    }

    #[test]
    fn snapshots_on_the_grid() {
        let p = ModelParams::new(1.0, 1.0, 1.0).unwrap();
        let req = PathRequest::default().with_snapshots(&[0.0, 0.5, 1.0]);
        let rec = run_path(&p, &cfg(1e-2, 1.0), 0.3, &req, 0).unwrap();
        assert_eq!(rec.snapshots[0], 0.3);
        assert_eq!(rec.snapshots[2], rec.final_x);
        assert!(rec.snapshots.iter().all(|v| v.is_finite()));
        let bad = PathRequest::default().with_snapshots(&[2.0]);
        assert!(run_path(&p, &cfg(1e-2, 1.0), 0.3, &bad, 0).is_err());
    }

    #[test]
    fn rejects_bad_requests() {
        let p = ModelParams::new(1.0, 1.0, 1.0).unwrap();
        let c = cfg(1e-2, 1.0);
        let empty = PathRequest::stopping(StoppingRule::FirstOf(vec![]));
        assert!(matches!(run_path(&p, &c, 0.3, &empty, 0), Err(Error::Config(_))));
        let wide = PathRequest::stopping(StoppingRule::TauAlpha { alpha: 0.5 });
        assert!(run_path(&p, &c, 0.3, &wide, 0).is_err());
        assert!(run_path(&p, &c, 0.0, &PathRequest::default(), 0).is_err());
    }
}
