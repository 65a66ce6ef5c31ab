use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{require_feller, ModelParams};
use crate::sde::{run_batch, PathRequest, SimConfig};
use crate::stationary::StationaryLaw;

use super::{MonteCarloEstimate, Verdict, VerificationReport, VerifyPolicy};

/// Histogram of a sample over `K` equal-width bins of `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionEstimate {
    pub bin_edges: Vec<f64>,
    pub masses: Vec<f64>,
    pub sample_count: usize,
}

impl DistributionEstimate {
    pub fn from_samples(samples: &[f64], bins: usize) -> Result<Self> {
        if bins == 0 || samples.is_empty() {
            return Err(Error::Config("histogram needs bins >= 1 and a nonempty sample".into()));
        }
        let mut counts = vec![0usize; bins];
        for &x in samples {
            if !(0.0..=1.0).contains(&x) {
                return Err(Error::Domain(format!("sample {x} outside [0, 1]")));
            }
            let i = ((x * bins as f64) as usize).min(bins - 1);
            counts[i] += 1;
        }
        let n = samples.len() as f64;
        Ok(Self {
            bin_edges: (0..=bins).map(|i| i as f64 / bins as f64).collect(),
            masses: counts.into_iter().map(|c| c as f64 / n).collect(),
            sample_count: samples.len(),
        })
    }

    pub fn bins(&self) -> usize {
        self.masses.len()
    }
}

/// `½ Σ |p_i - q_i|` over a shared partition.
pub fn tv_between(p: &[f64], q: &[f64]) -> f64 {
    assert_eq!(p.len(), q.len(), "histograms must share bins");
    let s: f64 = p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum();
    (0.5 * s).clamp(0.0, 1.0)
}

/// Discretized total variation distance between the histogram and the
/// stationary law on the histogram's bins.
pub fn tv_distance(est: &DistributionEstimate, p: &ModelParams) -> Result<f64> {
    let law = StationaryLaw::new(p)?;
    Ok(tv_between(&est.masses, &law.bin_masses(&est.bin_edges)))
}

/// Histograms of `X_t` across the batch, one per requested time, from a
/// single batch run to the latest time.
pub fn empirical_distributions(
    p: &ModelParams,
    cfg: &SimConfig,
    x0: f64,
    times: &[f64],
    bins: usize,
) -> Result<Vec<DistributionEstimate>> {
    let t_last = times.iter().copied().fold(0.0, f64::max);
    if times.iter().any(|&t| !(t >= 0.0 && t <= cfg.t_max)) {
        return Err(Error::Config(format!("snapshot times must lie in [0, {}]", cfg.t_max)));
    }
    if (t_last / cfg.dt).round() == 0.0 {
        let all = vec![x0; cfg.n_paths];
        return times.iter().map(|_| DistributionEstimate::from_samples(&all, bins)).collect();
    }
    let run_cfg = SimConfig { t_max: t_last, ..*cfg };
    let records = run_batch(p, &run_cfg, x0, &PathRequest::default().with_snapshots(times))?;
    (0..times.len())
        .map(|j| {
            let xs: Vec<f64> = records.iter().map(|r| r.snapshots[j]).collect();
            DistributionEstimate::from_samples(&xs, bins)
        })
        .collect()
}

pub fn empirical_distribution(
    p: &ModelParams,
    cfg: &SimConfig,
    x0: f64,
    t_snapshot: f64,
    bins: usize,
) -> Result<DistributionEstimate> {
    empirical_distributions(p, cfg, x0, &[t_snapshot], bins).map(|mut v| v.remove(0))
}

/// Expected discretized TV of an exact `n`-sample histogram from the law
/// itself, `½ Σ √(2 q_i (1 - q_i) / (π n))` (normal approximation).
pub fn sampling_noise_floor(reference: &[f64], n: usize) -> f64 {
    0.5 * reference
        .iter()
        .map(|&q| (2.0 * q * (1.0 - q) / (std::f64::consts::PI * n as f64)).sqrt())
        .sum::<f64>()
}

/// Snapshot TV at `t` against the stationary law, plus an occupation-time
/// histogram over the last 75% of `[0, t]` reported as an extra.
pub fn verify_stationarity(
    p: &ModelParams,
    cfg: &SimConfig,
    x0: f64,
    t: f64,
    policy: &VerifyPolicy,
) -> Result<VerificationReport> {
    require_feller(p)?;
    let law = StationaryLaw::new(p)?;
    let burn_in = 0.25 * t;
    let occupation_times: Vec<f64> = {
        let k = 64usize;
        (0..=k).map(|i| burn_in + (t - burn_in) * i as f64 / k as f64).collect()
    };
    let run_cfg = SimConfig { t_max: t, ..*cfg };
    let mut times = vec![t];
    times.extend(&occupation_times);
    let records = run_batch(p, &run_cfg, x0, &PathRequest::default().with_snapshots(&times))?;
    let snapshot: Vec<f64> = records.iter().map(|r| r.snapshots[0]).collect();
    let est = DistributionEstimate::from_samples(&snapshot, policy.bins)?;
    let reference = law.bin_masses(&est.bin_edges);
    let tv = tv_between(&est.masses, &reference);
    let pooled: Vec<f64> = records.iter().flat_map(|r| r.snapshots[1..].iter().copied()).collect();
    let occupation = DistributionEstimate::from_samples(&pooled, policy.bins)?;
    Ok(stationary_report(
        tv,
        tv_between(&occupation.masses, &reference),
        sampling_noise_floor(&reference, est.sample_count),
        est.sample_count,
        t,
        policy,
    ))
}

pub fn stationary_report(
    tv: f64,
    occupation_tv: f64,
    noise_floor: f64,
    n: usize,
    t: f64,
    policy: &VerifyPolicy,
) -> VerificationReport {
    let verdict = if tv <= policy.stationary_tv_tolerance {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    let mut extras = BTreeMap::new();
    extras.insert("snapshot_time".into(), t);
    extras.insert("bins".into(), policy.bins as f64);
    extras.insert("sampling_noise_floor".into(), noise_floor);
    extras.insert("occupation_tv".into(), occupation_tv);
    VerificationReport {
        quantity: "stationary_tv_distance".into(),
        bound_tag: "stationary-tv".into(),
        bound_value: policy.stationary_tv_tolerance,
        estimate: MonteCarloEstimate::deterministic(tv, n),
        verdict,
        informational: false,
        notes: [
            "reference law Beta(2a/eps^2, 2b/eps^2) is derived from the stationary Fokker-Planck equation",
            "bin masses by adaptive Gauss-Legendre quadrature",
            "sampling_noise_floor is the expected TV of an exact sample of this size on these bins",
            "occupation_tv pools 65 snapshots from the last 75% of the horizon (informational)",
            "tolerance is artifact policy",
        ]
        .join("; "),
        extras,
    }
}

/// Log-linear least-squares fit of the TV decay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TvDecayFit {
    pub rate: f64,
    pub intercept: f64,
    pub residuals: Vec<f64>,
    pub times: Vec<f64>,
    pub tv: Vec<f64>,
    /// Which snapshots were above the floor and entered the fit.
    pub used: Vec<bool>,
    pub tv_floor: f64,
}

/// Fits `ln TV(t) ≈ intercept - rate · t` on the points with `TV > floor`.
pub fn fit_log_linear(times: &[f64], tv: &[f64], floor: f64) -> Result<TvDecayFit> {
    if times.len() != tv.len() {
        return Err(Error::Config("times and TV values differ in length".into()));
    }
    let used: Vec<bool> = tv.iter().map(|&v| v > floor).collect();
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(tv)
        .zip(&used)
        .filter(|(_, &u)| u)
        .map(|((&t, &v), _)| (t, v.max(floor).ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::DegenerateFit(format!(
            "{} of {} snapshots above the TV floor {floor}; need 3",
            pts.len(),
            times.len()
        )));
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateFit("snapshot times coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mt;
    Ok(TvDecayFit {
        rate: -slope,
        intercept,
        residuals: pts.iter().map(|p| p.1 - (intercept + slope * p.0)).collect(),
        times: times.to_vec(),
        tv: tv.to_vec(),
        used,
        tv_floor: floor,
    })
}

/// TV to the stationary law at each snapshot time, fitted log-linearly.
/// The floor is `2/√n_paths`.
pub fn fit_tv_decay(
    p: &ModelParams,
    cfg: &SimConfig,
    x0: f64,
    snapshot_times: &[f64],
    bins: usize,
) -> Result<TvDecayFit> {
    require_feller(p)?;
    if snapshot_times.len() < 4 || snapshot_times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("need at least 4 strictly increasing snapshot times".into()));
    }
    let run_cfg = SimConfig {
        t_max: cfg.t_max.max(*snapshot_times.last().unwrap()),
        ..*cfg
    };
    let law = StationaryLaw::new(p)?;
    let hists = empirical_distributions(p, &run_cfg, x0, snapshot_times, bins)?;
    let reference = law.bin_masses(&hists[0].bin_edges);
    let tv: Vec<f64> = hists.iter().map(|h| tv_between(&h.masses, &reference)).collect();
    fit_log_linear(snapshot_times, &tv, 2.0 / (cfg.n_paths as f64).sqrt())
}

/// Qualitative decay check: positive fitted rate and `TV(last) < TV(first)`.
pub fn decay_report(fit: &TvDecayFit, n: usize) -> VerificationReport {
    let first = fit.tv[0];
    let last = *fit.tv.last().unwrap();
    let verdict = if fit.rate > 0.0 && last < first {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    let mut extras = BTreeMap::new();
    extras.insert("intercept".into(), fit.intercept);
    extras.insert("tv_floor".into(), fit.tv_floor);
    extras.insert("tv_first".into(), first);
    extras.insert("tv_last".into(), last);
    for (t, v) in fit.times.iter().zip(&fit.tv) {
        extras.insert(format!("tv_at_{t}"), *v);
    }
    VerificationReport {
        quantity: "tv_decay_rate".into(),
        bound_tag: "tv-decay".into(),
        bound_value: 0.0,
        estimate: MonteCarloEstimate::deterministic(fit.rate, n),
        verdict,
        informational: false,
        notes: "qualitative check only: fitted rate > 0 and TV decreasing; \
                the constants of the exponential convergence rate are not constructed"
            .into(),
        extras,
    }
}
