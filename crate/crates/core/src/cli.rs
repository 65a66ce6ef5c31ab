//! Batch command-line surface: `plan`, `simulate` and `verify <check>`.
//!
//! Exit codes: 0 all selected verdicts pass, 1 any fails (or an I/O error),
//! 2 precondition or semantic config error, 3 inconclusive without failures,
//! 64 usage or parse error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{ReportFormat, RunConfig, SimulateStop};
use crate::drift::{
    ito_expansion_identity, scan_boundary_drift, scan_recurrence_drift,
    scan_recurrence_drift_mirrored, write_scan_csv, DriftScanReport, MARGIN_TOLERANCE,
};
use crate::error::{Error, Result};
use crate::estimators::{
    additive_functional_report, decay_report, exp_moment_report, fit_tv_decay, hit_rule,
    run_recurrence, verify_boundary_avoidance, verify_hit_probability, verify_stationarity,
    MonteCarloEstimate, Verdict, VerificationReport,
};
use crate::model::{require_feller, ModelParams};
use crate::planner::{plan_boundary, plan_recurrence, BoundaryPlan, Endpoint, RecurrencePlan};
use crate::report::{write_check, write_json, CheckDocument};
use crate::sde::{run_batch, write_paths_csv, Functional, PathRequest, StopReason, StoppingRule};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_PRECONDITION: i32 = 2;
pub const EXIT_INCONCLUSIVE: i32 = 3;
pub const EXIT_USAGE: i32 = 64;

/// Relative tolerance for the closed-form versus finite-difference generator.
pub const FD_TOLERANCE: f64 = 1e-6;
/// Relative tolerance for the two groupings of the Itô expansion.
pub const ITO_TOLERANCE: f64 = 1e-12;
pub const ITO_DRAWS: usize = 10_000;

#[derive(Debug, Parser)]
#[command(name = "wf-lab", version, about = "Wright-Fisher diffusion recurrence and boundary checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Flat `key = value` config file; defaults apply to missing keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides `sim.master_seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides `output.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides `output.format`.
    #[arg(long, global = true, value_enum)]
    format: Option<FormatArg>,
    /// Worker threads; overrides `sim.threads`. Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
    Both,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Writes plan.json with the recurrence and both boundary plans.
    Plan,
    /// Writes paths.csv for one batch.
    Simulate,
    /// Runs the selected check and writes one report per check.
    Verify {
        #[arg(value_enum)]
        which: Check,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Check {
    Recurrence,
    Boundary,
    Hitprob,
    Stationary,
    Decay,
    Drift,
    All,
}

impl Check {
    pub const EACH: [Check; 6] = [
        Check::Drift,
        Check::Recurrence,
        Check::Boundary,
        Check::Hitprob,
        Check::Stationary,
        Check::Decay,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Check::Recurrence => "recurrence",
            Check::Boundary => "boundary",
            Check::Hitprob => "hitprob",
            Check::Stationary => "stationary",
            Check::Decay => "decay",
            Check::Drift => "drift",
            Check::All => "all",
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parse(_) => EXIT_USAGE,
        Error::Io(_) | Error::Json(_) => EXIT_FAIL,
        Error::Path { source, .. } => exit_code(source),
        _ => EXIT_PRECONDITION,
    }
}

pub fn verdict_exit_code(v: Verdict) -> i32 {
    match v {
        Verdict::Pass => EXIT_PASS,
        Verdict::Fail => EXIT_FAIL,
        Verdict::Inconclusive => EXIT_INCONCLUSIVE,
    }
}

/// Entry point; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
        }
    };
    let cfg = match load_config(&cli) {
        Ok(cfg) => cfg,
        Err((code, e)) => {
            eprintln!("error: {e}");
            return code;
        }
    };
    let pool = match cfg.threads {
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build(),
        None => rayon::ThreadPoolBuilder::new().build(),
    };
    let pool = match pool {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: thread pool: {e}");
            return EXIT_FAIL;
        }
    };
    let outcome = pool.install(|| match cli.command {
        Command::Plan => cmd_plan(&cfg),
        Command::Simulate => cmd_simulate(&cfg),
        Command::Verify { which } => cmd_verify(&cfg, which),
    });
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn load_config(cli: &Cli) -> std::result::Result<RunConfig, (i32, Error)> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| {
                (EXIT_USAGE, Error::Parse(format!("cannot read {}: {e}", path.display())))
            })?;
            text.parse::<RunConfig>().map_err(|e| (exit_code(&e), e))?
        }
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.sim.master_seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    if let Some(f) = cli.format {
        cfg.format = match f {
            FormatArg::Json => ReportFormat::Json,
            FormatArg::Csv => ReportFormat::Csv,
            FormatArg::Both => ReportFormat::Both,
        };
    }
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err((EXIT_USAGE, Error::Parse("--threads must be positive".into())));
        }
        cfg.threads = Some(t);
    }
    Ok(cfg)
}

/// Recurrence plan and both boundary plans for the configured fractions.
pub fn plans(cfg: &RunConfig) -> Result<(RecurrencePlan, BoundaryPlan, BoundaryPlan)> {
    let p = &cfg.model;
    require_feller(p)?;
    let rec = plan_recurrence(p, cfg.plan.c, cfg.plan.m_fraction, cfg.plan.alpha_fraction)?;
    let zero = plan_boundary(p, Endpoint::Zero, cfg.plan.kappa_fraction)?;
    let one = plan_boundary(p, Endpoint::One, cfg.plan.kappa_fraction)?;
    Ok((rec, zero, one))
}

#[derive(Debug, Serialize)]
struct Interval {
    lower: f64,
    upper: f64,
    /// Whether `upper` itself is admissible.
    upper_closed: bool,
}

#[derive(Debug, Serialize)]
struct PlanDocument {
    version: String,
    master_seed: u64,
    config: BTreeMap<String, String>,
    recurrence: RecurrencePlan,
    boundary_zero: BoundaryPlan,
    boundary_one: BoundaryPlan,
    intervals: BTreeMap<String, Interval>,
}

fn open_interval(upper: f64) -> Interval {
    Interval {
        lower: 0.0,
        upper,
        upper_closed: false,
    }
}

pub fn cmd_plan(cfg: &RunConfig) -> Result<i32> {
    let (rec, zero, one) = plans(cfg)?;
    let mut intervals = BTreeMap::new();
    intervals.insert("m".to_string(), open_interval(rec.m_max));
    intervals.insert("alpha".to_string(), open_interval(rec.alpha_max));
    for (name, bp) in [("zero", &zero), ("one", &one)] {
        intervals.insert(format!("kappa_{name}"), open_interval(bp.kappa_max));
        let e2 = cfg.model.epsilon().powi(2);
        intervals.insert(
            format!("n_{name}"),
            Interval {
                lower: 0.0,
                upper: 2.0 * bp.b0 / e2 - 1.0,
                upper_closed: true,
            },
        );
    }
    let doc = PlanDocument {
        version: crate::VERSION.to_string(),
        master_seed: cfg.sim.master_seed,
        config: cfg.to_map(),
        recurrence: rec,
        boundary_zero: zero,
        boundary_one: one,
        intervals,
    };
    fs::create_dir_all(&cfg.out_dir)?;
    let path = cfg.out_dir.join("plan.json");
    write_json(&path, &doc)?;
    println!(
        "recurrence: c = {}, m = {}, alpha = {}, C_m = {}",
        rec.c, rec.m, rec.alpha, rec.c_m
    );
    for bp in [&zero, &one] {
        println!(
            "boundary {:?}: kappa = {}, b0 = {}, n = {}",
            bp.endpoint, bp.kappa, bp.b0, bp.n
        );
    }
    println!("wrote {}", path.display());
    Ok(EXIT_PASS)
}

/// Hit-check start and level, as states; defaults are distances `0.8 κ` and
/// `0.08 κ` from the endpoint.
fn hit_states(cfg: &RunConfig, bp: &BoundaryPlan) -> (f64, f64) {
    let state = |d: f64| match bp.endpoint {
        Endpoint::Zero => d,
        Endpoint::One => 1.0 - d,
    };
    (
        cfg.verify.hit_x0.unwrap_or_else(|| state(0.8 * bp.kappa)),
        cfg.verify.hit_beta.unwrap_or_else(|| state(0.08 * bp.kappa)),
    )
}

#[derive(Debug, Serialize)]
struct SimulateDocument {
    version: String,
    master_seed: u64,
    config: BTreeMap<String, String>,
    x0: f64,
    n_paths: usize,
    stop_reason_counts: BTreeMap<String, usize>,
    mean_stop_time: f64,
    paths_with_clamp_events: usize,
}

pub fn cmd_simulate(cfg: &RunConfig) -> Result<i32> {
    let mut config = cfg.to_map();
    let (x0, request) = match cfg.simulate_stop {
        SimulateStop::TauAlpha => {
            let (rec, _, _) = plans(cfg)?;
            let x0 = cfg.simulate_x0.unwrap_or(0.5 * rec.alpha);
            let req = PathRequest::stopping(StoppingRule::TauAlpha { alpha: rec.alpha })
                .with_functional(Functional::InversePower { exponent: rec.m + 1.0 });
            (x0, req)
        }
        SimulateStop::Hit => {
            let (_, zero, one) = plans(cfg)?;
            let bp = if cfg.verify.hit_endpoint == Endpoint::Zero { zero } else { one };
            let (hx0, beta) = hit_states(cfg, &bp);
            config.insert("verify.hitprob.beta".into(), beta.to_string());
            (cfg.simulate_x0.unwrap_or(hx0), PathRequest::stopping(hit_rule(&bp, beta)))
        }
        SimulateStop::None => (cfg.simulate_x0.unwrap_or(0.5), PathRequest::default()),
    };
    config.insert("simulate.x0".into(), x0.to_string());
    let records = run_batch(&cfg.model, &cfg.sim, x0, &request)?;

    fs::create_dir_all(&cfg.out_dir)?;
    let csv_path = cfg.out_dir.join("paths.csv");
    let mut buf = Vec::new();
    write_paths_csv(&mut buf, &request, &records)?;
    fs::write(&csv_path, buf)?;

    let mut counts: BTreeMap<String, usize> =
        StopReason::ALL.iter().map(|r| (r.name().to_string(), 0)).collect();
    for r in &records {
        *counts.get_mut(r.stop_reason.name()).unwrap() += 1;
    }
    let doc = SimulateDocument {
        version: crate::VERSION.to_string(),
        master_seed: cfg.sim.master_seed,
        config,
        x0,
        n_paths: records.len(),
        stop_reason_counts: counts,
        mean_stop_time: records.iter().map(|r| r.stop_time).sum::<f64>() / records.len() as f64,
        paths_with_clamp_events: records.iter().filter(|r| r.clamp_events > 0).count(),
    };
    let json_path = cfg.out_dir.join("simulate.json");
    write_json(&json_path, &doc)?;
    println!("wrote {} ({} paths)", csv_path.display(), records.len());
    Ok(EXIT_PASS)
}

struct CheckOutput {
    reports: Vec<VerificationReport>,
    /// Plan-derived values resolved by this check.
    resolved: Vec<(&'static str, f64)>,
}

fn scan_report(quantity: &str, tag: &str, scan: &DriftScanReport, expect_holds: bool) -> [VerificationReport; 2] {
    let n = scan.grid.len();
    let ok = scan.holds == expect_holds;
    let mut extras = BTreeMap::new();
    extras.insert("grid_lo".into(), scan.grid.iter().copied().fold(f64::INFINITY, f64::min));
    extras.insert("grid_hi".into(), scan.grid.iter().copied().fold(0.0, f64::max));
    let notes = if expect_holds {
        "minimum over the grid of (required rhs - generator); holds when every margin >= -1e-12 max(1, |rhs|)".to_string()
    } else {
        "violation probe: passes when the scan detects a negative margin".to_string()
    };
    let margin = VerificationReport {
        quantity: format!("{quantity}_margin"),
        bound_tag: tag.into(),
        bound_value: MARGIN_TOLERANCE,
        estimate: MonteCarloEstimate::deterministic(scan.inequality_margin, n),
        verdict: if ok { Verdict::Pass } else { Verdict::Fail },
        informational: false,
        notes,
        extras: extras.clone(),
    };
    let fd = VerificationReport {
        quantity: format!("{quantity}_fd_rel_err"),
        bound_tag: "generator-closed-form".into(),
        bound_value: FD_TOLERANCE,
        estimate: MonteCarloEstimate::deterministic(scan.max_rel_err, n),
        verdict: if scan.max_rel_err <= FD_TOLERANCE { Verdict::Pass } else { Verdict::Fail },
        informational: false,
        notes: "maximum relative difference between the closed form and central differences".into(),
        extras,
    };
    [margin, fd]
}

/// Largest relative discrepancy between the grouped and raw Itô expansions
/// over seeded random draws.
pub fn ito_fuzz(seed: u64, draws: usize) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..draws {
        let p = ModelParams::new(
            rng.random_range(0.1..5.0),
            rng.random_range(0.1..5.0),
            rng.random_range(0.1..2.0),
        )?;
        let m = rng.random_range(0.0..6.0);
        let c = rng.random_range(0.0..3.0);
        let t = rng.random_range(0.0..2.0);
        let x = rng.random_range(1e-3..1.0 - 1e-3);
        worst = worst.max(ito_expansion_identity(&p, m, c, t, x)?.rel_err);
    }
    Ok(worst)
}

fn check_drift(cfg: &RunConfig) -> Result<CheckOutput> {
    let p = &cfg.model;
    let grid = cfg.verify.grid_size;
    let (rec, zero, one) = plans(cfg)?;
    let scans = [
        ("recurrence", scan_recurrence_drift(p, &rec, grid)?),
        ("recurrence_mirrored", scan_recurrence_drift_mirrored(p, &rec, grid)?),
        ("boundary_0", scan_boundary_drift(p, &zero, grid)?),
        ("boundary_1", scan_boundary_drift(p, &one, grid)?),
    ];
    fs::create_dir_all(&cfg.out_dir)?;
    let mut reports = Vec::new();
    for (name, scan) in &scans {
        let mut buf = Vec::new();
        write_scan_csv(&mut buf, scan)?;
        fs::write(cfg.out_dir.join(format!("drift_{name}.csv")), buf)?;
        let tag = if name.starts_with("recurrence") { "recurrence-drift" } else { "boundary-drift" };
        reports.extend(scan_report(&format!("{name}_drift"), tag, scan, true));
    }

    let mut inflated = rec;
    inflated.alpha = 2.0 * rec.alpha_max;
    let probe = scan_recurrence_drift(p, &inflated, grid)?;
    reports.extend(scan_report("inflated_alpha_probe", "recurrence-drift", &probe, false));
    let mut steep = zero;
    steep.n *= 1.5;
    let probe = scan_boundary_drift(p, &steep, grid)?;
    reports.extend(scan_report("inflated_n_probe", "boundary-drift", &probe, false));

    let worst = ito_fuzz(cfg.sim.master_seed, ITO_DRAWS)?;
    reports.push(VerificationReport {
        quantity: "ito_grouping_rel_err".into(),
        bound_tag: "ito-expansion".into(),
        bound_value: ITO_TOLERANCE,
        estimate: MonteCarloEstimate::deterministic(worst, ITO_DRAWS),
        verdict: if worst <= ITO_TOLERANCE { Verdict::Pass } else { Verdict::Fail },
        informational: false,
        notes: "grouped expansion against c V + B V' + (eps^2/2) x(1-x) V'' on random draws".into(),
        extras: BTreeMap::new(),
    });
    Ok(CheckOutput {
        reports,
        resolved: Vec::new(),
    })
}

fn check_recurrence(cfg: &RunConfig) -> Result<CheckOutput> {
    let (rec, _, _) = plans(cfg)?;
    let x0 = cfg.verify.recurrence_x0.unwrap_or(0.5 * rec.alpha);
    let policy = &cfg.verify.policy;
    let records = run_recurrence(&cfg.model, &rec, x0, &cfg.sim)?;
    let exp = exp_moment_report(&rec, x0, &records, policy)?;
    let af = additive_functional_report(&rec, x0, &records, policy)?;
    Ok(CheckOutput {
        reports: vec![exp, af.as_proved, af.as_stated],
        resolved: vec![("verify.recurrence.x0", x0)],
    })
}

fn check_boundary(cfg: &RunConfig) -> Result<CheckOutput> {
    let v = &cfg.verify;
    let r = verify_boundary_avoidance(
        &cfg.model,
        &cfg.sim,
        v.boundary_x0,
        v.boundary_horizon,
        &v.policy,
        v.contrast.as_ref(),
    )?;
    Ok(CheckOutput {
        reports: vec![r],
        resolved: Vec::new(),
    })
}

fn check_hitprob(cfg: &RunConfig) -> Result<CheckOutput> {
    let (_, zero, one) = plans(cfg)?;
    let bp = if cfg.verify.hit_endpoint == Endpoint::Zero { zero } else { one };
    let (x0, beta) = hit_states(cfg, &bp);
    let r = verify_hit_probability(&cfg.model, &bp, x0, beta, &cfg.sim, &cfg.verify.policy)?;
    Ok(CheckOutput {
        reports: vec![r],
        resolved: vec![("verify.hitprob.x0", x0), ("verify.hitprob.beta", beta)],
    })
}

fn check_stationary(cfg: &RunConfig) -> Result<CheckOutput> {
    let v = &cfg.verify;
    let r = verify_stationarity(&cfg.model, &cfg.sim, v.stationary_x0, v.stationary_time, &v.policy)?;
    Ok(CheckOutput {
        reports: vec![r],
        resolved: Vec::new(),
    })
}

fn check_decay(cfg: &RunConfig) -> Result<CheckOutput> {
    let v = &cfg.verify;
    let report = match fit_tv_decay(&cfg.model, &cfg.sim, v.decay_x0, &v.decay_times, v.policy.bins) {
        Ok(fit) => {
            let mut buf = Vec::new();
            writeln!(buf, "t,tv,used_in_fit")?;
            for i in 0..fit.times.len() {
                writeln!(buf, "{},{},{}", fit.times[i], fit.tv[i], fit.used[i])?;
            }
            fs::create_dir_all(&cfg.out_dir)?;
            fs::write(cfg.out_dir.join("decay_tv.csv"), buf)?;
            decay_report(&fit, cfg.sim.n_paths)
        }
        Err(Error::DegenerateFit(msg)) => VerificationReport {
            quantity: "tv_decay_rate".into(),
            bound_tag: "tv-decay".into(),
            bound_value: 0.0,
            estimate: MonteCarloEstimate::deterministic(f64::NAN, cfg.sim.n_paths),
            verdict: Verdict::Inconclusive,
            informational: false,
            notes: format!("fit not possible: {msg}"),
            extras: BTreeMap::new(),
        },
        Err(e) => return Err(e),
    };
    Ok(CheckOutput {
        reports: vec![report],
        resolved: Vec::new(),
    })
}

fn run_check(cfg: &RunConfig, check: Check) -> Result<CheckOutput> {
    match check {
        Check::Recurrence => check_recurrence(cfg),
        Check::Boundary => check_boundary(cfg),
        Check::Hitprob => check_hitprob(cfg),
        Check::Stationary => check_stationary(cfg),
        Check::Decay => check_decay(cfg),
        Check::Drift => check_drift(cfg),
        Check::All => unreachable!("expanded by cmd_verify"),
    }
}

/// Runs one check and writes its report files; returns the document.
pub fn verify_one(cfg: &RunConfig, check: Check, out_dir: &Path) -> Result<CheckDocument> {
    let out = run_check(cfg, check).map_err(|e| prefix(check, e))?;
    let mut config = cfg.to_map();
    for (k, v) in out.resolved {
        config.insert(k.to_string(), v.to_string());
    }
    let doc = CheckDocument::new(check.name(), cfg.sim.master_seed, config, out.reports);
    write_check(out_dir, &doc, cfg.format)?;
    Ok(doc)
}

fn prefix(check: Check, e: Error) -> Error {
    let name = check.name();
    match e {
        Error::Config(m) => Error::Config(format!("{name}: {m}")),
        Error::Ordering(m) => Error::Ordering(format!("{name}: {m}")),
        Error::InvalidParams(m) => Error::InvalidParams(format!("{name}: {m}")),
        Error::Domain(m) => Error::Domain(format!("{name}: {m}")),
        other => other,
    }
}

pub fn cmd_verify(cfg: &RunConfig, which: Check) -> Result<i32> {
    require_feller(&cfg.model)?;
    let checks: Vec<Check> = if which == Check::All { Check::EACH.to_vec() } else { vec![which] };
    let mut verdicts = Vec::new();
    for check in checks {
        let doc = verify_one(cfg, check, &cfg.out_dir)?;
        for r in &doc.reports {
            println!(
                "{:<11} {:<40} {:?}{}  estimate {:.6e} vs bound {:.6e}",
                check.name(),
                r.quantity,
                r.verdict,
                if r.informational { " (informational)" } else { "" },
                r.estimate.mean,
                r.bound_value
            );
        }
        println!("{:<11} => {:?}", check.name(), doc.verdict);
        verdicts.push(doc.verdict);
    }
    let overall = if verdicts.contains(&Verdict::Fail) {
        Verdict::Fail
    } else if verdicts.contains(&Verdict::Inconclusive) {
        Verdict::Inconclusive
    } else {
        Verdict::Pass
    };
    Ok(verdict_exit_code(overall))
}
