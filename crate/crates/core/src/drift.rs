//! Pointwise checks of the drift inequalities behind the recurrence and
//! inattainability certificates.
//!
//! On `(0, α]` the Lyapunov function `e^{ct} x^{-m}` must satisfy
//! `A V ≤ -½ g_m e^{ct} x^{-m-1}`; on `(0, κ]` the function `x^{-n}` must
//! satisfy `A V ≤ -(n(n+1)ε²/2) x^{-n}`. Both sides are evaluated on a grid
//! that is log-spaced toward the endpoint, and the closed form is
//! cross-checked against finite differences at every point.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::generator::{
    generator_apply, generator_terms, generator_terms_fd, relative_discrepancy, LyapunovSpec,
    DEFAULT_FD_STEP,
};
use crate::model::{ModelParams, StateValue};
use crate::planner::{BoundaryPlan, Endpoint, RecurrencePlan};
use crate::sde::DEFAULT_CLAMP_EPS;

pub const DEFAULT_GRID_SIZE: usize = 1000;
/// Round-off allowance on the margin, relative to `max(1, |rhs|)` at each point.
pub const MARGIN_TOLERANCE: f64 = -1e-12;
/// Closest grid point to the endpoint.
pub const GRID_FLOOR: f64 = 10.0 * DEFAULT_CLAMP_EPS;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftScanReport {
    pub grid: Vec<f64>,
    pub closed_form: Vec<f64>,
    pub fd_values: Vec<f64>,
    pub required_rhs: Vec<f64>,
    /// `required_rhs - closed_form` per point.
    pub margins: Vec<f64>,
    pub max_rel_err: f64,
    /// Minimum of `margins`.
    pub inequality_margin: f64,
    /// Every margin is at least `MARGIN_TOLERANCE · max(1, |rhs|)`.
    pub holds: bool,
}

/// `size` points from `GRID_FLOOR` to `upper`, log-spaced, ascending.
pub fn log_grid(upper: f64, size: usize) -> Vec<f64> {
    let size = size.max(2);
    let (lo, hi) = (GRID_FLOOR.ln(), upper.ln());
    let mut g: Vec<f64> = (0..size)
        .map(|i| (lo + (hi - lo) * i as f64 / (size - 1) as f64).exp())
        .collect();
    g[size - 1] = upper;
    g
}

struct Point {
    x: f64,
    closed: f64,
    fd: f64,
    required: f64,
    rel_err: f64,
}

/// Evaluates one grid point. `dist` is the distance to the endpoint; the FD
/// step shrinks with it so the stencil stays inside `(0, 1)`.
fn evaluate(p: &ModelParams, spec: &LyapunovSpec, x: f64, dist: f64, required: f64) -> Result<Point> {
    let sv = StateValue::interior(x)?;
    let closed = generator_apply(p, spec, 0.0, sv)?;
    let h = DEFAULT_FD_STEP.min(1e-3 * dist);
    let fd = generator_terms_fd(p, spec, 0.0, sv, h)?.total();
    let scale = generator_terms(p, spec, 0.0, sv)?.magnitude();
    Ok(Point {
        x,
        closed,
        fd,
        required,
        rel_err: relative_discrepancy(fd, closed, scale),
    })
}

fn assemble(points: Vec<Point>) -> DriftScanReport {
    let margins: Vec<f64> = points.iter().map(|q| q.required - q.closed).collect();
    let inequality_margin = margins.iter().copied().fold(f64::INFINITY, f64::min);
    // round-off allowance scales with the size of the two sides
    let holds = points
        .iter()
        .zip(&margins)
        .all(|(q, &m)| m >= MARGIN_TOLERANCE * q.required.abs().max(1.0));
    let max_rel_err = points.iter().map(|q| q.rel_err).fold(0.0, f64::max);
    DriftScanReport {
        grid: points.iter().map(|q| q.x).collect(),
        closed_form: points.iter().map(|q| q.closed).collect(),
        fd_values: points.iter().map(|q| q.fd).collect(),
        required_rhs: points.iter().map(|q| q.required).collect(),
        margins,
        max_rel_err,
        inequality_margin,
        holds,
    }
}

/// Lower-end recurrence drift on `(0, α]`.
pub fn scan_recurrence_drift(
    p: &ModelParams,
    plan: &RecurrencePlan,
    grid_size: usize,
) -> Result<DriftScanReport> {
    let spec = LyapunovSpec::lower_end(plan.m, plan.c)?;
    let points = log_grid(plan.alpha, grid_size)
        .into_iter()
        .map(|x| {
            let required = -0.5 * plan.g_m * x.powf(-plan.m - 1.0);
            evaluate(p, &spec, x, x, required)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble(points))
}

/// Upper-end recurrence drift on `[1 - α, 1)` with `e^{ct} (1-x)^{-m}`.
pub fn scan_recurrence_drift_mirrored(
    p: &ModelParams,
    plan: &RecurrencePlan,
    grid_size: usize,
) -> Result<DriftScanReport> {
    let spec = LyapunovSpec::upper_end(plan.m, plan.c)?;
    let mut grid = log_grid(plan.alpha, grid_size);
    grid.reverse();
    let points = grid
        .into_iter()
        .map(|y| {
            let x = 1.0 - y;
            let dist = 1.0 - x;
            let required = -0.5 * plan.g_m * dist.powf(-plan.m - 1.0);
            evaluate(p, &spec, x, dist, required)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble(points))
}

/// Inattainability drift on `(0, κ]`, or on `[1 - κ, 1)` for endpoint 1 (via
/// the mirrored model, so the grid holds distances `1 - x` in that case).
pub fn scan_boundary_drift(
    p: &ModelParams,
    plan: &BoundaryPlan,
    grid_size: usize,
) -> Result<DriftScanReport> {
    let q = plan.oriented(p);
    let spec = LyapunovSpec::boundary(plan.n)?;
    let n = plan.n;
    let coef = n * (n + 1.0) * q.epsilon() * q.epsilon() / 2.0;
    let points = log_grid(plan.kappa, grid_size)
        .into_iter()
        .map(|y| {
            let mut pt = evaluate(&q, &spec, y, y, -coef * y.powf(-n))?;
            if plan.endpoint == Endpoint::One {
                pt.x = 1.0 - y;
            }
            Ok(pt)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble(points))
}

/// The grouped Itô expansion next to the raw generator `c V + B V' + (ε²/2) x(1-x) V''`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ItoIdentity {
    pub grouped: f64,
    pub raw: f64,
    pub abs_err: f64,
    /// `abs_err` over the larger of `|raw|` and the sum of term magnitudes.
    pub rel_err: f64,
}

pub fn ito_expansion_identity(p: &ModelParams, m: f64, c: f64, t: f64, x: f64) -> Result<ItoIdentity> {
    let spec = LyapunovSpec::lower_end(m, c)?;
    let sv = StateValue::interior(x)?;
    let grouped = generator_apply(p, &spec, t, sv)?;
    let terms = generator_terms(p, &spec, t, sv)?;
    let raw = terms.total();
    Ok(ItoIdentity {
        grouped,
        raw,
        abs_err: (grouped - raw).abs(),
        rel_err: relative_discrepancy(grouped, raw, terms.magnitude()),
    })
}

/// CSV with columns `x, closed_form, fd, required_rhs, margin`.
pub fn write_scan_csv<W: Write>(mut out: W, report: &DriftScanReport) -> Result<()> {
    writeln!(out, "x,closed_form,fd,required_rhs,margin")?;
    for i in 0..report.grid.len() {
        writeln!(
            out,
            "{},{},{},{},{}",
            report.grid[i],
            report.closed_form[i],
            report.fd_values[i],
            report.required_rhs[i],
            report.margins[i]
        )?;
    }
    Ok(())
}
