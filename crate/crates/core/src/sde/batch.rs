use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::ModelParams;

use super::path::run_path;
use super::{PathRecord, PathRequest, SimConfig};

/// Runs `cfg.n_paths` paths in parallel. Path `i` always uses stream `i`, and
/// results come back in index order, so the batch does not depend on the
/// thread count or on scheduling.
pub fn run_batch(
    p: &ModelParams,
    cfg: &SimConfig,
    x0: f64,
    request: &PathRequest,
) -> Result<Vec<PathRecord>> {
    cfg.validate()?;
    (0..cfg.n_paths)
        .into_par_iter()
        .map(|i| {
            run_path(p, cfg, x0, request, i).map_err(|e| Error::Path {
                index: i,
                source: Box::new(e),
            })
        })
        .collect()
}

pub const CSV_FIXED_COLUMNS: [&str; 3] = ["path_index", "stop_time", "stop_reason"];

/// Writes one row per path: `path_index, stop_time, stop_reason,` one column
/// per functional, then `clamp_events, min_x, max_x`.
pub fn write_paths_csv<W: Write>(
    mut out: W,
    request: &PathRequest,
    records: &[PathRecord],
) -> Result<()> {
    let mut header: Vec<String> = CSV_FIXED_COLUMNS.iter().map(|s| s.to_string()).collect();
    header.extend(request.functionals.iter().map(|f| f.label()));
    header.extend(["clamp_events", "min_x", "max_x"].map(String::from));
    writeln!(out, "{}", header.join(","))?;
    for r in records {
        write!(out, "{},{},{}", r.path_index, r.stop_time, r.stop_reason.name())?;
        for v in &r.integrals {
            write!(out, ",{v}")?;
        }
        writeln!(out, ",{},{},{}", r.clamp_events, r.min_x, r.max_x)?;
    }
    Ok(())
}
