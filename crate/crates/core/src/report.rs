//! Persistent report documents. Output is a pure function of the inputs:
//! no timestamps, host names or thread counts.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::ReportFormat;
use crate::error::Result;
use crate::estimators::{Verdict, VerificationReport};

/// Worst verdict over the non-informational reports: any Fail is Fail,
/// otherwise any Inconclusive is Inconclusive.
pub fn overall_verdict(reports: &[VerificationReport]) -> Verdict {
    let counted = reports.iter().filter(|r| !r.informational);
    let mut out = Verdict::Pass;
    for r in counted {
        match r.verdict {
            Verdict::Fail => return Verdict::Fail,
            Verdict::Inconclusive => out = Verdict::Inconclusive,
            Verdict::Pass => {}
        }
    }
    out
}

/// One check's output file.
#[derive(Debug, Clone, Serialize)]
pub struct CheckDocument {
    pub check: String,
    pub version: String,
    pub master_seed: u64,
    /// Tags of the bounds checked, in report order.
    pub bound_tags: Vec<String>,
    pub verdict: Verdict,
    pub config: BTreeMap<String, String>,
    pub reports: Vec<VerificationReport>,
}

impl CheckDocument {
    pub fn new(
        check: &str,
        master_seed: u64,
        config: BTreeMap<String, String>,
        reports: Vec<VerificationReport>,
    ) -> Self {
        let mut bound_tags: Vec<String> = Vec::new();
        for r in &reports {
            if !bound_tags.contains(&r.bound_tag) {
                bound_tags.push(r.bound_tag.clone());
            }
        }
        Self {
            check: check.to_string(),
            version: crate::VERSION.to_string(),
            master_seed,
            bound_tags,
            verdict: overall_verdict(&reports),
            config,
            reports,
        }
    }
}

pub const CSV_COLUMNS: [&str; 12] = [
    "quantity",
    "bound_tag",
    "bound_value",
    "mean",
    "std_error",
    "n",
    "censored_fraction",
    "ci99_halfwidth",
    "kurtosis",
    "verdict",
    "informational",
    "notes",
];

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Writes `#`-prefixed provenance lines, then one row per report.
pub fn write_check_csv<W: Write>(mut out: W, doc: &CheckDocument) -> Result<()> {
    writeln!(out, "# check = {}", doc.check)?;
    writeln!(out, "# version = {}", doc.version)?;
    writeln!(out, "# master_seed = {}", doc.master_seed)?;
    writeln!(out, "# verdict = {:?}", doc.verdict)?;
    for (k, v) in &doc.config {
        writeln!(out, "# {k} = {v}")?;
    }
    writeln!(out, "{}", CSV_COLUMNS.join(","))?;
    for r in &doc.reports {
        let e = &r.estimate;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{:?},{},{}",
            csv_field(&r.quantity),
            csv_field(&r.bound_tag),
            r.bound_value,
            e.mean,
            e.std_error,
            e.n,
            e.censored_fraction,
            e.ci99_halfwidth,
            e.kurtosis,
            r.verdict,
            r.informational,
            csv_field(&r.notes)
        )?;
    }
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Writes `<dir>/<check>.json` and/or `.csv`; returns the paths written.
pub fn write_check(dir: &Path, doc: &CheckDocument, format: ReportFormat) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    if format.json() {
        let path = dir.join(format!("{}.json", doc.check));
        write_json(&path, doc)?;
        written.push(path);
    }
    if format.csv() {
        let path = dir.join(format!("{}.csv", doc.check));
        let mut buf = Vec::new();
        write_check_csv(&mut buf, doc)?;
        fs::write(&path, buf)?;
        written.push(path);
    }
    Ok(written)
}
