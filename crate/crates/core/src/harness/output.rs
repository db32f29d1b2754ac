use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::json;

use super::study::StudyResult;
use crate::error::Result;

pub const CSV_HEADER: &str = "n,theta,alpha,r,label,exact,approx,residual";

pub fn write_csv<W: Write>(result: &StudyResult, mut out: W) -> Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for row in &result.rows {
        let n = row.n.map(|n| n.to_string()).unwrap_or_default();
        writeln!(
            out,
            "{n},{},{},{},{},{},{},{}",
            row.theta, row.alpha, row.r, row.label, row.exact, row.approx, row.residual
        )?;
    }
    Ok(())
}

/// Summary document: configuration, slopes, flags and Monte Carlo records.
/// Keys are sorted, so equal results give identical text.
pub fn result_json(result: &StudyResult) -> String {
    let doc = json!({
        "study": result.study,
        "config": result.config,
        "rows": result.rows.len(),
        "fitted_slopes": result.fitted_slopes,
        "pass_flags": result.pass_flags,
        "monte_carlo": result.monte_carlo,
        "notes": result.notes,
        "paper_consistent": result.paper_consistent,
    });
    let mut text = serde_json::to_string_pretty(&doc).expect("json values serialize");
    text.push('\n');
    text
}

/// Writes `<base>.csv` and `<base>.json`.
pub fn write_outputs(result: &StudyResult, base: &Path) -> Result<()> {
    let mut csv = Vec::new();
    write_csv(result, &mut csv)?;
    fs::write(with_suffix(base, ".csv"), csv)?;
    fs::write(with_suffix(base, ".json"), result_json(result))?;
    Ok(())
}

fn with_suffix(base: &Path, suffix: &str) -> PathBuf {
    let mut s = base.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}
