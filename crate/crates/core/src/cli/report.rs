//! Merging the results of several run directories into one table.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::Value;

use super::SCHEMA_VERSION;
use crate::{Error, Result};

#[derive(Debug, Clone, Default)]
pub struct ReportOptions {
    /// Allow runs on different grids; adds an `h` column.
    pub allow_mixed_grids: bool,
}

struct Run {
    dir: PathBuf,
    command: String,
    grid: Value,
    h: f64,
    header: String,
    rows: Vec<String>,
}

fn load(dir: &Path) -> Result<Run> {
    let text = fs::read_to_string(dir.join("manifest.json"))
        .map_err(|e| Error::Config(format!("{}: no readable manifest ({e})", dir.display())))?;
    let m: Value =
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: bad manifest: {e}", dir.display())))?;
    let version = m["schema_version"].as_u64();
    if version != Some(SCHEMA_VERSION as u64) {
        return Err(Error::Config(format!(
            "{}: schema version {version:?}, expected {SCHEMA_VERSION}",
            dir.display()
        )));
    }
    let results = fs::read_to_string(dir.join("results.csv"))?;
    let mut lines = results.lines();
    let header = lines.next().unwrap_or_default().to_string();
    Ok(Run {
        dir: dir.to_path_buf(),
        command: m["command"].as_str().unwrap_or_default().to_string(),
        grid: m["grid"].clone(),
        h: m["h"].as_f64().unwrap_or(f64::NAN),
        header,
        rows: lines.map(str::to_string).collect(),
    })
}

/// Joins `results.csv` of compatible runs: a leading `run` column (the
/// directory name), then the original columns, plus `h` when mixed grids
/// are allowed.
pub fn merge_runs(dirs: &[PathBuf], opts: &ReportOptions) -> Result<Vec<u8>> {
    if dirs.is_empty() {
        return Err(Error::Config("report needs at least one run directory".into()));
    }
    let runs: Vec<Run> = dirs.iter().map(|d| load(d)).collect::<Result<_>>()?;
    let first = &runs[0];
    for r in &runs[1..] {
        if r.command != first.command {
            return Err(Error::Config(format!(
                "{} ran {}, {} ran {}",
                first.dir.display(),
                first.command,
                r.dir.display(),
                r.command
            )));
        }
        if r.header != first.header {
            return Err(Error::Config(format!("{}: result columns differ", r.dir.display())));
        }
        if r.grid != first.grid && !opts.allow_mixed_grids {
            return Err(Error::Config(format!(
                "{} uses a different grid; pass --allow-mixed-grids to merge",
                r.dir.display()
            )));
        }
    }
    let mut out = String::new();
    out.push_str("run,");
    out.push_str(&first.header);
    if opts.allow_mixed_grids {
        out.push_str(",h");
    }
    out.push('\n');
    for r in &runs {
        let name = r.dir.file_name().map_or_else(|| r.dir.display().to_string(), |n| n.to_string_lossy().into_owned());
        for row in &r.rows {
            out.push_str(&name);
            out.push(',');
            out.push_str(row);
            if opts.allow_mixed_grids {
                out.push_str(&format!(",{:.16e}", r.h));
            }
            out.push('\n');
        }
    }
    Ok(out.into_bytes())
}
