//! Scenario runner behind the `degenlab` binary.
//!
//! A scenario JSON names a profile, a mesh, ε and time grids, and a list of
//! checks. `run` validates it, executes every check, and writes
//! `report.md`, `report.json`, `records.csv`, one CSV per table, SVG plots of
//! time series and `metadata.json` (the only file with timestamps). The exit
//! code is 0 when nothing is violated, 2 when a record is `Violated`, and 1 on
//! any error.

mod builtins;
mod run;
mod scenario;
mod svg;

use std::path::{Path, PathBuf};

pub use builtins::{builtin, builtins};
pub use run::{execute, write_artifacts, CheckResult, ScenarioRun};
pub use scenario::{
    apply_override, BallSpec, CheckSpec, GridRef, MeshSpec, RadiusGrid, Region, Scenario, Times, CHECK_KINDS,
};
pub use svg::{log_log_plot, Series};

use crate::error::{LabError, Result};

/// Loads a scenario from a file, or from the builtin catalogue when no such
/// file exists. Returns the scenario and the directory relative paths resolve
/// against.
pub fn load(source: &str, overrides: &[String]) -> Result<(Scenario, Option<PathBuf>)> {
    let path = Path::new(source);
    if path.is_file() {
        let text = std::fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf);
        return Ok((Scenario::parse(&text, overrides)?, base));
    }
    match builtin(source) {
        Some(s) => Ok((Scenario::parse(&s.to_json()?, overrides)?, None)),
        None => Err(LabError::io(path, std::io::Error::new(std::io::ErrorKind::NotFound, "no such file or builtin scenario"))),
    }
}

/// Runs a scenario and writes its artifacts; returns the exit code.
pub fn run(source: &str, out: Option<&Path>, threads: Option<usize>, overrides: &[String]) -> Result<i32> {
    let (scenario, base) = load(source, overrides)?;
    let dir = match (out, &scenario.output) {
        (Some(d), _) => d.to_path_buf(),
        (None, Some(o)) => base.clone().unwrap_or_default().join(o),
        (None, None) => PathBuf::from("out").join(&scenario.name),
    };
    let result = execute(&scenario, base.as_deref(), threads)?;
    write_artifacts(&result, &dir)?;
    Ok(result.exit_code())
}

/// Catalogue of builtins: a text table, or (`json`) an array of full
/// scenario documents that parse back through the schema.
pub fn list(format: &str) -> Result<String> {
    let all = builtins();
    match format {
        "json" => Ok(serde_json::to_string_pretty(&all)?),
        "text" => {
            let width = all.iter().map(|s| s.name.chars().count()).max().unwrap_or(0);
            let mut out = String::new();
            for s in &all {
                let pad = width - s.name.chars().count();
                out.push_str(&format!("{}{}  {}\n", s.name, " ".repeat(pad), s.anchor));
            }
            Ok(out)
        }
        other => Err(LabError::arg(format!("unknown list format `{other}`; use text or json"))),
    }
}
