//! Report files. `report.json` depends only on the config, command and
//! seed; the wall-clock timestamp goes to `metadata.json` instead.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde_json::{json, Value};

use crate::commands::{disclosed_tolerances, Command, CommandOutput, Table};
use crate::config::RunConfig;
use crate::error::CliError;

pub const TOOL_NAME: &str = "roughlab";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn build(cfg: &RunConfig, cmd: &Command, out: &CommandOutput) -> Result<Value, CliError> {
    Ok(json!({
        "tool": { "name": TOOL_NAME, "version": TOOL_VERSION },
        "command": cmd.label(),
        "seed": cfg.seed,
        "config": cfg,
        "tolerances": disclosed_tolerances(cfg)?,
        "status": out.status,
        "exit_code": out.status.exit_code(),
        "result": out.result,
    }))
}

/// Writes the report, the metadata file and any grid dump into `dir`, and
/// returns the paths written.
pub fn write_all(dir: &Path, report: &Value, table: Option<&Table>) -> Result<Vec<PathBuf>, CliError> {
    let io = |path: &Path| {
        let path = path.to_owned();
        move |source| CliError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io(dir))?;
    let mut written = Vec::new();

    let path = dir.join("report.json");
    fs::write(&path, to_pretty(report)).map_err(io(&path))?;
    written.push(path);

    if let Some(t) = table {
        let path = dir.join(format!("{}.csv", t.name));
        write_csv(&path, t)?;
        written.push(path);
    }

    let created = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs());
    let meta = json!({
        "created_unix_secs": created,
        "tool": { "name": TOOL_NAME, "version": TOOL_VERSION },
        "command": report["command"],
        "files": written.iter().filter_map(|p| p.file_name()).map(|n| n.to_string_lossy()).collect::<Vec<_>>(),
    });
    let path = dir.join("metadata.json");
    fs::write(&path, to_pretty(&meta)).map_err(io(&path))?;
    written.push(path);
    Ok(written)
}

fn to_pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json values serialize");
    s.push('\n');
    s
}

/// Header `coord_1..coord_d,verdict,margin`.
fn write_csv(path: &Path, t: &Table) -> Result<(), CliError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)?;
    let mut header: Vec<String> = (1..=t.dim).map(|i| format!("coord_{i}")).collect();
    header.extend(["verdict".into(), "margin".into()]);
    w.write_record(&header)?;
    for (p, verdict, margin) in &t.rows {
        let mut rec: Vec<String> = p.iter().map(|c| c.to_string()).collect();
        rec.push(verdict.clone());
        rec.push(margin.to_string());
        w.write_record(&rec)?;
    }
    w.flush().map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })
}
