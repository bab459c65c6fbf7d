//! CSV artifacts. Every file starts with a `#schema=v1` marker line and a
//! header row; floats are written with 17 significant digits so values
//! round-trip exactly and reruns are byte-identical.

use std::io::Write;
use std::path::Path;

use sindex_core::optim::Trajectory;
use sindex_core::select::SelectionReport;

use crate::error::{CliError, Result};

pub const CSV_SCHEMA_LINE: &str = "#schema=v1";

pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn fmt_opt_float(x: Option<f64>) -> String {
    match x {
        Some(v) => fmt_float(v),
        None => String::new(),
    }
}

/// Writes the recorded descent path: one row per record with the step, the
/// training loss, and the truth-relative diagnostics when present.
pub fn write_trajectory_csv<B>(path: &Path, trajectory: &Trajectory<B>) -> Result<()> {
    let mut out = String::new();
    out.push_str(CSV_SCHEMA_LINE);
    out.push('\n');
    out.push_str("t,loss,dist_sq,max_off_support\n");
    for rec in &trajectory.records {
        out.push_str(&format!(
            "{},{},{},{}\n",
            rec.t,
            fmt_float(rec.loss),
            fmt_opt_float(rec.dist_sq),
            fmt_opt_float(rec.max_off_support),
        ));
    }
    std::fs::write(path, out).map_err(CliError::io(format!("writing {}", path.display())))
}

/// Writes scored stopping-time candidates, flagging the selected row.
pub fn write_selection_csv(path: &Path, report: &SelectionReport) -> Result<()> {
    let mut out = String::new();
    out.push_str(CSV_SCHEMA_LINE);
    out.push('\n');
    out.push_str("t,train_loss,test_risk,selected\n");
    for c in &report.candidates {
        out.push_str(&format!(
            "{},{},{},{}\n",
            c.t,
            fmt_float(c.train_loss),
            fmt_float(c.test_risk),
            u8::from(c.t == report.selected_t),
        ));
    }
    std::fs::write(path, out).map_err(CliError::io(format!("writing {}", path.display())))
}

/// Reads back the `(t, loss)` columns of a trajectory file.
pub fn read_trajectory_csv(path: &Path) -> Result<Vec<(usize, f64)>> {
    let text = std::fs::read_to_string(path)
        .map_err(CliError::io(format!("reading {}", path.display())))?;
    let mut lines = text.lines();
    match lines.next() {
        Some(l) if l == CSV_SCHEMA_LINE => {}
        other => {
            return Err(CliError::Config(format!(
                "{}: expected schema line, found {:?}",
                path.display(),
                other
            )))
        }
    }
    match lines.next() {
        Some(h) if h.starts_with("t,loss") => {}
        other => {
            return Err(CliError::Config(format!(
                "{}: unexpected header {:?}",
                path.display(),
                other
            )))
        }
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let short = || CliError::Config(format!("{}: short row {}", path.display(), i + 3));
        let t = parts
            .next()
            .ok_or_else(short)?
            .parse::<usize>()
            .map_err(|e| CliError::Config(format!("{}: row {}: {e}", path.display(), i + 3)))?;
        let loss = parts
            .next()
            .ok_or_else(short)?
            .parse::<f64>()
            .map_err(|e| CliError::Config(format!("{}: row {}: {e}", path.display(), i + 3)))?;
        rows.push((t, loss));
    }
    Ok(rows)
}

/// Appends a stream of metric rows under a fixed header; used by the
/// benchmark driver.
pub fn write_csv_table(path: &Path, header: &str, rows: &[String]) -> Result<()> {
    let mut file = std::fs::File::create(path)
        .map_err(CliError::io(format!("creating {}", path.display())))?;
    let mut out = String::new();
    out.push_str(CSV_SCHEMA_LINE);
    out.push('\n');
    out.push_str(header);
    out.push('\n');
    for row in rows {
        out.push_str(row);
        out.push('\n');
    }
    file.write_all(out.as_bytes())
        .map_err(CliError::io(format!("writing {}", path.display())))
}
