//! Text output helpers shared by the CLI and trace writers.

use std::path::Path;

use crate::error::Result;

/// Float with 17 significant digits, `.` as decimal separator.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Comma-joined row of formatted floats.
pub fn row(values: &[f64]) -> String {
    values.iter().map(|&v| num(v)).collect::<Vec<_>>().join(",")
}

/// CSV text from a header and rows of floats, `\n` line endings.
pub fn csv(header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for r in rows {
        out.push_str(&row(&r));
        out.push('\n');
    }
    out
}

pub fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(name), contents)?;
    Ok(())
}
