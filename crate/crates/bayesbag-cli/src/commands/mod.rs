pub mod diagnose;
pub mod gl_demo;
pub mod linreg_sim;
pub mod sampler_demo;

use std::path::{Path, PathBuf};

use crate::CliError;

/// Writes a file and reports the path on stdout.
pub fn write_output(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, CliError> {
    let path = dir.join(name);
    std::fs::write(&path, contents)?;
    println!("wrote {}", path.display());
    Ok(path)
}

/// Reads a comma-separated numeric matrix with uniform row width.
/// Input-format problems are configuration errors (exit 2).
pub fn read_matrix(path: &Path) -> Result<Vec<Vec<f64>>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    let mut rows = Vec::new();
    let mut width = None;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row: Result<Vec<f64>, _> = line.split(',').map(|f| f.trim().parse::<f64>()).collect();
        let row = row.map_err(|_| {
            CliError::config(format!("{}:{}: non-numeric field", path.display(), lineno + 1))
        })?;
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(CliError::config(format!(
                    "{}:{}: expected {w} fields, got {}",
                    path.display(),
                    lineno + 1,
                    row.len()
                )))
            }
            _ => {}
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::config(format!("{}: no data rows", path.display())));
    }
    Ok(rows)
}
