//! Writing scenario results to disk.

use std::io;
use std::path::{Path, PathBuf};

use crate::config::Format;
use crate::tasks::Report;

/// Environment variable that replaces the configured output directory.
pub const OUTPUT_DIR_ENV: &str = "OBLIQUE_OUTPUT_DIR";

/// Output directory: the environment override, else `output_dir` relative
/// to the config file, else the config file's directory.
pub fn resolve_dir(config_path: &Path, configured: Option<&Path>) -> PathBuf {
    if let Some(dir) = std::env::var_os(OUTPUT_DIR_ENV).filter(|v| !v.is_empty()) {
        return PathBuf::from(dir);
    }
    let base = config_path.parent().map(Path::to_path_buf).unwrap_or_default();
    match configured {
        Some(dir) if dir.is_absolute() => dir.to_path_buf(),
        Some(dir) => base.join(dir),
        None => base,
    }
}

/// Writes `report` to `path`, warning on stderr when a file is replaced.
pub fn write(report: &Report, format: Format, path: &Path) -> io::Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    if path.exists() {
        eprintln!("warning: overwriting {}", path.display());
    }
    match format {
        Format::Json => {
            let mut text = serde_json::to_string_pretty(&report.json).map_err(io::Error::other)?;
            text.push('\n');
            std::fs::write(path, text)
        }
        Format::Csv => {
            let table = report
                .table
                .as_ref()
                .ok_or_else(|| io::Error::other("task produced no table for csv output"))?;
            let mut w = csv::Writer::from_path(path)?;
            w.write_record(&table.header)?;
            for row in &table.rows {
                w.write_record(row)?;
            }
            w.flush()
        }
    }
}
