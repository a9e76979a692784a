use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::CliError;

/// Fixed 17-significant-digit scientific notation.
pub fn float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Rows of already formatted cells under a header.
pub fn csv(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| CliError::Compute(format!("csv: {e}"));
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(&r).map_err(io)?;
    }
    w.into_inner()
        .map_err(|e| CliError::Compute(format!("csv: {e}")))
}

pub fn json<T: Serialize>(v: &T) -> Result<Vec<u8>, CliError> {
    let mut out = serde_json::to_vec_pretty(v).map_err(|e| CliError::Compute(format!("json: {e}")))?;
    out.push(b'\n');
    Ok(out)
}

/// Writes to `path`, or to stdout when there is none.
pub fn emit(path: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, bytes)
            .map_err(|e| CliError::Compute(format!("writing {}: {e}", p.display()))),
        None => io::stdout()
            .write_all(bytes)
            .map_err(|e| CliError::Compute(format!("stdout: {e}"))),
    }
}

/// `--out` wins over the configured path.
pub fn pick<'a>(cli: &'a Option<PathBuf>, cfg: &'a Option<PathBuf>) -> Option<&'a Path> {
    cli.as_deref().or(cfg.as_deref())
}
