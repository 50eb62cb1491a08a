use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;

use crate::CliError;

/// Provenance written at the top of every output file. Wall time is logged
/// rather than stored so that reruns are byte-identical.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: String,
    pub config_digest: String,
    pub master_seed: u64,
    pub tool_version: String,
}

impl RunManifest {
    pub fn new(command: String, config: &crate::config::LoadedConfig, master_seed: u64) -> Self {
        Self {
            command,
            config: config.canonical.clone(),
            config_digest: config.digest.clone(),
            master_seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    pub fn comment_lines(&self) -> String {
        format!(
            "# command: {}\n# config: {}\n# config_digest: {}\n# master_seed: {}\n# tool_version: modesim {}\n",
            self.command, self.config, self.config_digest, self.master_seed, self.tool_version
        )
    }
}

pub fn emit(out: Option<&Path>, body: &str) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, body).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display()))),
        None => io::stdout()
            .write_all(body.as_bytes())
            .map_err(|e| CliError::Io(e.to_string())),
    }
}

/// Inclusive `lo:step:hi` grid.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::Config(format!("grid `{spec}` must be lo:step:hi with step > 0 and lo <= hi"));
    let parts: Vec<f64> = spec
        .split(':')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| bad())?;
    let [lo, step, hi] = parts[..] else {
        return Err(bad());
    };
    if !(step > 0.0 && lo <= hi && lo.is_finite() && hi.is_finite()) {
        return Err(bad());
    }
    let n = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    if n > 1_000_000 {
        return Err(CliError::Config(format!("grid `{spec}` has {n} points")));
    }
    // Rounding to 1e-12 keeps values like 0.3 from printing as 0.30000000000000004.
    Ok((0..n).map(|k| ((lo + k as f64 * step) * 1e12).round() / 1e12).collect())
}

pub fn parse_range(spec: &str) -> Result<(f64, f64), CliError> {
    let bad = || CliError::Config(format!("range `{spec}` must be lo:hi with lo < hi"));
    let (lo, hi) = spec.split_once(':').ok_or_else(bad)?;
    let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
    if lo >= hi || !lo.is_finite() || !hi.is_finite() {
        return Err(bad());
    }
    Ok((lo, hi))
}
