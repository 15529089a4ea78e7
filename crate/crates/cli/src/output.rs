//! Writing study artifacts: provenance headers, the summary file and the
//! FAILED marker.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use toml::Value;

use crate::config::Config;
use crate::error::{CliError, CliResult};
use crate::studies::Artifacts;

pub const SUMMARY: &str = "summary.txt";
pub const FAILED: &str = "FAILED";

/// Comment lines opening every output file. No timestamp, so that reruns are
/// byte-identical.
pub fn header(cfg: &Config) -> String {
    format!(
        "# svi {}\n# seed = {}\n# config_hash = {}\n",
        svi_core::VERSION,
        cfg.seed,
        cfg.hash()
    )
}

/// The resolved config followed by a `[results]` table. The file is valid
/// TOML and can be passed back as `--config`.
pub fn summary(cfg: &Config, results: &[(String, Value)]) -> String {
    let mut out = header(cfg);
    out.push_str(&cfg.canonical(true));
    out.push_str("\n[results]\n");
    let _ = writeln!(out, "version = {}", Value::String(svi_core::VERSION.into()));
    for (k, v) in results {
        let _ = writeln!(out, "{k} = {v}");
    }
    out
}

fn write(path: &Path, body: &str) -> CliResult<()> {
    fs::write(path, body).map_err(|e| CliError::io(path, e))
}

/// Write every artifact, then the summary, and clear any stale FAILED marker.
pub fn write_all(cfg: &Config, art: &Artifacts) -> CliResult<()> {
    let dir = &cfg.outputs;
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let head = header(cfg);
    for (name, body) in &art.files {
        write(&dir.join(name), &format!("{head}{body}"))?;
    }
    write(&dir.join(SUMMARY), &summary(cfg, &art.results))?;
    let marker = dir.join(FAILED);
    if marker.exists() {
        fs::remove_file(&marker).map_err(|e| CliError::io(&marker, e))?;
    }
    Ok(())
}

/// Best effort: a failure to write the marker must not hide the original
/// error, so problems here are only logged.
pub fn mark_failed(dir: &Path, err: &CliError) {
    let body = format!("svi {}\nerror: {err}\n", svi_core::VERSION);
    if let Err(e) = fs::create_dir_all(dir).and_then(|_| fs::write(dir.join(FAILED), body)) {
        eprintln!("svi: could not write the FAILED marker in {}: {e}", dir.display());
    }
}
