use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::process::Command;

use homog_core::config::ExperimentConfig;
use homog_core::Result;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::commands::Outcome;

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub schema: &'static str,
    pub command: String,
    pub version: &'static str,
    pub git_describe: String,
    /// SHA-256 of the resolved config as JSON.
    pub config_hash: String,
    pub seed: u64,
    pub workers: usize,
    pub wall_time_s: f64,
    pub pass: bool,
    pub files: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str, cfg: &ExperimentConfig, workers: usize, wall_time_s: f64, pass: bool, files: Vec<String>) -> Self {
        Self {
            schema: "manifest_v1",
            command: command.into(),
            version: env!("CARGO_PKG_VERSION"),
            git_describe: git_describe(),
            config_hash: config_hash(cfg),
            seed: cfg.seed,
            workers,
            wall_time_s,
            pass,
            files,
        }
    }
}

pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let json = serde_json::to_string(&cfg.to_value()).unwrap_or_default();
    Sha256::digest(json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

fn git_describe() -> String {
    Command::new("git")
        .args(["describe", "--always", "--dirty", "--tags"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .map(|o| String::from_utf8_lossy(&o.stdout).trim().to_string())
        .unwrap_or_else(|| "unknown".into())
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

/// Writes one JSON report and one CSV per report, plus the sampled paths.
/// Repeated test names get a running index so nothing is overwritten.
pub fn write_outputs(dir: &Path, cfg: &ExperimentConfig, out: &Outcome) -> Result<Vec<String>> {
    std::fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
    for r in &out.reports {
        let k = seen.entry(r.test_name.as_str()).or_insert(0);
        let stem = if *k == 0 { r.test_name.clone() } else { format!("{}_{k}", r.test_name) };
        *k += 1;
        let mut w = create(dir, &format!("{stem}.json"))?;
        w.write_all(r.to_json()?.as_bytes())?;
        w.flush()?;
        let mut w = create(dir, &format!("{stem}.csv"))?;
        r.write_csv(&mut w)?;
        w.flush()?;
        files.push(format!("{stem}.json"));
        files.push(format!("{stem}.csv"));
    }
    for (i, p) in out.paths.iter().enumerate() {
        let name = format!("path_{i:04}.csv");
        let mut w = create(dir, &name)?;
        p.write_csv(&mut w)?;
        w.flush()?;
        files.push(name);
    }
    let mut w = create(dir, "config.json")?;
    w.write_all(serde_json::to_string_pretty(&cfg.to_value())?.as_bytes())?;
    w.flush()?;
    files.push("config.json".into());
    Ok(files)
}

pub fn write_manifest(dir: &Path, m: &Manifest) -> Result<()> {
    let mut w = create(dir, "manifest.json")?;
    w.write_all(serde_json::to_string_pretty(m)?.as_bytes())?;
    w.flush()?;
    Ok(())
}
