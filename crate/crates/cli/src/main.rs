mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use homog_core::config::ExperimentConfig;
use homog_core::ensemble::with_workers;
use homog_core::hermite_process::{load_calibration_cache, save_calibration_cache};
use homog_core::Error;

/// Bundled configuration used by `verify-all` when `--config` is absent.
pub const SMOKE_CONFIG: &str = include_str!("../configs/smoke.toml");

/// Environment variable naming the calibration cache directory.
pub const CACHE_ENV: &str = "FRAC_HOMOG_CACHE";

#[derive(Parser, Debug)]
#[command(name = "frac-homog", version, about = "Slow/fast systems driven by fractional Ornstein-Uhlenbeck noise")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Experiment config (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Output directory for reports, CSV tables and the manifest.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,

    /// Overrides the config seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    pub workers: usize,

    /// Comma-separated eps list; overrides the config.
    #[arg(long, global = true, value_delimiter = ',')]
    pub eps: Option<Vec<f64>>,

    /// Ensemble size; overrides the config.
    #[arg(long, global = true)]
    pub paths: Option<usize>,

    /// Config override `key=value`, dotted keys, repeatable.
    #[arg(long = "override", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Draw sample paths of fOU, fBM or a Hermite process.
    Sample,
    /// Limit constants: rank, H*, regime, scaling and c^2 per component, and A.
    Limits,
    /// Single-scale limit theorem per component.
    Clt,
    /// Area drift of the lifted functionals.
    Area,
    /// Slow/fast system against the effective equation.
    Homogenize,
    /// The verification suite.
    VerifyAll,
    /// Print the resolved configuration and its limit classification.
    Describe,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Sample => "sample",
            Command::Limits => "limits",
            Command::Clt => "clt",
            Command::Area => "area",
            Command::Homogenize => "homogenize",
            Command::VerifyAll => "verify-all",
            Command::Describe => "describe",
        }
    }
}

/// Exit code for an error: 2 for config problems and parameters the
/// algorithms reject, 3 for numeric divergence, 4 for resource caps, 1
/// otherwise.
pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Parse { .. } | Error::Argument(_) | Error::Range(_) | Error::Contract(_) | Error::NotCentred { .. } => 2,
        Error::Divergence { .. } | Error::Numeric(_) => 3,
        Error::Resource(_) => 4,
        _ => 1,
    }
}

fn load_config(cli: &Cli) -> Result<(ExperimentConfig, String), Error> {
    let text = match &cli.config {
        Some(p) => std::fs::read_to_string(p)
            .map_err(|e| Error::Argument(format!("cannot read config {}: {e}", p.display())))?,
        None if cli.command == Command::VerifyAll => SMOKE_CONFIG.to_string(),
        None => return Err(Error::Argument("--config is required for this command".into())),
    };
    let mut overrides = cli.overrides.clone();
    if let Some(s) = cli.seed {
        overrides.push(format!("seed={s}"));
    }
    if let Some(eps) = &cli.eps {
        let list: Vec<String> = eps.iter().map(|e| format!("{e:e}")).collect();
        overrides.push(format!("eps=[{}]", list.join(", ")));
    }
    if let Some(p) = cli.paths {
        overrides.push(format!("paths={p}"));
    }
    Ok((ExperimentConfig::parse_with_overrides(&text, &overrides)?, text))
}

fn run(cli: &Cli) -> Result<bool, Error> {
    let start = Instant::now();
    let (cfg, _) = load_config(cli)?;
    if cli.command == Command::Describe {
        print!("{}", commands::describe(&cfg)?);
        return Ok(true);
    }
    let cache = std::env::var_os(CACHE_ENV).map(PathBuf::from);
    if let Some(dir) = &cache {
        load_calibration_cache(dir)?;
    }
    let outcome = with_workers(cli.workers, || commands::execute(cli.command, &cfg))?;
    if let Some(dir) = &cache {
        save_calibration_cache(dir)?;
    }
    let pass = outcome.reports.iter().all(|r| r.pass);
    let files = output::write_outputs(&cli.out, &cfg, &outcome)?;
    let manifest = output::Manifest::new(cli.command.name(), &cfg, cli.workers, start.elapsed().as_secs_f64(), pass, files);
    output::write_manifest(&cli.out, &manifest)?;
    for r in &outcome.reports {
        println!("{:<16} {:<5} {}", r.test_name, if r.pass { "pass" } else { "FAIL" }, r.rule);
    }
    Ok(pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("frac-homog {}: {e}", cli.command.name());
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Parse { line: 1, column: 1, message: String::new() }), 2);
        assert_eq!(exit_code(&Error::Contract("x".into())), 2);
        assert_eq!(exit_code(&Error::Divergence { step: 3, norm: 1e9, seed: Some(5) }), 3);
        assert_eq!(exit_code(&Error::Resource("x".into())), 4);
        assert_eq!(exit_code(&Error::Accuracy("x".into())), 1);
    }

    #[test]
    fn bundled_config_parses() {
        let cfg = ExperimentConfig::parse(SMOKE_CONFIG).unwrap();
        assert_eq!(cfg.verify.scale, "full");
        assert!(cfg.verify.checks.is_empty());
    }
}
