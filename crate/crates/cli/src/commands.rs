use std::fmt::Write as _;

use homog_core::chaos::{classify_limit, ChaosExpansion, Regime};
use homog_core::config::ExperimentConfig;
use homog_core::ensemble::par_paths;
use homog_core::gaussian_paths::{fbm_generator, fbm_sample_with, FouConfig, FouSampler, GridPath};
use homog_core::hermite_process::{HermiteSampler, HermiteSpec};
use homog_core::homogenizer::homog_compare;
use homog_core::report::ExperimentReport;
use homog_core::rng::substream;
use homog_core::scaling_limits::{
    a_matrix, area_drift_estimate, c_squared, clt_marginal_test, hermite_limit_test, LimitSpec,
};
use homog_core::stats::{mean, variance};
use homog_core::verify::{run_check, Scale, CHECKS};
use homog_core::{Error, Result};

use crate::Command;

/// Everything a command produced.
pub struct Outcome {
    pub reports: Vec<ExperimentReport>,
    /// Sampled paths, written one CSV each.
    pub paths: Vec<GridPath>,
}

impl Outcome {
    fn reports(reports: Vec<ExperimentReport>) -> Self {
        Self { reports, paths: Vec::new() }
    }
}

pub fn execute(cmd: Command, cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut out = match cmd {
        Command::Sample => sample(cfg)?,
        Command::Limits => Outcome::reports(vec![limits(cfg)?]),
        Command::Clt => Outcome::reports(clt(cfg)?),
        Command::Area => Outcome::reports(area(cfg)?),
        Command::Homogenize => {
            let sys = cfg.system().map_err(|e| Error::Argument(format!("config has no simulable system: {e}")))?;
            Outcome::reports(vec![homog_compare(&sys, &cfg.eps, cfg.paths, cfg.dt, cfg.seed)?])
        }
        Command::VerifyAll => Outcome::reports(verify_all(cfg)?),
        Command::Describe => unreachable!("describe prints and returns early"),
    };
    let resolved = cfg.to_value();
    for r in &mut out.reports {
        r.params.insert("command".into(), cmd.name().into());
        r.params.insert("config".into(), resolved.clone());
    }
    Ok(out)
}

fn observables(cfg: &ExperimentConfig) -> Vec<ChaosExpansion> {
    cfg.components.iter().map(|c| c.g.clone()).collect()
}

fn regime_label(h: f64, m: usize, regime: Regime) -> String {
    if (h - 0.5).abs() < 1e-12 {
        return "wiener (classical branch, H = 1/2)".into();
    }
    match regime {
        Regime::Wiener => "wiener".into(),
        Regime::Hermite => format!("hermite (rank-{m} Hermite process)"),
        Regime::Boundary => "boundary (logarithmic correction)".into(),
    }
}

fn alpha_label(regime: Regime, hstar: f64) -> String {
    match regime {
        Regime::Wiener => "alpha = eps^(-1/2)".into(),
        Regime::Boundary => "alpha = (eps |ln eps|)^(-1/2)".into(),
        Regime::Hermite => format!("alpha = eps^(H*-1) = eps^({:.6})", hstar - 1.0),
    }
}

pub fn describe(cfg: &ExperimentConfig) -> Result<String> {
    let mut s = String::new();
    let w = &mut s;
    let _ = writeln!(w, "name      {}", cfg.name);
    let _ = writeln!(w, "H         {}", cfg.h);
    let _ = writeln!(w, "T         {}", cfg.t);
    let _ = writeln!(w, "x0        {:?}", cfg.x0);
    let _ = writeln!(w, "eps       {:?}", cfg.eps);
    let _ = writeln!(w, "paths     {}   seed {}   dt {}", cfg.paths, cfg.seed, cfg.dt);
    let mut warnings = Vec::new();
    for (k, c) in cfg.components.iter().enumerate() {
        let ex = classify_limit(cfg.h, c.g.rank)?;
        let _ = writeln!(w, "component {k}");
        let _ = writeln!(w, "  field     {} (scale {}, amp {:?})", c.field.name(), c.scale, c.amp);
        let _ = writeln!(w, "  G         {} (rank {}, L2 norm {:.6})", c.g.source, c.g.rank, c.g.l2_norm);
        let _ = writeln!(w, "  H*        {:.6}", ex.hstar);
        let _ = writeln!(w, "  regime    {}", regime_label(cfg.h, c.g.rank, ex.regime));
        let _ = writeln!(w, "  scaling   {}", alpha_label(ex.regime, ex.hstar));
        match c_squared(&c.g, cfg.h) {
            Ok(v) => {
                let _ = writeln!(w, "  c^2       {v:.6}");
            }
            Err(e) => {
                let _ = writeln!(w, "  c^2       n/a ({e})");
            }
        }
        if ex.excluded_band && !ex.strict {
            warnings.push(format!(
                "WARNING: component {k} has rank {} inside the excluded band [{:.4}, {:.4}] (0 <= H* <= 1/2); the multiscale theorem does not cover it",
                c.g.rank,
                ex.band.0.min(ex.band.1),
                ex.band.0.max(ex.band.1)
            ));
        }
    }
    match cfg.system() {
        Ok(_) => {
            let _ = writeln!(w, "system    simulable");
        }
        Err(e) => {
            let _ = writeln!(w, "system    not simulable: {e}");
        }
    }
    for warning in warnings {
        let _ = writeln!(w, "\n!!! {warning}");
    }
    Ok(s)
}

fn sample(cfg: &ExperimentConfig) -> Result<Outcome> {
    let sc = &cfg.sample;
    let n = sc.paths;
    if n == 0 || n > 10_000 {
        return Err(Error::Resource(format!("sample paths must lie in 1..=10000, got {n}")));
    }
    let paths: Vec<GridPath> = match sc.model.as_str() {
        "fou" => {
            let sampler = FouSampler::new(FouConfig::new(cfg.h, cfg.eps[0])?, sc.t1, sc.dt)?;
            par_paths(n, cfg.seed, |_, s| sampler.sample(s))?
        }
        "fbm" => {
            let gen = fbm_generator(cfg.h, 0.0, sc.t1, sc.dt)?;
            par_paths(n, cfg.seed, |_, s| fbm_sample_with(&gen, 0.0, s, true))?
        }
        "hermite" => {
            let spec = HermiteSpec::calibrated(sc.m, cfg.h, sc.dt.min(0.01))?;
            let sampler = HermiteSampler::new(spec, sc.t1, sc.dt)?;
            par_paths(n, cfg.seed, |_, s| sampler.sample(s))?
        }
        other => return Err(Error::Argument(format!("unknown model {other:?}"))),
    };
    let mut rep = ExperimentReport::new("sample")
        .param("model", &sc.model)
        .param("h", cfg.h)
        .param("t1", sc.t1)
        .param("dt", sc.dt)
        .param("paths", n)
        .param("seed", cfg.seed);
    let mut finite = true;
    for (i, p) in paths.iter().enumerate() {
        finite &= p.values.iter().all(|v| v.is_finite());
        rep.push("mean", i as f64, mean(&p.values), 0.0);
        rep.push("variance", i as f64, variance(&p.values), 0.0);
        rep.push("terminal", i as f64, p.values[p.len() - 1], 0.0);
    }
    rep.pass = finite;
    rep.rule = "every sampled value is finite".into();
    Ok(Outcome { reports: vec![rep], paths })
}

fn limits(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let gs = observables(cfg);
    let spec = LimitSpec::new(&gs, cfg.h)?;
    let mut rep = ExperimentReport::new("limits").param("h", cfg.h);
    rep.eps_grid = cfg.eps.clone();
    for (k, c) in spec.components.iter().enumerate() {
        let x = k as f64;
        rep.push("rank", x, c.rank as f64, 0.0);
        rep.push("hstar", x, c.hstar, 0.0);
        rep.push("c_squared", x, c.c * c.c, 0.0);
        rep.push("hurst_out", x, c.hurst_out, 0.0);
        for &eps in &cfg.eps {
            rep.push(&format!("alpha[{k}]"), eps, c.alpha(eps, cfg.h)?, 0.0);
        }
        rep.note(format!("component {k}: regime {}", c.regime));
    }
    let wiener = spec.indices(Regime::Wiener);
    if !wiener.is_empty() {
        let ws: Vec<ChaosExpansion> = wiener.iter().map(|&i| gs[i].clone()).collect();
        let a = a_matrix(&ws, cfg.h, None)?;
        for (p, &i) in wiener.iter().enumerate() {
            for (q, &j) in wiener.iter().enumerate() {
                rep.push(&format!("A[{i},{j}]"), 0.0, a.get(p, q), 0.0);
                rep.push(&format!("A_alt[{i},{j}]"), 0.0, a.values_alt[p * a.n + q], 0.0);
            }
        }
        rep.note("A uses q! series weights; A_alt uses (q!)^2");
    }
    rep.pass = true;
    rep.rule = "informational: constants only".into();
    Ok(rep)
}

fn clt(cfg: &ExperimentConfig) -> Result<Vec<ExperimentReport>> {
    let mut reps = Vec::new();
    for (k, g) in observables(cfg).iter().enumerate() {
        let seed = substream(cfg.seed, k as u64);
        let rep = match classify_limit(cfg.h, g.rank)?.regime {
            Regime::Hermite => hermite_limit_test(g, cfg.h, &cfg.eps, cfg.t, cfg.paths, seed)?,
            _ => clt_marginal_test(g, cfg.h, &cfg.eps, cfg.t, cfg.paths, seed, None)?,
        };
        reps.push(rep.param("component", k));
    }
    Ok(reps)
}

fn area(cfg: &ExperimentConfig) -> Result<Vec<ExperimentReport>> {
    let gs = observables(cfg);
    let spec = LimitSpec::new(&gs, cfg.h)?;
    let wiener = spec.indices(Regime::Wiener);
    if wiener.is_empty() {
        return Err(Error::Argument("area drift needs at least one Wiener-regime component".into()));
    }
    let mut reps = Vec::new();
    for (p, &i) in wiener.iter().enumerate() {
        for &j in &wiener[p..] {
            let seed = substream(cfg.seed, (i * 64 + j) as u64);
            let rep = area_drift_estimate(&gs[i], &gs[j], cfg.h, &cfg.eps, cfg.t, cfg.paths, seed)?;
            reps.push(rep.param("pair", [i, j]));
        }
    }
    Ok(reps)
}

fn verify_all(cfg: &ExperimentConfig) -> Result<Vec<ExperimentReport>> {
    let scale = Scale::parse(&cfg.verify.scale)?;
    let ids: Vec<u32> =
        if cfg.verify.checks.is_empty() { CHECKS.iter().map(|(i, _)| *i).collect() } else { cfg.verify.checks.clone() };
    let mut reps = Vec::new();
    for id in ids {
        reps.extend(run_check(id, scale, cfg.seed)?);
    }
    Ok(reps)
}
