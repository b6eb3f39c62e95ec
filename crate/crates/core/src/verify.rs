//! The verification suite: one routine per check, each returning report
//! records with an embedded pass rule. `Scale::Full` runs the acceptance
//! sizes, `Scale::Smoke` a reduced version of the same computation.

use std::time::Instant;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::chaos::{hermite_eval, hermite_sup_bound_check, hermite_weighted, ChaosExpansion};
use crate::ensemble::{par_paths, with_workers};
use crate::error::{Error, Result};
use crate::gaussian_paths::{
    fbm_generator, fbm_sample_with, fou_correlation, FouConfig, FouSampler, GridPath, Model, PathMeta,
};
use crate::homogenizer::{homog_compare, Component, FieldKind, FieldSpec, MultiscaleSystem};
use crate::quadrature::gauss_hermite;
use crate::report::ExperimentReport;
use crate::rng::rng;
use crate::rough::{canonical_lift, rde_solve, LinearField};
use crate::scaling_limits::{
    area_drift_estimate, clt_marginal_test, hermite_limit_test, independence_test, toy_rate_test, OracleConfig,
};
use crate::stats::{loglog_slope, mean, mean_se};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    Smoke,
    Full,
}

impl Scale {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "smoke" => Ok(Scale::Smoke),
            "full" => Ok(Scale::Full),
            other => Err(Error::Argument(format!("unknown scale {other:?}; expected smoke or full"))),
        }
    }

    fn pick<T>(self, smoke: T, full: T) -> T {
        match self {
            Scale::Smoke => smoke,
            Scale::Full => full,
        }
    }
}

/// Check numbers and short names.
pub const CHECKS: [(u32, &str); 11] = [
    (1, "fbm_covariance"),
    (2, "fou_law"),
    (3, "hermite_suite"),
    (4, "rough_core"),
    (5, "toy_rate"),
    (6, "clt_marginal"),
    (7, "hermite_limit"),
    (8, "area_drift"),
    (9, "independence"),
    (10, "homogenization"),
    (11, "determinism"),
];

pub fn check_name(id: u32) -> Option<&'static str> {
    CHECKS.iter().find(|(i, _)| *i == id).map(|(_, n)| *n)
}

/// Runs check `id` with seed `seed_base + id`.
pub fn run_check(id: u32, scale: Scale, seed_base: u64) -> Result<Vec<ExperimentReport>> {
    let seed = seed_base.wrapping_add(id as u64);
    let mut reps = match id {
        1 => vec![fbm_covariance_check(scale.pick(2000, 10_000), seed)?],
        2 => vec![fou_law_check(0.75, scale.pick(40, 200), scale.pick(2000.0, 4000.0), seed)?],
        3 => vec![hermite_suite_check(seed)?],
        4 => vec![rough_core_check(seed)?],
        5 => [0.4, 0.75]
            .iter()
            .map(|&h| toy_rate_test(h, &[0.2, 0.1, 0.05, 0.025], 1.0, scale.pick(200, 500), seed))
            .collect::<Result<_>>()?,
        6 => {
            let oracle = OracleConfig { paths: scale.pick(2000, 8000), ..OracleConfig::default() };
            let eps: &[f64] = scale.pick(&[1e-2, 2e-3], &[1e-2, 1e-3]);
            vec![clt_marginal_test(&ChaosExpansion::hermite(2), 0.7, eps, 1.0, 2000, seed, Some(&oracle))?]
        }
        7 => {
            let eps: &[f64] = scale.pick(&[1e-2, 2e-3], &[1e-2, 1e-3]);
            vec![hermite_limit_test(&ChaosExpansion::hermite(2), 0.9, eps, 1.0, scale.pick(1000, 2000), seed)?]
        }
        8 => {
            let g = ChaosExpansion::hermite(10);
            vec![area_drift_estimate(&g, &g, 8.0 / 9.0, &[0.05, 0.02, 0.01], 1.0, scale.pick(1000, 4000), seed)?]
        }
        9 => {
            let (gw, gz) = (ChaosExpansion::hermite(10), ChaosExpansion::hermite(1));
            vec![independence_test(&gw, &gz, 8.0 / 9.0, 0.01, 1.0, scale.pick(1000, 4000), seed)?]
        }
        10 => {
            let eps: &[f64] = scale.pick(&[1e-2, 2e-3], &[1e-2, 1e-3]);
            let paths = scale.pick(1000, 2000);
            homogenization_systems()?
                .iter()
                .map(|sys| homog_compare(sys, eps, paths, 1e-3, seed))
                .collect::<Result<_>>()?
        }
        11 => vec![determinism_check(seed)?],
        other => return Err(Error::Argument(format!("no check numbered {other}; checks are 1..=11"))),
    };
    for r in &mut reps {
        r.params.insert("check".into(), id.into());
        r.params.insert("scale".into(), serde_json::to_value(scale)?);
    }
    Ok(reps)
}

/// The two end-to-end systems: `f = sin`, `G = H_2`, `H = 0.7`, `x_0 = 1`
/// (Wiener limit) and `f = 1/(1+x²)`, `G = H_1`, `H = 0.9`, `x_0 = 0`
/// (Young limit).
pub fn homogenization_systems() -> Result<Vec<MultiscaleSystem>> {
    [(0.7, 2, FieldKind::Sin, 1.0), (0.9, 1, FieldKind::Rational, 0.0)]
        .iter()
        .map(|&(h, m, kind, x0)| {
            MultiscaleSystem::new(
                h,
                vec![x0],
                1.0,
                vec![Component { g: ChaosExpansion::hermite(m), field: FieldSpec::unit(kind, 1) }],
            )
        })
        .collect()
}

fn fbm_cov(h: f64, t: f64, s: f64) -> f64 {
    0.5 * (t.powf(2.0 * h) + s.powf(2.0 * h) - (t - s).abs().powf(2.0 * h))
}

/// Grid pairs `(t, s)` on `[0, 1]` with step 0.01.
pub const COV_PAIRS: [(usize, usize); 10] =
    [(10, 10), (30, 10), (50, 20), (50, 50), (60, 30), (70, 40), (80, 20), (90, 90), (100, 50), (100, 100)];

/// `E B_t B_s` against `½(t^{2H} + s^{2H} − |t−s|^{2H})` for
/// `H ∈ {0.3, 0.6, 0.9}`.
///
/// Pass rule: every estimate within 4 standard errors.
pub fn fbm_covariance_check(n_paths: usize, seed: u64) -> Result<ExperimentReport> {
    let start = Instant::now();
    let dt = 0.01;
    let mut rep = ExperimentReport::new("fbm_covariance").param("n_paths", n_paths).param("seed", seed).param("dt", dt);
    let mut ok = true;
    let mut worst = 0.0f64;
    for (hi, &h) in [0.3, 0.6, 0.9].iter().enumerate() {
        let gen = fbm_generator(h, 0.0, 1.0, dt)?;
        let rows = par_paths(n_paths, seed.wrapping_add(hi as u64 * 7919), |_, s| {
            let p = fbm_sample_with(&gen, 0.0, s, true)?;
            Ok(COV_PAIRS.iter().map(|&(i, j)| p.values[i] * p.values[j]).collect::<Vec<_>>())
        })?;
        for (k, &(i, j)) in COV_PAIRS.iter().enumerate() {
            let col: Vec<f64> = rows.iter().map(|r| r[k]).collect();
            let (est, se) = (mean(&col), mean_se(&col));
            let exact = fbm_cov(h, i as f64 * dt, j as f64 * dt);
            let z = (est - exact).abs() / se;
            worst = worst.max(z);
            ok &= z <= 4.0;
            rep.push(&format!("cov_h{h}_t{}_s{}", i as f64 * dt, j as f64 * dt), h, est, se);
            rep.push(&format!("exact_h{h}_t{}_s{}", i as f64 * dt, j as f64 * dt), h, exact, 0.0);
        }
    }
    rep.push("max_abs_z", 0.0, worst, 0.0);
    rep.pass = ok;
    rep.rule = "|mean B_t B_s - exact| <= 4 s.e. at every (t, s) pair and H".into();
    rep.runtime_s = start.elapsed().as_secs_f64();
    Ok(rep)
}

/// Lags in units of `ε` for the autocorrelation fit.
pub fn acf_lags() -> Vec<f64> {
    (0..=10).map(|k| 20.0 * 10f64.powf(k as f64 / 10.0)).collect()
}

/// Stationary variance and autocorrelation decay of fOU at `ε = 1`,
/// `dt = 0.1`, on `n_paths` paths of length `t1`. The known mean zero is
/// used in both estimators.
///
/// Pass rule: variance within 0.03 of 1 and the log-log slope of the
/// autocorrelation over `s ∈ [20, 200]` within 0.1 of `2H − 2`.
pub fn fou_law_check(h: f64, n_paths: usize, t1: f64, seed: u64) -> Result<ExperimentReport> {
    let start = Instant::now();
    let dt = 0.1;
    let sampler = FouSampler::new(FouConfig::new(h, 1.0)?, t1, dt)?;
    let lags: Vec<usize> = acf_lags().iter().map(|s| (s / dt).round() as usize).collect();
    let rows = par_paths(n_paths, seed, |_, s| {
        let y = sampler.sample(s)?.values;
        let n = y.len();
        let var = y.iter().map(|v| v * v).sum::<f64>() / n as f64;
        let acov: Vec<f64> =
            lags.iter().map(|&l| y[..n - l].iter().zip(&y[l..]).map(|(a, b)| a * b).sum::<f64>() / (n - l) as f64).collect();
        Ok((var, acov))
    })?;
    let vars: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let var = mean(&vars);
    let mut rep = ExperimentReport::new("fou_law")
        .param("h", h)
        .param("n_paths", n_paths)
        .param("t1", t1)
        .param("dt", dt)
        .param("seed", seed);
    rep.push("variance", 0.0, var, mean_se(&vars));
    let mut acf = Vec::new();
    for (k, s) in acf_lags().iter().enumerate() {
        let col: Vec<f64> = rows.iter().map(|r| r.1[k]).collect();
        let r = mean(&col) / var;
        rep.push("acf", *s, r, mean_se(&col) / var);
        rep.push("acf_exact", *s, fou_correlation(h, *s)?, 0.0);
        acf.push(r);
    }
    if acf.iter().any(|r| *r <= 0.0) {
        rep.note("nonpositive autocorrelation estimate; slope not fitted");
        rep.rule = "variance within 0.03 of 1 and acf slope within 0.1 of 2H-2".into();
        rep.runtime_s = start.elapsed().as_secs_f64();
        return Ok(rep);
    }
    let fit = loglog_slope(&acf_lags(), &acf)?;
    rep.fitted = Some(fit.into());
    rep.push("acf_slope", 2.0 * h - 2.0, fit.slope, fit.slope_se);
    rep.pass = (var - 1.0).abs() <= 0.03 && (fit.slope - (2.0 * h - 2.0)).abs() <= 0.1;
    rep.rule = "variance within 0.03 of 1 and acf slope over s in [20, 200] within 0.1 of 2H-2".into();
    rep.runtime_s = start.elapsed().as_secs_f64();
    Ok(rep)
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}

fn factorial(k: usize) -> f64 {
    (1..=k).fold(1.0, |acc, j| acc * j as f64)
}

/// Hermite orthogonality by 60-point Gauss–Hermite quadrature, the
/// rotation identity `H_n(ax + by) = Σ C(n,k) a^k b^{n−k} H_k(x) H_{n−k}(y)`
/// for `a² + b² = 1` at random points, and the sup bound
/// `|e^{-x²/2} H_k(x)| ≤ 1.0865 √(k!)` for `k ≤ 12`.
///
/// Pass rule: orthogonality error ≤ 1e-9 (relative to `√(m! n!)`), identity
/// error ≤ 1e-8 (relative to the sum of absolute terms), bound holds.
pub fn hermite_suite_check(seed: u64) -> Result<ExperimentReport> {
    let start = Instant::now();
    let (x, w) = gauss_hermite(60);
    let mut ortho = 0.0f64;
    for m in 0..=12usize {
        for n in 0..=12usize {
            let mut s = 0.0;
            for (xi, wi) in x.iter().zip(&w) {
                s += wi * hermite_eval(m as i32, *xi)? * hermite_eval(n as i32, *xi)?;
            }
            let target = if m == n { factorial(m) } else { 0.0 };
            ortho = ortho.max((s - target).abs() / (factorial(m) * factorial(n)).sqrt());
        }
    }
    let mut r = rng(seed);
    let mut binom = 0.0f64;
    for _ in 0..200 {
        let theta: f64 = r.random_range(0.0..std::f64::consts::TAU);
        let (a, b) = (theta.cos(), theta.sin());
        let px: f64 = r.sample::<f64, _>(StandardNormal) * 2.0;
        let py: f64 = r.sample::<f64, _>(StandardNormal) * 2.0;
        for n in 0..=12usize {
            let lhs = hermite_eval(n as i32, a * px + b * py)?;
            let (mut rhs, mut abs) = (0.0, 0.0);
            for k in 0..=n {
                let term = binomial(n, k) * a.powi(k as i32) * b.powi((n - k) as i32)
                    * hermite_eval(k as i32, px)?
                    * hermite_eval((n - k) as i32, py)?;
                rhs += term;
                abs += term.abs();
            }
            binom = binom.max((lhs - rhs).abs() / abs.max(1.0));
        }
    }
    let grid: Vec<f64> = (0..=8000).map(|i| -20.0 + i as f64 * 0.005).collect();
    let mut bound_ok = true;
    let mut sup_ratio = 0.0f64;
    for k in 0..=12usize {
        bound_ok &= hermite_sup_bound_check(k, &grid)?;
        let sup = grid.iter().map(|&x| (hermite_weighted(k, x) * (-0.25 * x * x).exp()).abs()).fold(0.0, f64::max);
        sup_ratio = sup_ratio.max(sup / 1.0865);
    }
    let mut rep = ExperimentReport::new("hermite_suite").param("seed", seed);
    rep.push("orthogonality_error", 0.0, ortho, 0.0);
    rep.push("binomial_identity_error", 0.0, binom, 0.0);
    rep.push("sup_bound_ratio", 0.0, sup_ratio, 0.0);
    rep.pass = ortho <= 1e-9 && binom <= 1e-8 && bound_ok;
    rep.rule = "orthogonality <= 1e-9, rotation identity <= 1e-8, sup bound holds for k <= 12".into();
    rep.runtime_s = start.elapsed().as_secs_f64();
    Ok(rep)
}

fn random_walk(dim: usize, steps: usize, seed: u64) -> Result<GridPath> {
    let mut r = rng(seed);
    let dt = 1.0 / steps as f64;
    let mut values = vec![0.0; dim];
    for k in 0..steps {
        for i in 0..dim {
            let z: f64 = r.sample(StandardNormal);
            values.push(values[k * dim + i] + dt.sqrt() * z);
        }
    }
    GridPath::new(0.0, dt, dim, values, PathMeta::new(Model::Fbm, seed).with_mode("random_walk"))
}

/// Chen's relation on 100 lifted random walks, the 1-d identity
/// `𝕏_{s,t} = ½(X_{s,t})²` (relative to `½(Σ|ΔX|)²`), and the Davie scheme on `dx = x dt`.
///
/// Pass rule: Chen residual < 1e-12, 1-d identity < 1e-10 relative, and
/// `|x_1 − e| < 5 dt`.
pub fn rough_core_check(seed: u64) -> Result<ExperimentReport> {
    let start = Instant::now();
    let mut r = rng(seed);
    let (mut chen, mut sym) = (0.0f64, 0.0f64);
    for p in 0..100u64 {
        let x = canonical_lift(&random_walk(2, 200, seed.wrapping_add(p))?, 0.45)?;
        for _ in 0..5 {
            let mut idx = [r.random_range(0..=200usize), r.random_range(0..=200usize), r.random_range(0..=200usize)];
            idx.sort();
            chen = chen.max(x.chen_residual(idx[0], idx[1], idx[2]));
        }
        let x1 = canonical_lift(&random_walk(1, 200, seed.wrapping_add(1000 + p))?, 0.45)?;
        for _ in 0..5 {
            let (a, b) = (r.random_range(0..200usize), r.random_range(0..=200usize));
            let (s, t) = (a.min(b), a.max(b).max(a.min(b) + 1));
            let dx = x1.increment(s, t)[0];
            // relative to the size of the folded terms, ½(Σ|ΔX|)²
            let total: f64 = (s..t).map(|k| x1.increment(k, k + 1)[0].abs()).sum();
            sym = sym.max((x1.second_level(s, t)[0] - 0.5 * dx * dx).abs() / (0.5 * total * total));
        }
    }
    let dt = 1e-3;
    let n = (1.0 / dt) as usize;
    let line = GridPath::scalar(0.0, dt, (0..=n).map(|k| k as f64 * dt).collect(), PathMeta::new(Model::Fbm, 0).with_mode("time"))?;
    let sol = rde_solve(&LinearField { m: 1, c: vec![1.0] }, &canonical_lift(&line, 0.9)?, &[1.0])?;
    let err = (sol.values[n] - 1f64.exp()).abs();
    let mut rep = ExperimentReport::new("rough_core").param("seed", seed).param("rde_dt", dt);
    rep.push("chen_residual", 0.0, chen, 0.0);
    rep.push("symmetric_part_error", 0.0, sym, 0.0);
    rep.push("rde_error_over_dt", dt, err / dt, 0.0);
    rep.pass = chen < 1e-12 && sym < 1e-10 && err < 5.0 * dt;
    rep.rule = "chen residual < 1e-12, 1-d second level = (dX)^2/2 to 1e-10 relative, |x_1 - e| < 5 dt".into();
    rep.runtime_s = start.elapsed().as_secs_f64();
    Ok(rep)
}

/// Runs a reduced toy-rate and CLT ensemble on one worker and on four, and
/// compares the CSV bytes.
///
/// Pass rule: identical bytes.
pub fn determinism_check(seed: u64) -> Result<ExperimentReport> {
    let start = Instant::now();
    let run = |workers: usize| -> Result<Vec<u8>> {
        with_workers(workers, || {
            let mut out = Vec::new();
            toy_rate_test(0.6, &[0.2, 0.1, 0.05], 1.0, 64, seed)?.write_csv(&mut out)?;
            clt_marginal_test(&ChaosExpansion::hermite(2), 0.7, &[1e-2], 1.0, 200, seed, None)?.write_csv(&mut out)?;
            Ok(out)
        })
    };
    let (a, b) = (run(1)?, run(4)?);
    let mut rep = ExperimentReport::new("determinism").param("seed", seed).param("workers", [1, 4]);
    rep.push("csv_bytes", 1.0, a.len() as f64, 0.0);
    rep.push("csv_bytes", 4.0, b.len() as f64, 0.0);
    rep.pass = a == b;
    rep.rule = "CSV output identical for 1 and 4 workers".into();
    rep.runtime_s = start.elapsed().as_secs_f64();
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_and_errors() {
        assert_eq!(check_name(10), Some("homogenization"));
        assert!(check_name(12).is_none());
        assert!(run_check(0, Scale::Smoke, 0).is_err());
        assert_eq!(Scale::parse("full").unwrap(), Scale::Full);
        assert!(Scale::parse("huge").is_err());
    }

    #[test]
    fn cheap_checks_pass() {
        for id in [3, 4] {
            let reps = run_check(id, Scale::Smoke, 0).unwrap();
            assert!(reps.iter().all(|r| r.pass), "{:?}", reps);
        }
    }

    #[test]
    fn binomial_coefficients() {
        assert_eq!(binomial(10, 3), 120.0);
        assert_eq!(binomial(4, 0), 1.0);
    }
}
