//! Monte Carlo checks of the limit theorems. Each ensemble draws stationary
//! fOU paths on a grid resolving the fast scale and evaluates scaled
//! functionals at a few times.

use std::time::Instant;

use super::functional::{functional_values, iterated_integral};
use super::{a_series, c_squared, c_squared_oracle, finite_eps_variance, LimitComponent, OracleConfig, SeriesWeight};
use crate::chaos::{ChaosExpansion, Regime};
use crate::ensemble::par_paths;
use crate::error::{ensure, Error, Result};
use crate::gaussian_paths::{FouConfig, FouSampler, GridPath, DEFAULT_STEPS_PER_EPS};
use crate::hermite_process::{HermiteSampler, HermiteSpec};
use crate::report::ExperimentReport;
use crate::rng::substream;
use crate::stats::{ensemble_moments, ks_one_sample, loglog_slope, mean, mean_se, normal_cdf, pearson};

/// fOU grid for one `ε`: `[0, t1]` with `DEFAULT_STEPS_PER_EPS` steps per
/// `ε`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleGrid {
    pub h: f64,
    pub eps: f64,
    pub t1: f64,
    pub dt: f64,
}

impl EnsembleGrid {
    pub fn new(h: f64, eps: f64, t1: f64) -> Self {
        Self { h, eps, t1, dt: eps / DEFAULT_STEPS_PER_EPS as f64 }
    }

    pub fn index_of(&self, t: f64) -> usize {
        (t / self.dt).round() as usize
    }
}

/// Applies `f` to `n_paths` fOU paths drawn on `grid`.
pub fn fou_ensemble<T: Send>(
    grid: &EnsembleGrid,
    n_paths: usize,
    seed: u64,
    f: impl Fn(&GridPath) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    let sampler = FouSampler::new(FouConfig::new(grid.h, grid.eps)?, grid.t1, grid.dt)?;
    par_paths(n_paths, seed, |_, s| f(&sampler.sample(s)?))
}

fn check_eps_list(eps_list: &[f64]) -> Result<()> {
    ensure(!eps_list.is_empty(), || "eps list is empty".into())?;
    ensure(eps_list.iter().all(|&e| e > 0.0 && e <= 0.5), || format!("eps values must lie in (0, 1/2]: {eps_list:?}"))
}

fn elapsed(start: Instant) -> f64 {
    start.elapsed().as_secs_f64()
}

/// KS distance of `{X^ε_t}` against `N(0, c² t)` for each `ε`.
///
/// Pass rule: the KS statistic at the last (smallest) `ε` is below the 1%
/// critical value and not above the one at the first `ε`. With `c = 0` the
/// ensemble variance must instead decrease along the list.
pub fn clt_marginal_test(
    g: &ChaosExpansion,
    h: f64,
    eps_list: &[f64],
    t: f64,
    n_paths: usize,
    seed: u64,
    oracle: Option<&OracleConfig>,
) -> Result<ExperimentReport> {
    let start = Instant::now();
    check_eps_list(eps_list)?;
    ensure(!g.is_zero(), || "observable is zero".into())?;
    let comp = LimitComponent::new(g.clone(), h)?;
    if comp.regime == Regime::Hermite {
        return Err(Error::Contract(format!("rank {} at H = {h} is in the Hermite regime; use hermite_limit_test", g.rank)));
    }
    let c2 = c_squared(g, h)?;
    let mut rep = ExperimentReport::new("clt_marginal")
        .param("h", h)
        .param("rank", g.rank)
        .param("observable", &g.source)
        .param("coeffs", &g.coeffs)
        .param("t", t)
        .param("n_paths", n_paths)
        .param("seed", seed)
        .param("regime", comp.regime)
        .param("c_squared", c2);
    rep.eps_grid = eps_list.to_vec();
    let mut ks = Vec::new();
    let mut vars = Vec::new();
    for (i, &eps) in eps_list.iter().enumerate() {
        let grid = EnsembleGrid::new(h, eps, t);
        let alpha = comp.alpha(eps, h)?;
        let k = grid.index_of(t);
        let xs = fou_ensemble(&grid, n_paths, substream(seed, i as u64), |y| {
            Ok(functional_values(g, &y.values, y.dt, alpha)[k])
        })?;
        let m = ensemble_moments(&xs, 4)?;
        rep.push("variance", eps, m.variance(), m.ci[1]);
        rep.push("variance_exact", eps, finite_eps_variance(g, h, eps, t, alpha)?, 0.0);
        rep.push("skewness", eps, m.skewness, m.skewness_ci);
        vars.push(m.variance());
        if c2 > 0.0 {
            let sd = (c2 * t).sqrt();
            let r = ks_one_sample(&xs, |x| normal_cdf(x / sd))?;
            rep.push("ks", eps, r.stat, 0.0);
            rep.push("ks_critical_1pct", eps, r.critical_1pct, 0.0);
            ks.push(r);
        }
    }
    let mut oracle_ok = true;
    if let (Some(cfg), Regime::Wiener) = (oracle, comp.regime) {
        let check = c_squared_oracle(g, h, cfg)?;
        rep.push("c_squared_series", cfg.horizon, check.series, 0.0);
        rep.push("c_squared_mc", cfg.horizon, check.mc, check.mc_se);
        rep.push("c_squared_tail", cfg.horizon, check.tail, 0.0);
        oracle_ok = check.rel_gap() <= 0.05;
        if !oracle_ok {
            rep.note(format!("c^2 oracle off by {:.1}%", 100.0 * check.rel_gap()));
        }
    }
    if c2 > 0.0 {
        let (first, last) = (ks[0], ks[ks.len() - 1]);
        rep.pass = oracle_ok && last.pass_1pct() && last.stat <= first.stat.max(last.critical_1pct);
        rep.rule = "KS(X^eps_t, N(0, c^2 t)) at the smallest eps below 1.63/sqrt(n) and not above the KS at the largest eps; with an oracle, c^2 within 5% of it".into();
    } else {
        rep.pass = vars.windows(2).all(|w| w[1] <= w[0]);
        rep.rule = "c = 0: ensemble variance decreases along the eps list".into();
        rep.note("degenerate limit (c = 0)");
    }
    rep.runtime_s = elapsed(start);
    Ok(rep)
}

/// Variance law and shape of `X^ε_t` in the Hermite regime.
///
/// At each `ε` the variance is estimated at `t/8, t/4, t/2, t`. Pass rule:
/// at the smallest `ε` the log-log slope of the variance in `t` is within
/// 0.05 of `2H*`, `Var(X_t)/(c² t^{2H*})` is within `max(5%, 4 s.e.)` of 1,
/// and for rank 2 the skewness of `X_t/√Var` matches a directly simulated
/// `Z^{H*,2}_1` within 4 standard errors.
pub fn hermite_limit_test(
    g: &ChaosExpansion,
    h: f64,
    eps_list: &[f64],
    t: f64,
    n_paths: usize,
    seed: u64,
) -> Result<ExperimentReport> {
    let start = Instant::now();
    check_eps_list(eps_list)?;
    ensure(!g.is_zero(), || "observable is zero".into())?;
    let comp = LimitComponent::new(g.clone(), h)?;
    if comp.regime != Regime::Hermite {
        return Err(Error::Contract(format!("rank {} at H = {h} is not in the Hermite regime", g.rank)));
    }
    let hs = comp.hstar;
    let c2 = comp.c * comp.c;
    let mut rep = ExperimentReport::new("hermite_limit")
        .param("h", h)
        .param("rank", g.rank)
        .param("observable", &g.source)
        .param("coeffs", &g.coeffs)
        .param("hstar", hs)
        .param("t", t)
        .param("n_paths", n_paths)
        .param("seed", seed)
        .param("c_squared", c2);
    rep.eps_grid = eps_list.to_vec();
    let times: Vec<f64> = (0..4).map(|j| t / 2f64.powi(3 - j)).collect();
    let mut last_vars = Vec::new();
    let mut last_ratio = (0.0, 0.0);
    let mut last_x = Vec::new();
    for (i, &eps) in eps_list.iter().enumerate() {
        let grid = EnsembleGrid::new(h, eps, t);
        let alpha = comp.alpha(eps, h)?;
        let idx: Vec<usize> = times.iter().map(|&s| grid.index_of(s)).collect();
        let rows = fou_ensemble(&grid, n_paths, substream(seed, i as u64), |y| {
            let x = functional_values(g, &y.values, y.dt, alpha);
            Ok(idx.iter().map(|&k| x[k]).collect::<Vec<f64>>())
        })?;
        let mut vars = Vec::new();
        for (j, &s) in times.iter().enumerate() {
            let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            let m = ensemble_moments(&col, 2)?;
            vars.push(m.variance());
            if j == times.len() - 1 {
                let scale = c2 * s.powf(2.0 * hs);
                last_ratio = (m.variance() / scale, m.se(2) / scale);
                rep.push("variance_ratio", eps, last_ratio.0, m.ci[1] / scale);
                rep.push("variance_ratio_exact", eps, finite_eps_variance(g, h, eps, s, alpha)? / scale, 0.0);
                last_x = col;
            }
        }
        last_vars = vars;
    }
    for (s, v) in times.iter().zip(&last_vars) {
        rep.push("variance_vs_t", *s, *v, 0.0);
    }
    let fit = loglog_slope(&times, &last_vars)?;
    rep.fitted = Some(fit.into());
    let slope_ok = (fit.slope - 2.0 * hs).abs() <= 0.05;
    let ratio_ok = (last_ratio.0 - 1.0).abs() <= 0.05f64.max(4.0 * last_ratio.1);
    rep.push("slope", 2.0 * hs, fit.slope, fit.slope_se);
    let mut shape_ok = true;
    if g.rank == 2 {
        let sd = mean_sd(&last_x);
        let std_x: Vec<f64> = last_x.iter().map(|x| x / sd).collect();
        let mx = ensemble_moments(&std_x, 4)?;
        let spec = HermiteSpec::calibrated(2, hs, ROSENBLATT_STEP)?;
        let sampler = HermiteSampler::new(spec, 1.0, ROSENBLATT_STEP)?;
        let z = par_paths(n_paths, substream(seed, 0x2B), |_, s| Ok(*sampler.sample(s)?.values.last().unwrap_or(&0.0)))?;
        let mz = ensemble_moments(&z, 4)?;
        rep.push("skewness_x", 1.0, mx.skewness, mx.skewness_ci);
        rep.push("skewness_z", 1.0, mz.skewness, mz.skewness_ci);
        rep.push("kurtosis_x", 1.0, mx.kurtosis, mx.kurtosis_ci);
        rep.push("kurtosis_z", 1.0, mz.kurtosis, mz.kurtosis_ci);
        let se = ((mx.skewness_ci / 1.96).powi(2) + (mz.skewness_ci / 1.96).powi(2)).sqrt();
        shape_ok = (mx.skewness - mz.skewness).abs() <= 4.0 * se;
    }
    rep.pass = slope_ok && ratio_ok && shape_ok;
    rep.rule = "smallest eps: |slope - 2H*| <= 0.05, |Var/(c^2 t^{2H*}) - 1| <= max(0.05, 4 se), rank 2: |skew_X - skew_Z| <= 4 se".into();
    rep.runtime_s = elapsed(start);
    Ok(rep)
}

/// Wiener grid step for the reference Rosenblatt ensemble.
const ROSENBLATT_STEP: f64 = 2e-3;

fn mean_sd(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)).sqrt()
}

/// Ensemble mean of `𝕏^{i,j,ε}_{0,t}` against `t A^{i,j}`.
///
/// Pass rule: at every `ε` the mean lies within 4 standard errors of
/// `t A^{i,j}` with `q!` series weights. The `(q!)²` target is reported
/// alongside, with a note on which weight the data support.
pub fn area_drift_estimate(
    gi: &ChaosExpansion,
    gj: &ChaosExpansion,
    h: f64,
    eps_list: &[f64],
    t: f64,
    n_paths: usize,
    seed: u64,
) -> Result<ExperimentReport> {
    let start = Instant::now();
    check_eps_list(eps_list)?;
    for g in [gi, gj] {
        ensure(!g.is_zero(), || "observable is zero".into())?;
        let c = LimitComponent::new(g.clone(), h)?;
        if !(c.regime == Regime::Wiener && c.hstar < 0.0) {
            return Err(Error::Contract(format!("rank {} at H = {h} has H* = {} (need H* < 0)", g.rank, c.hstar)));
        }
    }
    let a = a_series(gi, gj, h, SeriesWeight::Factorial, None)?;
    let a_alt = a_series(gi, gj, h, SeriesWeight::FactorialSquared, None)?;
    let mut rep = ExperimentReport::new("area_drift")
        .param("h", h)
        .param("observable_i", &gi.source)
        .param("observable_j", &gj.source)
        .param("t", t)
        .param("n_paths", n_paths)
        .param("seed", seed)
        .param("a_factorial", a)
        .param("a_factorial_squared", a_alt);
    rep.eps_grid = eps_list.to_vec();
    let mut all_ok = true;
    let mut last = (0.0, 0.0);
    for (i, &eps) in eps_list.iter().enumerate() {
        let grid = EnsembleGrid::new(h, eps, t);
        let alpha = eps.powf(-0.5);
        let k = grid.index_of(t);
        let areas = fou_ensemble(&grid, n_paths, substream(seed, i as u64), |y| {
            let xi = functional_values(gi, &y.values[..=k], y.dt, alpha);
            let xj = if gi == gj { xi.clone() } else { functional_values(gj, &y.values[..=k], y.dt, alpha) };
            Ok(iterated_integral(&xi, &xj))
        })?;
        let (m, se) = (mean(&areas), mean_se(&areas));
        rep.push("area_mean", eps, m, se);
        rep.push("target", eps, t * a, 0.0);
        if gi == gj {
            // 1-d: XX_{0,t} = X_t^2 / 2
            rep.push("area_mean_exact", eps, 0.5 * finite_eps_variance(gi, h, eps, t, alpha)?, 0.0);
        }
        // share of the largest path in the ensemble sum; large values mean
        // the mean is carried by rare excursions
        let total: f64 = areas.iter().sum();
        let top = areas.iter().fold(0.0f64, |acc, v| acc.max(*v));
        rep.push("max_path_share", eps, if total > 0.0 { top / total } else { f64::NAN }, 0.0);
        all_ok &= (m - t * a).abs() <= 4.0 * se;
        last = (m, se);
    }
    let near = |target: f64| (last.0 - target).abs() <= 4.0 * last.1;
    let convention = match (near(t * a), near(t * a_alt)) {
        (true, false) => "q! series weight matches the Monte Carlo mean; (q!)^2 does not",
        (false, true) => "(q!)^2 series weight matches the Monte Carlo mean; q! does not",
        (true, true) => "both series weights within 4 s.e. (not resolved by this ensemble)",
        (false, false) => "neither series weight within 4 s.e. at the smallest eps",
    };
    rep.note(convention);
    if last.0 > 0.0 && a > 0.0 && a_alt > 0.0 {
        let closer = if (last.0 / (t * a)).ln().abs() <= (last.0 / (t * a_alt)).ln().abs() { "q!" } else { "(q!)^2" };
        rep.note(format!("closer series weight in log ratio at the smallest eps: {closer} (mean / t A = {:.3})", last.0 / (t * a)));
    }
    rep.pass = all_ok;
    rep.rule = "every eps: |mean(XX_{0,t}) - t A| <= 4 se, A with q! weights".into();
    rep.runtime_s = elapsed(start);
    Ok(rep)
}

/// Correlation of `X^{W,ε}_t` and `X^{Z,ε}_t` built from the same fOU
/// paths, and of their centred squares.
///
/// Pass rule: both correlations within `4/√n` of 0 (or of 1 when the two
/// observables coincide).
pub fn independence_test(
    gw: &ChaosExpansion,
    gz: &ChaosExpansion,
    h: f64,
    eps: f64,
    t: f64,
    n_paths: usize,
    seed: u64,
) -> Result<ExperimentReport> {
    let start = Instant::now();
    check_eps_list(&[eps])?;
    let cw = LimitComponent::new(gw.clone(), h)?;
    let cz = LimitComponent::new(gz.clone(), h)?;
    let grid = EnsembleGrid::new(h, eps, t);
    let (aw, az) = (cw.alpha(eps, h)?, cz.alpha(eps, h)?);
    let k = grid.index_of(t);
    let pairs = fou_ensemble(&grid, n_paths, seed, |y| {
        let w = functional_values(gw, &y.values[..=k], y.dt, aw)[k];
        let z = functional_values(gz, &y.values[..=k], y.dt, az)[k];
        Ok((w, z))
    })?;
    let (w, z): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let sq = |v: &[f64]| {
        let m = mean(v);
        v.iter().map(|x| (x - m) * (x - m)).collect::<Vec<f64>>()
    };
    let corr = pearson(&w, &z);
    let corr_sq = pearson(&sq(&w), &sq(&z));
    let band = 4.0 / (n_paths as f64).sqrt();
    let same = gw == gz;
    let target = if same { 1.0 } else { 0.0 };
    let mut rep = ExperimentReport::new("independence")
        .param("h", h)
        .param("eps", eps)
        .param("t", t)
        .param("observable_w", &gw.source)
        .param("observable_z", &gz.source)
        .param("regime_w", cw.regime)
        .param("regime_z", cz.regime)
        .param("n_paths", n_paths)
        .param("seed", seed);
    rep.eps_grid = vec![eps];
    rep.push("corr", eps, corr, band);
    rep.push("corr_squares", eps, corr_sq, band);
    if !same && (cw.regime != Regime::Wiener || cz.regime != Regime::Hermite) {
        rep.note(format!("expected one Wiener and one Hermite component, got {} and {}", cw.regime, cz.regime));
    }
    rep.pass = (corr - target).abs() <= band && (corr_sq - target).abs() <= band;
    rep.rule = "|corr - target| <= 4/sqrt(n) and |corr of centred squares - target| <= 4/sqrt(n)".into();
    rep.runtime_s = elapsed(start);
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regime_preconditions() {
        let g2 = ChaosExpansion::hermite(2);
        assert!(matches!(clt_marginal_test(&g2, 0.9, &[0.1], 1.0, 100, 1, None), Err(Error::Contract(_))));
        assert!(matches!(hermite_limit_test(&g2, 0.7, &[0.1], 1.0, 100, 1), Err(Error::Contract(_))));
        assert!(matches!(
            area_drift_estimate(&g2, &g2, 0.7, &[0.1], 1.0, 100, 1),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn identical_components_are_fully_correlated() {
        let g = ChaosExpansion::hermite(1);
        let r = independence_test(&g, &g, 0.7, 0.1, 1.0, 200, 3).unwrap();
        assert!((r.stat("corr").unwrap() - 1.0).abs() < 1e-12);
        assert!(r.pass);
    }

    #[test]
    fn classical_ou_clt_small() {
        let r = clt_marginal_test(&ChaosExpansion::hermite(1), 0.5, &[0.05, 0.01], 1.0, 400, 11, None).unwrap();
        assert!(r.pass, "{:?}", r.points);
    }
}
