//! The linear example `G = H_1`, `α = ε^{H-1}`: since `y^ε` solves the
//! Langevin equation, `X^ε_t = ε(v^ε_0 − v^ε_t) + σ B_t` with
//! `v^ε = ε^{H-1} y^ε`, pathwise.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::functional::functional_values;
use crate::chaos::ChaosExpansion;
use crate::ensemble::par_paths;
use crate::error::{ensure, Error, Result};
use crate::gaussian_paths::{FouConfig, FouSampler, DEFAULT_STEPS_PER_EPS};
use crate::report::ExperimentReport;
use crate::rng::substream;
use crate::stats::{loglog_slope, mean, mean_se};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyIdentity {
    /// `max_t |X^ε_t − σB_t − ε(v_0 − v_t)|`.
    pub residual: f64,
    /// `10 dt sup|y|`.
    pub tolerance: f64,
    /// `sup_{s,t} |X^ε_{s,t} − σB_{s,t}|`.
    pub sup_gap: f64,
    /// Mean over start times of `|X^ε_{s,s+ℓ} − σB_{s,s+ℓ}|²` per lag of
    /// [`rate_lags`].
    pub lag_mean_squares: Vec<f64>,
}

/// Geometric set of lags (in steps) up to `n - 1`.
pub fn rate_lags(n: usize) -> Vec<usize> {
    let mut lags = Vec::new();
    let mut l = 1.0f64;
    while (l as usize) < n {
        let k = l as usize;
        if lags.last() != Some(&k) {
            lags.push(k);
        }
        l *= 1.25;
    }
    lags
}

fn toy_path(sampler: &FouSampler, seed: u64) -> Result<ToyIdentity> {
    let (y, b) = sampler.sample_with_driver(seed)?;
    let b = b.ok_or_else(|| Error::Contract("the linear example needs the langevin driver".into()))?;
    let cfg = sampler.cfg;
    let x = functional_values(&ChaosExpansion::hermite(1), &y.values, y.dt, cfg.eps.powf(cfg.h - 1.0));
    let scale = cfg.eps.powf(cfg.h);
    let mut residual = 0.0f64;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for k in 0..x.len() {
        let gap = x[k] - cfg.sigma * b.values[k];
        lo = lo.min(gap);
        hi = hi.max(gap);
        residual = residual.max((gap - scale * (y.values[0] - y.values[k])).abs());
    }
    let sup_y = y.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let gap: Vec<f64> = x.iter().zip(&b.values).map(|(x, b)| x - cfg.sigma * b).collect();
    let lag_mean_squares = rate_lags(gap.len())
        .into_iter()
        .map(|l| gap.windows(l + 1).map(|w| (w[l] - w[0]) * (w[l] - w[0])).sum::<f64>() / (gap.len() - l) as f64)
        .collect();
    Ok(ToyIdentity { residual, tolerance: 10.0 * y.dt * sup_y, sup_gap: hi - lo, lag_mean_squares })
}

/// Identity residual on one path of length `t1`.
pub fn toy_identity(h: f64, eps: f64, t1: f64, seed: u64) -> Result<ToyIdentity> {
    let sampler = FouSampler::new(FouConfig::new(h, eps)?, t1, eps / DEFAULT_STEPS_PER_EPS as f64)?;
    toy_path(&sampler, seed)
}

/// Rate of `X^ε − σB → 0` over an `ε` list: `sup_{s,t} ‖X^ε_{s,t} − σB_{s,t}‖_{L²}`
/// (supremum over lags of the root-mean-square gap, stationarity used to
/// average over start times) and its log-log slope in `ε`. The
/// pathwise `‖sup_{s,t}|X^ε_{s,t} − σB_{s,t}|‖_{L²}` is reported alongside;
/// it carries an extra `√log(1/ε)` from the supremum of a stationary path.
///
/// Pass rule: slope within 0.15 of `H` and the identity residual within
/// tolerance on every path.
pub fn toy_rate_test(h: f64, eps_list: &[f64], t1: f64, n_paths: usize, seed: u64) -> Result<ExperimentReport> {
    let start = Instant::now();
    ensure(eps_list.len() >= 3, || "rate fit needs at least three eps values".into())?;
    ensure(n_paths >= 2, || "need at least two paths".into())?;
    let mut rep = ExperimentReport::new("toy_rate")
        .param("h", h)
        .param("t1", t1)
        .param("n_paths", n_paths)
        .param("seed", seed);
    rep.eps_grid = eps_list.to_vec();
    let mut norms = Vec::new();
    let mut pathwise = Vec::new();
    let mut identity_ok = true;
    for (i, &eps) in eps_list.iter().enumerate() {
        let sampler = FouSampler::new(FouConfig::new(h, eps)?, t1, eps / DEFAULT_STEPS_PER_EPS as f64)?;
        let rows = par_paths(n_paths, substream(seed, i as u64), |_, s| toy_path(&sampler, s))?;
        let lags = rows[0].lag_mean_squares.len();
        let (mut best, mut best_se) = (0.0f64, 0.0);
        for l in 0..lags {
            let col: Vec<f64> = rows.iter().map(|r| r.lag_mean_squares[l]).collect();
            let m = mean(&col);
            if m > best {
                best = m;
                best_se = mean_se(&col);
            }
        }
        let l2 = best.sqrt();
        // delta method: se(√m) = se(m) / (2√m)
        rep.push("sup_l2_gap", eps, l2, best_se / (2.0 * l2));
        let sq: Vec<f64> = rows.iter().map(|r| r.sup_gap * r.sup_gap).collect();
        let m2 = mean(&sq);
        rep.push("l2_pathwise_sup_gap", eps, m2.sqrt(), mean_se(&sq) / (2.0 * m2.sqrt()));
        let worst = rows.iter().map(|r| r.residual / r.tolerance).fold(0.0f64, f64::max);
        rep.push("identity_residual_over_tolerance", eps, worst, 0.0);
        identity_ok &= worst <= 1.0;
        norms.push(l2);
        pathwise.push(m2.sqrt());
    }
    let fit = loglog_slope(eps_list, &norms)?;
    rep.fitted = Some(fit.into());
    rep.push("slope", h, fit.slope, fit.slope_se);
    let side = loglog_slope(eps_list, &pathwise)?;
    rep.push("slope_pathwise_sup", h, side.slope, side.slope_se);
    rep.pass = identity_ok && (fit.slope - h).abs() <= 0.15;
    rep.rule = "|slope of sup_{s,t} ||X_{s,t} - sigma B_{s,t}||_L2 in eps - H| <= 0.15 and identity residual <= 10 dt sup|y| on every path".into();
    rep.runtime_s = start.elapsed().as_secs_f64();
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_holds_pathwise() {
        for (h, eps) in [(0.4, 0.1), (0.75, 0.05)] {
            let r = toy_identity(h, eps, 1.0, 5).unwrap();
            assert!(r.residual <= r.tolerance, "{r:?}");
            assert!(r.sup_gap > 0.0);
        }
    }
}
