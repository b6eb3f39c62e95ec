//! Scaled functionals `X^{k,ε} = α_k(ε) ∫_0^t G_k(y^ε_s) ds` of fOU paths,
//! their lifts, the limit constants `c²` and `A`, and Monte Carlo checks of
//! the single-scale and joint limit theorems.

mod experiments;
mod functional;
mod toy;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::chaos::{classify_limit, scaling_alpha, ChaosExpansion, Regime};
use crate::ensemble::par_paths;
use crate::error::{ensure, Error, Result};
use crate::gaussian_paths::{
    correlation_integral_signed, fou_tail_constant, integral_rho_power, integral_rho_power_to, FouConfig,
    FouSampler,
};
use crate::hermite_process::{calibrate_k, HermiteSpec};
use crate::stats::{mean, mean_se};

pub use experiments::{
    area_drift_estimate, clt_marginal_test, fou_ensemble, hermite_limit_test, independence_test, EnsembleGrid,
};
pub use functional::{functional_lift, functional_values, iterated_integral, lift_functional, path_functional};
pub use toy::{rate_lags, toy_identity, toy_rate_test, ToyIdentity};

fn factorial(k: usize) -> f64 {
    (1..=k).map(|j| j as f64).product()
}

/// Weight of the `q`-th chaos level in the series for `A`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesWeight {
    /// `q!`, which equals `∫_0^∞ E[G_i(y_s) G_j(y_0)] ds`.
    Factorial,
    /// `(q!)²`.
    FactorialSquared,
}

impl SeriesWeight {
    pub fn weight(self, q: usize) -> f64 {
        match self {
            SeriesWeight::Factorial => factorial(q),
            SeriesWeight::FactorialSquared => factorial(q).powi(2),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SeriesWeight::Factorial => "q!",
            SeriesWeight::FactorialSquared => "(q!)^2",
        }
    }
}

/// `Σ_q c_{i,q} c_{j,q} w(q) ∫_0^T ρ^q` over shared chaos levels; `T = ∞`
/// when `horizon` is `None`.
pub fn a_series(gi: &ChaosExpansion, gj: &ChaosExpansion, h: f64, weight: SeriesWeight, horizon: Option<f64>) -> Result<f64> {
    let top = gi.k_max.min(gj.k_max);
    let mut total = 0.0;
    for q in 1..=top {
        let c = gi.coeff(q) * gj.coeff(q);
        if c == 0.0 {
            continue;
        }
        let integral = match horizon {
            Some(t) => integral_rho_power_to(h, q as u32, t)?,
            None => integral_rho_power(h, q as u32)?,
        };
        total += c * weight.weight(q) * integral;
    }
    Ok(total)
}

/// Limit constant of `X^ε_t → c·(limit process)_t`: the variance of the
/// limit at `t = 1`.
///
/// * Wiener regime: `2 Σ_k c_k² k! ∫_0^∞ ρ^k`.
/// * Boundary `H*(m) = 1/2`: `2 m! c_m² C^m`, `C` the tail constant of `ρ`.
/// * Hermite regime: `c_m² m! C^m / (H*(2H* − 1))`.
pub fn c_squared(g: &ChaosExpansion, h: f64) -> Result<f64> {
    if g.is_zero() {
        return Ok(0.0);
    }
    let m = g.rank;
    let ex = classify_limit(h, m)?;
    let cm = g.leading();
    Ok(match ex.regime {
        Regime::Wiener => 2.0 * a_series(g, g, h, SeriesWeight::Factorial, None)?,
        Regime::Boundary => 2.0 * factorial(m) * cm * cm * fou_tail_constant(h)?.powi(m as i32),
        Regime::Hermite => {
            let hs = ex.hstar;
            cm * cm * factorial(m) * fou_tail_constant(h)?.powi(m as i32) / (hs * (2.0 * hs - 1.0))
        }
    })
}

/// The printed branches without the tail constant of `ρ`:
/// `(c_m m!/K)²` with `K` the unit-variance normalizer of `Z^{H*,m}`
/// (calibrated on a grid of step `u_dt`), `2 m! c_m²` on the boundary, and
/// the Wiener series as in [`c_squared`]. Kept for comparison in reports.
pub fn c_squared_literal(g: &ChaosExpansion, h: f64, u_dt: f64) -> Result<f64> {
    if g.is_zero() {
        return Ok(0.0);
    }
    let m = g.rank;
    let ex = classify_limit(h, m)?;
    let cm = g.leading();
    Ok(match ex.regime {
        Regime::Wiener => c_squared(g, h)?,
        Regime::Boundary => 2.0 * factorial(m) * cm * cm,
        Regime::Hermite => {
            let k = calibrate_k(&HermiteSpec::new(m, ex.hstar, u_dt)?)?;
            (cm * factorial(m) / k).powi(2)
        }
    })
}

/// `Var(α ∫_0^t G(y^ε_s) ds)` at finite `ε`, from the double integrals of
/// `ρ^k`.
pub fn finite_eps_variance(g: &ChaosExpansion, h: f64, eps: f64, t: f64, alpha: f64) -> Result<f64> {
    let mut total = 0.0;
    for k in 1..=g.k_max {
        let c = g.coeff(k);
        if c == 0.0 {
            continue;
        }
        total += c * c * factorial(k) * correlation_integral_signed(h, k as u32, t, eps)?;
    }
    Ok(alpha * alpha * eps * eps * total)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitComponent {
    pub g: ChaosExpansion,
    pub rank: usize,
    pub hstar: f64,
    pub regime: Regime,
    pub c: f64,
    /// Self-similarity exponent of the limit: `H*` for Hermite limits,
    /// `1/2` otherwise.
    pub hurst_out: f64,
}

impl LimitComponent {
    pub fn new(g: ChaosExpansion, h: f64) -> Result<Self> {
        if g.is_zero() {
            return Ok(Self { g, rank: 0, hstar: f64::NAN, regime: Regime::Wiener, c: 0.0, hurst_out: 0.5 });
        }
        let ex = classify_limit(h, g.rank)?;
        let c = c_squared(&g, h)?.max(0.0).sqrt();
        let hurst_out = if ex.regime == Regime::Hermite { ex.hstar } else { 0.5 };
        Ok(Self { rank: g.rank, hstar: ex.hstar, regime: ex.regime, c, hurst_out, g })
    }

    pub fn alpha(&self, eps: f64, h: f64) -> Result<f64> {
        if self.rank == 0 {
            return Ok(eps.powf(-0.5));
        }
        scaling_alpha(eps, h, self.rank)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitSpec {
    pub h: f64,
    pub components: Vec<LimitComponent>,
}

impl LimitSpec {
    pub fn new(gs: &[ChaosExpansion], h: f64) -> Result<Self> {
        let components = gs.iter().map(|g| LimitComponent::new(g.clone(), h)).collect::<Result<_>>()?;
        Ok(Self { h, components })
    }

    pub fn indices(&self, regime: Regime) -> Vec<usize> {
        self.components.iter().enumerate().filter(|(_, c)| c.regime == regime).map(|(i, _)| i).collect()
    }
}

/// Monte Carlo oracle settings for `A`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    pub paths: usize,
    /// Truncation `T` of `∫_0^T E[G_i(y_s) G_j(y_0)] ds`.
    pub horizon: f64,
    pub dt: f64,
    pub seed: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self { paths: 400, horizon: 50.0, dt: 0.02, seed: 0x0A }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AMatrix {
    pub n: usize,
    /// Row-major `n×n`, `q!` weights.
    pub values: Vec<f64>,
    /// Same with `(q!)²` weights.
    pub values_alt: Vec<f64>,
    /// Oracle estimates of the truncated integrals; empty without oracle.
    pub mc: Vec<f64>,
    /// Oracle half-widths (one standard error).
    pub mc_ci: Vec<f64>,
    /// Series truncated at the oracle horizon, `q!` and `(q!)²` weights.
    pub truncated: Vec<f64>,
    pub truncated_alt: Vec<f64>,
    /// Convention consistent with the oracle, if it ran.
    pub convention: Option<SeriesWeight>,
}

impl AMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }
}

/// Per-path estimates of `∫_0^T E[G_i(y_s) G_j(y_0)] ds` for all pairs,
/// averaged over time origins in `[0, T]` and symmetrized.
pub fn a_oracle(gs: &[ChaosExpansion], h: f64, cfg: &OracleConfig) -> Result<(Vec<f64>, Vec<f64>)> {
    ensure(cfg.paths >= 2, || "oracle needs at least two paths".into())?;
    ensure(cfg.horizon > 0.0 && cfg.dt > 0.0, || "oracle horizon and dt must be positive".into())?;
    let n = gs.len();
    let lag = (cfg.horizon / cfg.dt).round() as usize;
    let sampler = FouSampler::new(FouConfig::new(h, 1.0)?, 2.0 * lag as f64 * cfg.dt, cfg.dt)?;
    let per_path = par_paths(cfg.paths, cfg.seed, |_, s| {
        let y = sampler.sample(s)?;
        let g: Vec<Vec<f64>> = gs.iter().map(|g| y.values.iter().map(|&v| g.eval(v)).collect()).collect();
        // prefix trapezoid sums
        let prefix: Vec<Vec<f64>> = g
            .iter()
            .map(|gv| {
                let mut p = Vec::with_capacity(gv.len());
                let mut acc = 0.0;
                p.push(0.0);
                for w in gv.windows(2) {
                    acc += 0.5 * cfg.dt * (w[0] + w[1]);
                    p.push(acc);
                }
                p
            })
            .collect();
        let mut est = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for o in 0..=lag {
                    acc += g[j][o] * (prefix[i][o + lag] - prefix[i][o]);
                }
                est[i * n + j] = acc / (lag + 1) as f64;
            }
        }
        let sym: Vec<f64> = (0..n * n).map(|k| 0.5 * (est[k] + est[(k % n) * n + k / n])).collect();
        Ok(sym)
    })?;
    let mut mc = vec![0.0; n * n];
    let mut se = vec![0.0; n * n];
    for k in 0..n * n {
        let col: Vec<f64> = per_path.iter().map(|v| v[k]).collect();
        mc[k] = mean(&col);
        se[k] = mean_se(&col);
    }
    Ok((mc, se))
}

/// `A^{i,j} = ∫_0^∞ E[G_i(y_s) G_j(y_0)] ds` for Wiener-regime components.
/// With an oracle, the truncated series must agree with the Monte Carlo
/// estimate within 5 standard errors under at least one weight
/// convention; the matching one is recorded.
pub fn a_matrix(gs: &[ChaosExpansion], h: f64, oracle: Option<&OracleConfig>) -> Result<AMatrix> {
    let n = gs.len();
    ensure(n >= 1, || "need at least one component".into())?;
    for (i, g) in gs.iter().enumerate() {
        if !g.is_zero() && classify_limit(h, g.rank)?.regime != Regime::Wiener {
            return Err(Error::Contract(format!("component {i} (rank {}) is not in the Wiener regime at H = {h}", g.rank)));
        }
    }
    let build = |w: SeriesWeight, horizon: Option<f64>| -> Result<Vec<f64>> {
        let mut v = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let a = a_series(&gs[i], &gs[j], h, w, horizon)?;
                v[i * n + j] = a;
                v[j * n + i] = a;
            }
        }
        Ok(v)
    };
    let values = build(SeriesWeight::Factorial, None)?;
    let values_alt = build(SeriesWeight::FactorialSquared, None)?;
    let eig = SymmetricEigen::new(DMatrix::from_row_slice(n, n, &values)).eigenvalues;
    let scale = values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    if eig.iter().any(|&e| e < -1e-8 * scale) {
        return Err(Error::Consistency(format!("A is not positive semidefinite: eigenvalues {:?}", eig.as_slice())));
    }
    let mut out = AMatrix {
        n,
        values,
        values_alt,
        mc: Vec::new(),
        mc_ci: Vec::new(),
        truncated: Vec::new(),
        truncated_alt: Vec::new(),
        convention: None,
    };
    if let Some(cfg) = oracle {
        let (mc, se) = a_oracle(gs, h, cfg)?;
        let truncated = build(SeriesWeight::Factorial, Some(cfg.horizon))?;
        let truncated_alt = build(SeriesWeight::FactorialSquared, Some(cfg.horizon))?;
        let agrees = |series: &[f64]| series.iter().zip(&mc).zip(&se).all(|((s, m), e)| (s - m).abs() <= 5.0 * e + 1e-12);
        out.convention = if agrees(&truncated) {
            Some(SeriesWeight::Factorial)
        } else if agrees(&truncated_alt) {
            Some(SeriesWeight::FactorialSquared)
        } else {
            None
        };
        out.mc = mc;
        out.mc_ci = se;
        out.truncated = truncated;
        out.truncated_alt = truncated_alt;
        match out.convention {
            Some(SeriesWeight::Factorial) => {}
            Some(SeriesWeight::FactorialSquared) => {
                return Err(Error::Consistency(
                    "Monte Carlo oracle matches the (q!)^2 series weight, not q!; A as defined disagrees".into(),
                ))
            }
            None => {
                return Err(Error::Consistency(format!(
                    "Monte Carlo oracle {:?} ± {:?} matches neither series weight ({:?} with q!)",
                    out.mc, out.mc_ci, out.truncated
                )))
            }
        }
    }
    Ok(out)
}

/// Monte Carlo cross-check of a Wiener-regime `c²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CSquaredCheck {
    /// `c²` from the quadrature series.
    pub series: f64,
    /// `2 (MC estimate of ∫_0^T E[G(y_s)G(y_0)] ds + series tail beyond T)`.
    pub mc: f64,
    pub mc_se: f64,
    /// The series tail beyond the oracle horizon, included in `mc`.
    pub tail: f64,
}

impl CSquaredCheck {
    pub fn rel_gap(&self) -> f64 {
        (self.mc / self.series - 1.0).abs()
    }
}

/// `c²` of a Wiener-regime observable against the Monte Carlo oracle. The
/// oracle covers `[0, T]`; the slowly decaying remainder comes from the
/// series.
pub fn c_squared_oracle(g: &ChaosExpansion, h: f64, cfg: &OracleConfig) -> Result<CSquaredCheck> {
    ensure(!g.is_zero(), || "observable is zero".into())?;
    if classify_limit(h, g.rank)?.regime != Regime::Wiener {
        return Err(Error::Contract(format!("rank {} at H = {h} is not in the Wiener regime", g.rank)));
    }
    let series = c_squared(g, h)?;
    let full = a_series(g, g, h, SeriesWeight::Factorial, None)?;
    let tail = full - a_series(g, g, h, SeriesWeight::Factorial, Some(cfg.horizon))?;
    let (mc, se) = a_oracle(std::slice::from_ref(g), h, cfg)?;
    Ok(CSquaredCheck { series, mc: 2.0 * (mc[0] + tail), mc_se: 2.0 * se[0], tail: 2.0 * tail })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian_paths::integral_rho_power;

    #[test]
    fn boundary_and_wiener_constants() {
        let g = ChaosExpansion::hermite(2);
        let c = fou_tail_constant(0.75).unwrap();
        assert!((c_squared(&g, 0.75).unwrap() - 4.0 * c * c).abs() < 1e-12);
        assert!((c_squared_literal(&g, 0.75, 0.01).unwrap() - 4.0).abs() < 1e-12);
        let want = 4.0 * integral_rho_power(0.7, 2).unwrap();
        assert!((c_squared(&g, 0.7).unwrap() - want).abs() < 1e-12 * want);
        // classical OU: ∫ e^{-qs} = 1/q
        assert!((c_squared(&ChaosExpansion::hermite(1), 0.5).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(c_squared(&ChaosExpansion::zero(), 0.7).unwrap(), 0.0);
    }

    #[test]
    fn hermite_constant_matches_finite_eps_variance_limit() {
        // H = 0.9, G = H_1: Var(ε^{H-1} ∫_0^1 y^ε) → c²
        let g = ChaosExpansion::hermite(1);
        let c2 = c_squared(&g, 0.9).unwrap();
        let eps = 1e-5;
        let v = finite_eps_variance(&g, 0.9, eps, 1.0, eps.powf(-0.1)).unwrap();
        assert!((v / c2 - 1.0).abs() < 0.01, "{v} vs {c2}");
    }

    #[test]
    fn a_matrix_structure() {
        let gs = [ChaosExpansion::hermite(2), ChaosExpansion::hermite(3)];
        let a = a_matrix(&gs, 0.7, None).unwrap();
        assert_eq!(a.get(0, 1), 0.0);
        assert!((a.get(0, 0) - 2.0 * integral_rho_power(0.7, 2).unwrap()).abs() < 1e-12);
        assert!(a_matrix(&[ChaosExpansion::hermite(1)], 0.7, None).is_err());
        let a = a_matrix(&[ChaosExpansion::hermite(1)], 0.3, None).unwrap();
        assert!(a.get(0, 0).abs() < 1e-7);
    }

    #[test]
    fn limit_spec_regimes() {
        let gs = [ChaosExpansion::hermite(2), ChaosExpansion::hermite(4), ChaosExpansion::hermite(10)];
        let spec = LimitSpec::new(&gs, 8.0 / 9.0).unwrap();
        assert_eq!(spec.indices(Regime::Hermite), vec![0, 1]);
        assert_eq!(spec.indices(Regime::Wiener), vec![2]);
        assert!((spec.components[0].hurst_out - 7.0 / 9.0).abs() < 1e-12);
        assert!((spec.components[1].hstar - 5.0 / 9.0).abs() < 1e-12);
        assert!((spec.components[2].hstar + 1.0 / 9.0).abs() < 1e-12);
    }
}
