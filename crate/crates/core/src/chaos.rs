//! Hermite polynomial algebra and chaos expansions of observables.
//!
//! Polynomials are the probabilists' ones: leading coefficient 1 and
//! `‖H_m‖²_{L²(μ)} = m!` for the standard Gaussian `μ`, generated by
//! `H_{k+1}(x) = x H_k(x) - k H_{k-1}(x)`.

use crate::error::{ensure, Error, Result};
use crate::quadrature::gauss_hermite;
use serde::{Deserialize, Serialize};

/// Relative threshold (against the L² norm) below which a chaos
/// coefficient is treated as zero when detecting the Hermite rank.
pub const TOL_RANK: f64 = 1e-10;

/// Default Gauss–Hermite order for [`chaos_coefficients`].
pub const DEFAULT_QUAD_ORDER: usize = 200;

/// Highest degree for which [`hermite_eval`] returns unscaled values.
pub const MAX_UNSCALED_DEGREE: i32 = 60;

/// `H_m(x)` by the three-term recurrence.
pub fn hermite_eval(m: i32, x: f64) -> Result<f64> {
    if m < 0 {
        return Err(Error::Argument(format!("Hermite degree must be non-negative, got {m}")));
    }
    if m > MAX_UNSCALED_DEGREE {
        return Err(Error::Range(format!(
            "degree {m} exceeds {MAX_UNSCALED_DEGREE}; use hermite_weighted for scaled evaluation"
        )));
    }
    let v = hermite_unchecked(m as usize, x);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Range(format!(
            "H_{m}({x}) overflows f64 (log10|H| ≈ {:.1}); use hermite_weighted",
            log_abs_hermite(m as usize, x) / std::f64::consts::LN_10
        )))
    }
}

#[inline]
pub(crate) fn hermite_unchecked(m: usize, x: f64) -> f64 {
    match m {
        0 => 1.0,
        1 => x,
        _ => {
            let mut prev = 1.0;
            let mut cur = x;
            for k in 1..m {
                let next = x * cur - k as f64 * prev;
                prev = cur;
                cur = next;
            }
            cur
        }
    }
}

/// Orthonormal values `H_k(x)/√(k!)` for `k = 0..=k_max`, written into `out`.
pub(crate) fn hermite_orthonormal_into(x: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = 1.0;
    if out.len() > 1 {
        out[1] = x;
    }
    for k in 1..out.len().saturating_sub(1) {
        out[k + 1] = (x * out[k] - (k as f64).sqrt() * out[k - 1]) / ((k + 1) as f64).sqrt();
    }
}

/// `ln |H_m(x)|` via the log-scaled recurrence (never overflows).
fn log_abs_hermite(m: usize, x: f64) -> f64 {
    let (v, log_scale) = scaled_recurrence(m, x, false);
    v.abs().ln() + log_scale
}

/// Runs the recurrence for `H_k/√(k!)` (if `normalized`) or `H_k`, rescaling
/// whenever magnitudes leave [1e-150, 1e150]. Returns `(mantissa, log_scale)`.
fn scaled_recurrence(m: usize, x: f64, normalized: bool) -> (f64, f64) {
    let mut log_scale = 0.0;
    let mut prev = 1.0;
    if m == 0 {
        return (prev, log_scale);
    }
    let mut cur = x;
    for k in 1..m {
        let next = if normalized {
            (x * cur - (k as f64).sqrt() * prev) / ((k + 1) as f64).sqrt()
        } else {
            x * cur - k as f64 * prev
        };
        prev = cur;
        cur = next;
        let a = cur.abs();
        if a > 1e150 || (a < 1e-150 && a > 0.0) {
            let s = a.ln();
            prev /= a;
            cur /= a;
            log_scale += s;
        }
    }
    (cur, log_scale)
}

/// `e^{-x²/4} H_m(x) / √(m!)`, evaluated without overflow for any `m`, `x`.
pub fn hermite_weighted(m: usize, x: f64) -> f64 {
    let (v, log_scale) = scaled_recurrence(m, x, true);
    let log_total = log_scale - 0.25 * x * x;
    v * log_total.exp()
}

/// `|e^{-x²/2} H_m(x)| ≤ 1.0865 √(m!)` checked on the supplied grid.
pub fn hermite_sup_bound_check(m: usize, grid: &[f64]) -> Result<bool> {
    let lo = grid.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = grid.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    ensure(lo <= -20.0 && hi >= 20.0, || format!("grid [{lo}, {hi}] must cover [-20, 20]"))?;
    // e^{-x²/2}H_m/√m! = hermite_weighted · e^{-x²/4}
    let sup = grid
        .iter()
        .map(|&x| (hermite_weighted(m, x) * (-0.25 * x * x).exp()).abs())
        .fold(0.0, f64::max);
    Ok(sup <= 1.0865 + 1e-9)
}

fn factorial(k: usize) -> f64 {
    (1..=k).fold(1.0, |acc, j| acc * j as f64)
}

fn sqrt_factorial(k: usize) -> f64 {
    (1..=k).fold(1.0, |acc, j| acc * (j as f64).sqrt())
}

/// Truncated Hermite expansion `G = Σ_{k=1}^{K} c_k H_k` of a centred observable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChaosExpansion {
    pub coeffs: Vec<f64>,
    pub rank: usize,
    pub l2_norm: f64,
    #[serde(default)]
    pub k_max: usize,
    #[serde(default)]
    pub source: String,
}

impl ChaosExpansion {
    /// Builds an expansion from explicit coefficients `c_0..c_K`.
    pub fn from_coeffs(coeffs: Vec<f64>, source: impl Into<String>) -> Result<Self> {
        ensure(!coeffs.is_empty(), || "coefficient list is empty".into())?;
        ensure(coeffs.iter().all(|c| c.is_finite()), || "coefficients must be finite".into())?;
        let l2_norm = coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, c)| c * c * factorial(k))
            .sum::<f64>()
            .sqrt();
        let tol = TOL_RANK * l2_norm;
        if coeffs[0].abs() > tol || (l2_norm == 0.0 && coeffs[0] != 0.0) {
            return Err(Error::NotCentred { c0: coeffs[0], tol });
        }
        let rank = coeffs
            .iter()
            .enumerate()
            .skip(1)
            .find(|(k, c)| c.abs() * sqrt_factorial(*k) >= tol && **c != 0.0)
            .map(|(k, _)| k)
            .unwrap_or(0);
        let mut coeffs = coeffs;
        coeffs[0] = 0.0;
        for c in coeffs.iter_mut().take(rank.max(1)).skip(1) {
            *c = 0.0;
        }
        let k_max = coeffs.len() - 1;
        Ok(Self { coeffs, rank, l2_norm, k_max, source: source.into() })
    }

    /// `G = H_m`.
    pub fn hermite(m: usize) -> Self {
        assert!(m >= 1, "a centred Hermite observable has degree >= 1");
        let mut coeffs = vec![0.0; m + 1];
        coeffs[m] = 1.0;
        Self {
            coeffs,
            rank: m,
            l2_norm: sqrt_factorial(m),
            k_max: m,
            source: format!("H_{m}"),
        }
    }

    /// The zero observable. Its `rank` is 0, which no other expansion has.
    pub fn zero() -> Self {
        Self { coeffs: vec![0.0, 0.0], rank: 0, l2_norm: 0.0, k_max: 1, source: "0".into() }
    }

    pub fn is_zero(&self) -> bool {
        self.rank == 0
    }

    /// Coefficient `c_k` (zero beyond the stored range).
    pub fn coeff(&self, k: usize) -> f64 {
        self.coeffs.get(k).copied().unwrap_or(0.0)
    }

    /// Leading coefficient `c_m` at the Hermite rank.
    pub fn leading(&self) -> f64 {
        self.coeff(self.rank)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.coeffs.iter_mut().for_each(|c| *c *= factor);
        out.l2_norm *= factor.abs();
        if factor == 0.0 {
            return Self::zero();
        }
        out.source = format!("{factor}*({})", self.source);
        out
    }

    /// `G(x) = Σ c_k H_k(x)`.
    pub fn eval(&self, x: f64) -> f64 {
        if self.rank == 0 {
            return 0.0;
        }
        let mut prev = 1.0;
        let mut cur = x;
        let mut acc = self.coeffs.get(1).copied().unwrap_or(0.0) * x;
        for k in 1..self.k_max {
            let next = x * cur - k as f64 * prev;
            prev = cur;
            cur = next;
            acc += self.coeffs[k + 1] * cur;
        }
        acc
    }

    /// `E[G(ξ) G'(η)]` for jointly Gaussian standard `(ξ, η)` with correlation `r`:
    /// `Σ_k c_k c'_k k! r^k`.
    pub fn cross_moment(&self, other: &Self, r: f64) -> f64 {
        let kmax = self.k_max.min(other.k_max);
        let mut acc = 0.0;
        let mut fact = 1.0;
        let mut rk = 1.0;
        for k in 1..=kmax {
            fact *= k as f64;
            rk *= r;
            acc += self.coeff(k) * other.coeff(k) * fact * rk;
        }
        acc
    }
}

/// Chaos coefficients `c_k = ⟨G, H_k⟩/k!` by Gauss–Hermite quadrature,
/// doubling the order until the normalized coefficients `c_k √(k!)` move
/// by less than 1e-8.
pub fn chaos_coefficients(
    g: impl Fn(f64) -> f64,
    k_max: usize,
    quad_order: usize,
    source: impl Into<String>,
) -> Result<ChaosExpansion> {
    ensure(k_max >= 1, || "k_max must be at least 1".into())?;
    ensure(quad_order >= k_max + 10, || format!("quad_order {quad_order} must be >= k_max + 10"))?;
    let project = |order: usize| -> Vec<f64> {
        let (x, w) = gauss_hermite(order);
        let mut h = vec![0.0; k_max + 1];
        let mut acc = vec![0.0; k_max + 1];
        for (xi, wi) in x.iter().zip(&w) {
            if *wi == 0.0 {
                continue;
            }
            let gi = g(*xi);
            hermite_orthonormal_into(*xi, &mut h);
            for k in 0..=k_max {
                acc[k] += wi * gi * h[k];
            }
        }
        acc
    };
    let mut order = quad_order;
    let mut cur = project(order);
    let mut converged = false;
    for _ in 0..3 {
        let next = project(2 * order);
        let scale = next.iter().skip(1).map(|v| v * v).sum::<f64>().sqrt().max(1.0);
        let change = cur.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        cur = next;
        order *= 2;
        if change <= 1e-8 * scale {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Accuracy(format!(
            "chaos coefficients still moving at Gauss–Hermite order {order}"
        )));
    }
    // normalized projections → c_k
    let coeffs: Vec<f64> = cur.iter().enumerate().map(|(k, v)| v / sqrt_factorial(k)).collect();
    let mut out = ChaosExpansion::from_coeffs(coeffs, source)?;
    // Quadrature noise in coefficients above the rank is kept; below-rank noise is zeroed.
    let tol = TOL_RANK * out.l2_norm;
    for k in 1..out.coeffs.len() {
        if out.coeffs[k].abs() * sqrt_factorial(k) < tol {
            out.coeffs[k] = 0.0;
        }
    }
    Ok(out)
}

/// `H*(m) = m(H - 1) + 1`.
pub fn hstar(h: f64, m: usize) -> Result<f64> {
    ensure(h > 0.0 && h < 1.0, || format!("H = {h} outside (0, 1)"))?;
    ensure(m >= 1, || "rank must be >= 1".into())?;
    Ok(m as f64 * (h - 1.0) + 1.0)
}

/// Tolerance used to detect `H*(m) = 1/2`.
pub const BOUNDARY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Wiener,
    Boundary,
    Hermite,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Regime::Wiener => "wiener",
            Regime::Boundary => "boundary",
            Regime::Hermite => "hermite",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingExponents {
    pub h: f64,
    pub m: usize,
    pub hstar: f64,
    pub regime: Regime,
    /// Rank lies in the closed band where `0 ≤ H*(m) ≤ 1/2`.
    pub excluded_band: bool,
    /// Band endpoints as written, `1/(1-H)` and `1/(2(1-H))`.
    pub band: (f64, f64),
    /// `H*(m) < 0` or `H*(m) > 1/2`: the ranks the multiscale theorem accepts.
    pub strict: bool,
}

fn regime_of(h: f64, hs: f64) -> Regime {
    if (h - 0.5).abs() < BOUNDARY_TOL {
        Regime::Wiener
    } else if (hs - 0.5).abs() <= BOUNDARY_TOL {
        Regime::Boundary
    } else if hs < 0.5 {
        Regime::Wiener
    } else {
        Regime::Hermite
    }
}

/// Classifies the scaling limit of `∫ G(y^ε)` for a rank-`m` observable.
pub fn classify_limit(h: f64, m: usize) -> Result<ScalingExponents> {
    let hs = hstar(h, m)?;
    let regime = regime_of(h, hs);
    let lo = 1.0 / (1.0 - h);
    let hi = 1.0 / (2.0 * (1.0 - h));
    let (a, b) = (lo.min(hi), lo.max(hi));
    let mf = m as f64;
    let excluded_band = mf >= a - 1e-12 && mf <= b + 1e-12;
    let strict = (h - 0.5).abs() < BOUNDARY_TOL || hs < 0.0 || hs > 0.5 + BOUNDARY_TOL;
    Ok(ScalingExponents { h, m, hstar: hs, regime, excluded_band, band: (lo, hi), strict })
}

/// Scaling constant `α(ε, H*(m))`.
pub fn scaling_alpha(eps: f64, h: f64, m: usize) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::Argument(format!("eps must be positive, got {eps}")));
    }
    ensure(eps <= 0.5, || format!("eps = {eps} outside (0, 1/2]"))?;
    let ex = classify_limit(h, m)?;
    Ok(match ex.regime {
        Regime::Wiener => eps.powf(-0.5),
        Regime::Boundary => (eps * eps.ln().abs()).powf(-0.5),
        Regime::Hermite => eps.powf(ex.hstar - 1.0),
    })
}

/// `Σ_l |c_l| √(l!) (2q-1)^{l/2}`; `+∞` on overflow.
pub fn fast_decay_norm(exp: &ChaosExpansion, q: usize) -> Result<f64> {
    ensure(q >= 1, || "q must be >= 1".into())?;
    let base = ((2 * q - 1) as f64).sqrt();
    let mut acc = 0.0;
    let mut sf = 1.0;
    let mut pw = 1.0;
    for (l, c) in exp.coeffs.iter().enumerate() {
        if l > 0 {
            sf *= (l as f64).sqrt();
            pw *= base;
        }
        acc += c.abs() * sf * pw;
    }
    Ok(if acc.is_finite() { acc } else { f64::INFINITY })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn hermite_values() {
        assert_eq!(hermite_eval(1, 3.0).unwrap(), 3.0);
        assert_eq!(hermite_eval(2, 1.0).unwrap(), 0.0);
        // recurrence vs explicit x³ - 3x
        let x = 2.0;
        assert_eq!(hermite_eval(3, x).unwrap(), x * x * x - 3.0 * x);
        assert_eq!(hermite_eval(3, x).unwrap(), 2.0);
        assert!(matches!(hermite_eval(-1, 0.0), Err(Error::Argument(_))));
        assert!(matches!(hermite_eval(61, 0.0), Err(Error::Range(_))));
    }

    #[test]
    fn weighted_matches_direct_where_both_finite() {
        for &(m, x) in &[(5usize, 1.3f64), (12, -2.5), (30, 4.0), (40, 0.7)] {
            let direct = hermite_unchecked(m, x) * (-0.25 * x * x).exp() / sqrt_factorial(m);
            assert_relative_eq!(hermite_weighted(m, x), direct, max_relative = 1e-10);
        }
        // huge degree stays finite
        assert!(hermite_weighted(300, 25.0).is_finite());
    }

    #[test]
    fn sup_bound() {
        let grid: Vec<f64> = (0..=8000).map(|i| -20.0 + i as f64 * 0.005).collect();
        for m in 0..=12 {
            assert!(hermite_sup_bound_check(m, &grid).unwrap(), "m={m}");
        }
        // m = 1: sup |x| e^{-x²/2} = e^{-1/2}
        let sup = grid.iter().map(|x| (x * (-0.5 * x * x).exp()).abs()).fold(0.0, f64::max);
        assert!((sup - (-0.5f64).exp()).abs() < 1e-5);
        assert!(hermite_sup_bound_check(2, &[-1.0, 1.0]).is_err());
    }

    #[test]
    fn coefficients_of_polynomials() {
        let e = chaos_coefficients(|x| hermite_unchecked(2, x), 8, 50, "H_2").unwrap();
        assert_eq!(e.rank, 2);
        assert!((e.coeffs[2] - 1.0).abs() < 1e-12);
        for k in [1usize, 3, 4, 5, 6, 7, 8] {
            assert!(e.coeffs[k].abs() < 1e-12);
        }
        let e = chaos_coefficients(|x| x * x * x, 6, 40, "x^3").unwrap();
        assert_eq!(e.rank, 1);
        assert!((e.coeffs[1] - 3.0).abs() < 1e-12);
        assert!((e.coeffs[3] - 1.0).abs() < 1e-12);
        assert!((e.l2_norm - (9.0f64 + 6.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn sign_observable_has_rank_one() {
        let e = chaos_coefficients(|x: f64| x.tanh(), 9, 200, "tanh").unwrap();
        assert_eq!(e.rank, 1);
        assert!(e.coeffs[2].abs() < 1e-12);
        let l2_sq: f64 = e.coeffs.iter().enumerate().map(|(k, c)| c * c * factorial(k)).sum();
        assert!((l2_sq.sqrt() - e.l2_norm).abs() <= 1e-10 * e.l2_norm);
    }

    #[test]
    fn uncentred_is_rejected() {
        let r = chaos_coefficients(|x| x * x, 4, 20, "x^2");
        assert!(matches!(r, Err(Error::NotCentred { .. })));
        assert!(chaos_coefficients(|x| x, 4, 10, "x").is_err());
    }

    #[test]
    fn exponents_and_alpha() {
        assert_eq!(hstar(0.5, 1).unwrap(), 0.5);
        assert_relative_eq!(hstar(8.0 / 9.0, 2).unwrap(), 7.0 / 9.0, epsilon = 1e-15);
        assert_relative_eq!(hstar(8.0 / 9.0, 4).unwrap(), 5.0 / 9.0, epsilon = 1e-15);
        let a = scaling_alpha(0.01, 8.0 / 9.0, 2).unwrap();
        assert_relative_eq!(a, 0.01f64.powf(-2.0 / 9.0), max_relative = 1e-14);
        assert!((a - 2.783).abs() < 1e-3);
        assert_relative_eq!(scaling_alpha(0.25, 8.0 / 9.0, 10).unwrap(), 2.0, max_relative = 1e-14);
        let e1 = (-1.0f64).exp();
        assert_relative_eq!(scaling_alpha(e1, 0.75, 2).unwrap(), 0.5f64.exp(), max_relative = 1e-12);
        assert!(scaling_alpha(0.0, 0.7, 1).is_err());
        assert!(scaling_alpha(-1.0, 0.7, 1).is_err());
    }

    #[test]
    fn classification() {
        let c = classify_limit(0.7, 2).unwrap();
        assert_relative_eq!(c.hstar, 0.4, epsilon = 1e-12);
        assert_eq!(c.regime, Regime::Wiener);
        // band endpoints come reversed for H > 1/2; read as [5/3, 10/3]
        assert!(c.excluded_band);
        assert!(!c.strict);
        let c = classify_limit(8.0 / 9.0, 10).unwrap();
        assert_relative_eq!(c.hstar, -1.0 / 9.0, epsilon = 1e-12);
        assert_eq!(c.regime, Regime::Wiener);
        assert!(c.strict);
        assert!(!c.excluded_band);
        let c = classify_limit(0.9, 2).unwrap();
        assert_relative_eq!(c.hstar, 0.8, epsilon = 1e-12);
        assert_eq!(c.regime, Regime::Hermite);
        // H = 8/9: band [4.5, 9] contains 5..9
        assert!(classify_limit(8.0 / 9.0, 6).unwrap().excluded_band);
        assert!(classify_limit(8.0 / 9.0, 9).unwrap().excluded_band);
        assert_eq!(classify_limit(0.5, 1).unwrap().regime, Regime::Wiener);
        assert_eq!(classify_limit(0.75, 2).unwrap().regime, Regime::Boundary);
    }

    #[test]
    fn decay_norm() {
        assert_relative_eq!(fast_decay_norm(&ChaosExpansion::hermite(2), 4).unwrap(), 2f64.sqrt() * 7.0, max_relative = 1e-14);
        assert_relative_eq!(fast_decay_norm(&ChaosExpansion::hermite(1), 1).unwrap(), 1.0);
        let g = ChaosExpansion::from_coeffs(vec![0.0, 0.0, 1.0, 0.0, 1.0], "H2+H4").unwrap();
        let oracle = 2f64.sqrt() * 3.0 + 24f64.sqrt() * 9.0;
        assert_relative_eq!(fast_decay_norm(&g, 2).unwrap(), oracle, max_relative = 1e-14);
        assert!((oracle - 48.33).abs() < 0.01);
    }

    #[test]
    fn orthogonality_by_quadrature() {
        let (x, w) = gauss_hermite(60);
        for m in 0..=12usize {
            for n in 0..=12usize {
                let s: f64 = x.iter().zip(&w).map(|(x, w)| w * hermite_unchecked(m, *x) * hermite_unchecked(n, *x)).sum();
                if m == n {
                    assert!((s / factorial(m) - 1.0).abs() < 1e-9, "m={m}");
                } else {
                    let scale = (factorial(m) * factorial(n)).sqrt();
                    assert!(s.abs() < 1e-12 * scale, "m={m} n={n} s={s}");
                }
            }
        }
    }

    #[test]
    fn eval_and_cross_moment() {
        let g = ChaosExpansion::from_coeffs(vec![0.0, 3.0, 0.0, 1.0], "x^3").unwrap();
        for &x in &[-1.5, 0.0, 0.3, 2.0] {
            assert_relative_eq!(g.eval(x), x * x * x, epsilon = 1e-12);
        }
        // E[ξ³ η³] = 9r + 6r³
        let r: f64 = 0.4;
        assert_relative_eq!(g.cross_moment(&g, r), 9.0 * r + 6.0 * r.powi(3), epsilon = 1e-12);
        assert_eq!(ChaosExpansion::zero().eval(1.0), 0.0);
    }
}
