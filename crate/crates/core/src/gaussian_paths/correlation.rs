use statrs::function::gamma::gamma;

use crate::error::{ensure, Result};
use crate::quadrature::{integrate, integrate_to_infinity, tanh_sinh, tanh_sinh_tol};

/// Lags beyond which ρ is evaluated from its asymptotic series; the
/// neglected terms are `O(e^{-s})`.
const ASYMPTOTIC_FROM: f64 = 40.0;

/// Cut-off for the `e^{-x}` weight in the second-difference integral.
const WEIGHT_CUTOFF: f64 = 60.0;

/// Split point for ∫ρ^q: numerical quadrature below, two-term tail above.
pub const TAIL_FROM: f64 = 200.0;

fn check_h(h: f64) -> Result<()> {
    ensure(h > 0.0 && h < 1.0, || format!("H = {h} outside (0, 1)"))
}

fn is_half(h: f64) -> bool {
    (h - 0.5).abs() < 1e-14
}

/// Normalizer making the stationary fOU `σ∫_{-∞}^t e^{-(t-s)} dB_s` unit
/// variance: `σ² = 1 / (H Γ(2H))`.
pub fn fou_sigma(h: f64) -> Result<f64> {
    check_h(h)?;
    Ok((1.0 / (h * gamma(2.0 * h))).sqrt())
}

/// Leading tail coefficient, `ρ(s) ~ C s^{2H-2}`; `C = σ²H(2H-1) = 1/Γ(2H-1)`.
pub fn fou_tail_constant(h: f64) -> Result<f64> {
    check_h(h)?;
    Ok((2.0 * h - 1.0) / gamma(2.0 * h))
}

/// `(u+x)^e + |u-x|^e - 2u^e`, by binomial series when `x ≪ u`.
fn second_difference(e: f64, u: f64, x: f64) -> f64 {
    if u > 0.0 && x < 0.1 * u {
        let r2 = (x / u) * (x / u);
        let mut binom = 1.0;
        let mut rpow = 1.0;
        let mut sum = 0.0;
        let mut j = 0.0;
        loop {
            binom *= (e - j) / (j + 1.0) * (e - j - 1.0) / (j + 2.0);
            j += 2.0;
            rpow *= r2;
            let term = 2.0 * binom * rpow;
            sum += term;
            if term.abs() <= 1e-17 * sum.abs() || j > 200.0 {
                break;
            }
        }
        u.powf(e) * sum
    } else {
        (u + x).powf(e) + (u - x).abs().powf(e) - 2.0 * u.powf(e)
    }
}

/// Asymptotic series `Σ_k f^{(2k)}(s) / Γ(2H+1)` with `f(s) = s^{2H}`,
/// summed until the terms start to grow.
fn correlation_asymptotic(h: f64, s: f64) -> f64 {
    let e = 2.0 * h;
    let norm = gamma(e + 1.0);
    let mut falling = 1.0;
    let mut sum = 0.0;
    let mut last = f64::INFINITY;
    for k in 1..200 {
        let j = 2 * k;
        falling *= (e - (j - 2) as f64) * (e - (j - 1) as f64);
        let term = falling * s.powf(e - j as f64);
        if term.abs() > last || term == 0.0 {
            break;
        }
        sum += term;
        last = term.abs();
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    sum / norm
}

/// Autocorrelation of the unit-variance stationary fOU with unit
/// relaxation rate. Uses
/// `ρ(u) = (1/(2Γ(2H+1))) ∫_0^∞ [(u+x)^{2H} + |u-x|^{2H} - 2u^{2H}] e^{-x} dx`,
/// which is valid for every `H ∈ (0,1)`.
pub fn fou_correlation(h: f64, s: f64) -> Result<f64> {
    check_h(h)?;
    let u = s.abs();
    if is_half(h) {
        return Ok((-u).exp());
    }
    if u >= ASYMPTOTIC_FROM {
        return Ok(correlation_asymptotic(h, u));
    }
    let e = 2.0 * h;
    let mut total = 0.0;
    if u > 0.0 {
        let upper = u.min(WEIGHT_CUTOFF);
        let inner = tanh_sinh_tol(
            |x, _, db| {
                let d = if upper == u { db } else { u - x };
                let diff = if x < 0.1 * u { second_difference(e, u, x) } else { (u + x).powf(e) + d.powf(e) - 2.0 * u.powf(e) };
                diff * (-x).exp()
            },
            0.0,
            upper,
            1e-15,
            1e-12,
        )?;
        total += inner.value;
    }
    // ∫_u^∞ = e^{-u}[Γ(e+1) - 2u^e + ∫_0^∞ (2u+z)^e e^{-z} dz]
    let shifted = if u == 0.0 {
        gamma(e + 1.0)
    } else {
        integrate_to_infinity(|z| (2.0 * u + z).powf(e) * (-z).exp(), 0.0, 1e-15, 1e-13)?.value
    };
    total += (-u).exp() * (gamma(e + 1.0) - 2.0 * u.powf(e) + shifted);
    Ok(total / (2.0 * gamma(e + 1.0)))
}

/// Two-term asymptotics `ρ(s) ≈ a₁ s^{2H-2} + a₂ s^{2H-4}`.
pub fn correlation_tail_terms(h: f64) -> Result<(f64, f64)> {
    let a1 = fou_tail_constant(h)?;
    let e = 2.0 * h;
    let a2 = e * (e - 1.0) * (e - 2.0) * (e - 3.0) / gamma(e + 1.0);
    Ok((a1, a2))
}

/// `∫_a^b s^β ds`, with the logarithmic case at `β = -1`.
pub fn power_integral(beta: f64, a: f64, b: f64) -> f64 {
    if (beta + 1.0).abs() < 1e-12 {
        (b / a).ln()
    } else {
        (b.powf(beta + 1.0) - a.powf(beta + 1.0)) / (beta + 1.0)
    }
}

/// `∫_a^b s^β (1 - s/L) ds`.
fn weighted_power_integral(beta: f64, a: f64, b: f64, l: f64) -> f64 {
    power_integral(beta, a, b) - power_integral(beta + 1.0, a, b) / l
}

/// ∫_0^{x} |ρ|^q w(s) ds (or ρ^q when `signed`) by adaptive quadrature,
/// with a fine first panel for the cusp of ρ at the origin.
fn rho_power_quad(h: f64, q: u32, x: f64, signed: bool, weight: impl Fn(f64) -> f64) -> Result<f64> {
    let f = |s: f64| {
        fou_correlation(h, s)
            .map(|r| if signed { r } else { r.abs() }.powi(q as i32) * weight(s))
            .unwrap_or(f64::NAN)
    };
    let mut total = 0.0;
    let first = x.min(1.0);
    total += tanh_sinh(|s, _, _| f(s), 0.0, first, 1e-11)?.value;
    if x > 1.0 {
        let mid = x.min(ASYMPTOTIC_FROM);
        total += integrate(&f, 1.0, mid, 1e-13, 1e-11)?.value;
        if x > mid {
            total += integrate(&f, mid, x, 1e-13, 1e-11)?.value;
        }
    }
    Ok(total)
}

/// ∫_0^∞ ρ(s)^q ds for ranks with `q(2H-2) < -1` (finite integral).
/// Quadrature on `[0, TAIL_FROM]` plus the two-term asymptotic tail.
pub fn integral_rho_power(h: f64, q: u32) -> Result<f64> {
    check_h(h)?;
    ensure(q >= 1, || "q must be >= 1".into())?;
    let qf = q as f64;
    if is_half(h) {
        return Ok(1.0 / qf);
    }
    let beta = qf * (2.0 * h - 2.0);
    ensure(beta < -1.0, || format!("∫ρ^{q} diverges for H = {h} (q(2H-2) = {beta} ≥ -1)"))?;
    let f = |s: f64| fou_correlation(h, s).map(|r| r.powi(q as i32)).unwrap_or(f64::NAN);
    let head = tanh_sinh_tol(|s, _, _| f(s), 0.0, 1.0, 1e-14, 1e-11)?.value
        + integrate(&f, 1.0, ASYMPTOTIC_FROM, 1e-14, 1e-11)?.value
        + integrate(&f, ASYMPTOTIC_FROM, TAIL_FROM, 1e-14, 1e-11)?.value;
    let (a1, a2) = correlation_tail_terms(h)?;
    let t = TAIL_FROM;
    // (a1 s^p + a2 s^{p-2})^q ≈ a1^q s^{qp} + q a1^{q-1} a2 s^{qp-2}
    let lead = a1.powi(q as i32) * t.powf(beta + 1.0) / -(beta + 1.0);
    let next = qf * a1.powi(q as i32 - 1) * a2 * t.powf(beta - 1.0) / -(beta - 1.0);
    Ok(head + lead + next)
}

/// `∫_0^{T/ε}∫_0^{T/ε} |ρ(u-r)|^m du dr = 2L ∫_0^L |ρ(s)|^m (1 - s/L) ds`,
/// `L = T/ε`.
pub fn correlation_integral(h: f64, m: u32, t: f64, eps: f64) -> Result<f64> {
    double_integral(h, m, t, eps, false)
}

/// As [`correlation_integral`] with `ρ^m` in place of `|ρ|^m`; differs only
/// for odd `m` when `H < 1/2`. This is the one entering variances.
pub fn correlation_integral_signed(h: f64, m: u32, t: f64, eps: f64) -> Result<f64> {
    double_integral(h, m, t, eps, true)
}

/// `∫_0^T ρ(s)^q ds`.
pub fn integral_rho_power_to(h: f64, q: u32, t: f64) -> Result<f64> {
    check_h(h)?;
    ensure(q >= 1 && t > 0.0, || format!("need q >= 1 and T > 0, got q = {q}, T = {t}"))?;
    rho_power_quad(h, q, t, true, |_| 1.0)
}

fn double_integral(h: f64, m: u32, t: f64, eps: f64, signed: bool) -> Result<f64> {
    check_h(h)?;
    ensure(m >= 1, || "m must be >= 1".into())?;
    ensure(t > 0.0 && eps > 0.0, || format!("need T > 0 and eps > 0, got T = {t}, eps = {eps}"))?;
    let l = t / eps;
    let weight = |s: f64| 1.0 - s / l;
    if is_half(h) || l <= TAIL_FROM {
        return Ok(2.0 * l * rho_power_quad(h, m, l, signed, weight)?);
    }
    let head = rho_power_quad(h, m, TAIL_FROM, signed, weight)?;
    let (a1, a2) = correlation_tail_terms(h)?;
    let mf = m as f64;
    let beta = mf * (2.0 * h - 2.0);
    let lead = if signed { a1 } else { a1.abs() };
    let c1 = lead.powi(m as i32);
    let c2 = mf * lead.powi(m as i32 - 1) * a2 * if signed { 1.0 } else { a1.signum() };
    let tail = c1 * weighted_power_integral(beta, TAIL_FROM, l, l) + c2 * weighted_power_integral(beta - 2.0, TAIL_FROM, l, l);
    Ok(2.0 * l * (head + tail))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigma_half_is_sqrt_two() {
        assert!((fou_sigma(0.5).unwrap() - 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn unit_variance_at_zero_lag() {
        for &h in &[0.1, 0.3, 0.5, 0.7, 0.9] {
            assert!((fou_correlation(h, 0.0).unwrap() - 1.0).abs() < 1e-12, "H={h}");
        }
    }

    #[test]
    fn half_is_exponential() {
        assert!((fou_correlation(0.5, 2.0).unwrap() - (-2f64).exp()).abs() < 1e-15);
        // the general formula reproduces e^{-u} when fed H just off 1/2
        let r = fou_correlation(0.5 + 1e-9, 2.0).unwrap();
        assert!((r - (-2f64).exp()).abs() < 1e-7, "{r}");
    }

    #[test]
    fn series_switch_is_continuous() {
        for &h in &[0.3, 0.8] {
            let lo = fou_correlation(h, ASYMPTOTIC_FROM * (1.0 - 1e-9)).unwrap();
            let hi = fou_correlation(h, ASYMPTOTIC_FROM).unwrap();
            assert!((lo - hi).abs() < 1e-10, "H={h}: {lo} vs {hi}");
        }
    }

    #[test]
    fn power_integral_log_case() {
        assert!((power_integral(-1.0, 1.0, std::f64::consts::E) - 1.0).abs() < 1e-15);
        assert!((power_integral(1.0, 0.0, 2.0) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn integral_of_rho_for_rough_noise_vanishes() {
        // for H < 1/2 the spectral density of fOU vanishes at 0
        let v = integral_rho_power(0.3, 1).unwrap();
        assert!(v.abs() < 1e-7, "{v}");
    }

    #[test]
    fn signed_integral_differs_only_for_odd_rough_ranks() {
        let a = correlation_integral(0.3, 1, 1.0, 0.01).unwrap();
        let b = correlation_integral_signed(0.3, 1, 1.0, 0.01).unwrap();
        assert!(b < a);
        let a = correlation_integral(0.3, 2, 1.0, 0.01).unwrap();
        let b = correlation_integral_signed(0.3, 2, 1.0, 0.01).unwrap();
        assert!((a - b).abs() < 1e-12 * a);
        let a = correlation_integral(0.7, 3, 1.0, 0.001).unwrap();
        let b = correlation_integral_signed(0.7, 3, 1.0, 0.001).unwrap();
        assert!((a - b).abs() < 1e-12 * a);
    }

    #[test]
    fn truncated_integral_approaches_full_one() {
        let full = integral_rho_power(0.7, 2).unwrap();
        let part = integral_rho_power_to(0.7, 2, 50.0).unwrap();
        let (a1, _) = correlation_tail_terms(0.7).unwrap();
        // tail ≈ a1² ∫_50^∞ s^{-1.2} ds
        let tail = a1 * a1 * 50f64.powf(-0.2) / 0.2;
        assert!((full - part - tail).abs() < 0.01 * tail, "{} vs {tail}", full - part);
    }

    #[test]
    fn divergent_power_rejected() {
        assert!(integral_rho_power(0.8, 2).is_err());
        assert!(integral_rho_power(0.75, 2).is_err());
        assert!(integral_rho_power(0.7, 2).is_ok());
    }
}
