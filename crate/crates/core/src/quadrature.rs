//! Numerical integration: adaptive Gauss–Kronrod, double-exponential
//! (tanh-sinh) rules for endpoint singularities, and Gauss–Hermite /
//! Gauss–Legendre node sets.

use crate::error::{Error, Result};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub evals: usize,
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_0,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// Globally adaptive 15-point Gauss–Kronrod on a finite interval.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Result<QuadResult> {
    integrate_with_limit(f, a, b, abs_tol, rel_tol, 4000)
}

pub fn integrate_with_limit(
    f: impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_intervals: usize,
) -> Result<QuadResult> {
    if a == b {
        return Ok(QuadResult { value: 0.0, error: 0.0, evals: 0 });
    }
    let (v0, e0) = gk15(&f, a, b);
    let mut parts = vec![(a, b, v0, e0)];
    let mut total = v0;
    let mut err = e0;
    let mut evals = 15;
    while err > abs_tol.max(rel_tol * total.abs()) {
        if parts.len() >= max_intervals {
            return Err(Error::Accuracy(format!(
                "adaptive quadrature on [{a}, {b}] stalled at error {err:e} (value {total:e})"
            )));
        }
        let (idx, _) = parts
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("non-empty");
        let (lo, hi, v, e) = parts.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        let (vl, el) = gk15(&f, lo, mid);
        let (vr, er) = gk15(&f, mid, hi);
        evals += 30;
        total += vl + vr - v;
        err += el + er - e;
        parts.push((lo, mid, vl, el));
        parts.push((mid, hi, vr, er));
        if !total.is_finite() {
            return Err(Error::Numeric(format!("integrand non-finite on [{lo}, {hi}]")));
        }
    }
    // Re-sum to shed accumulated rounding from the running updates.
    let value = parts.iter().map(|p| p.2).sum();
    let error = parts.iter().map(|p| p.3).sum();
    Ok(QuadResult { value, error, evals })
}

/// ∫_a^∞ f via x = a + t/(1-t).
pub fn integrate_to_infinity(f: impl Fn(f64) -> f64, a: f64, abs_tol: f64, rel_tol: f64) -> Result<QuadResult> {
    integrate(
        |t| {
            if t >= 1.0 {
                return 0.0;
            }
            let s = 1.0 - t;
            let v = f(a + t / s) / (s * s);
            if v.is_finite() {
                v
            } else {
                0.0
            }
        },
        0.0,
        1.0,
        abs_tol,
        rel_tol,
    )
}

/// Tanh-sinh rule on [a, b]. The integrand receives `(x, x - a, b - x)` with
/// the endpoint distances computed without cancellation, so algebraic
/// endpoint singularities such as `(x - a)^{-0.9}` are integrated to full
/// precision.
pub fn tanh_sinh(f: impl Fn(f64, f64, f64) -> f64, a: f64, b: f64, tol: f64) -> Result<QuadResult> {
    tanh_sinh_tol(f, a, b, 0.0, tol)
}

/// [`tanh_sinh`] with an absolute tolerance as well, for integrals that may
/// cancel to zero.
pub fn tanh_sinh_tol(f: impl Fn(f64, f64, f64) -> f64, a: f64, b: f64, abs_tol: f64, tol: f64) -> Result<QuadResult> {
    if a == b {
        return Ok(QuadResult { value: 0.0, error: 0.0, evals: 0 });
    }
    let half = 0.5 * (b - a);
    let t_max = 6.5;
    let mut h = 0.5;
    let eval_at = |t: f64| -> f64 {
        let u = 0.5 * PI * t.sinh();
        let cosh_u = u.cosh();
        // 1 - tanh(u) and 1 + tanh(u) without cancellation
        let e = (-2.0 * u.abs()).exp();
        let small = 2.0 * e / (1.0 + e);
        let (one_minus, one_plus) = if u >= 0.0 { (small, 2.0 - small) } else { (2.0 - small, small) };
        let da = half * one_plus;
        let db = half * one_minus;
        if da <= 0.0 || db <= 0.0 {
            return 0.0;
        }
        let w = half * 0.5 * PI * t.cosh() / (cosh_u * cosh_u);
        if w == 0.0 {
            return 0.0;
        }
        let x = if da < db { a + da } else { b - db };
        let v = f(x, da, db) * w;
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    let mut evals = 0usize;
    let mut sum = eval_at(0.0);
    let mut k = 1;
    while (k as f64) * h <= t_max {
        let t = k as f64 * h;
        sum += eval_at(t) + eval_at(-t);
        evals += 2;
        k += 1;
    }
    let mut estimate = sum * h;
    for _level in 0..10 {
        h *= 0.5;
        let mut k = 1;
        while (k as f64) * h <= t_max {
            let t = k as f64 * h;
            sum += eval_at(t) + eval_at(-t);
            evals += 2;
            k += 2;
        }
        let next = sum * h;
        let err = (next - estimate).abs();
        estimate = next;
        if err <= abs_tol.max(tol * estimate.abs()) || err < 1e-300 {
            return Ok(QuadResult { value: estimate, error: err, evals });
        }
    }
    Err(Error::Accuracy(format!("tanh-sinh on [{a}, {b}] did not reach relative tolerance {tol:e}")))
}

/// ∫_a^∞ f by tanh-sinh after x = a + t/(1-t). Unlike
/// [`integrate_to_infinity`] this copes with slow algebraic decay
/// `x^{-p}`, `1 < p < 2`, which maps to an endpoint singularity at t = 1.
pub fn tanh_sinh_to_infinity(f: impl Fn(f64) -> f64, a: f64, abs_tol: f64, rel_tol: f64) -> Result<QuadResult> {
    tanh_sinh_tol(
        |_, t, one_minus_t| {
            let x = a + t / one_minus_t;
            f(x) / (one_minus_t * one_minus_t)
        },
        0.0,
        1.0,
        abs_tol,
        rel_tol,
    )
}

/// Gauss–Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j + 1) as f64 * z * p2 - j as f64 * p3) / (j + 1) as f64;
            }
            pp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Number of eigenvalues below `x` of the physicists' Hermite Jacobi
/// matrix (zero diagonal, off-diagonal `sqrt(k/2)`).
fn sturm_count(n: usize, x: f64) -> usize {
    let mut count = 0;
    let mut q = -x;
    if q < 0.0 {
        count += 1;
    }
    for k in 1..n {
        let b2 = k as f64 / 2.0;
        let prev = if q == 0.0 { 1e-300 } else { q };
        q = -x - b2 / prev;
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// Gauss–Hermite rule for the standard Gaussian measure: nodes `x_i` and
/// weights `w_i` with `Σ w_i f(x_i) ≈ ∫ f dμ`, `μ = N(0,1)`.
///
/// Newton iteration on orthonormal Hermite functions; the recurrence is
/// carried in log-scaled form so orders up to a few thousand do not
/// overflow.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut z_phys = vec![0.0; n];
    let mut w_phys = vec![0.0; n];
    let m = n.div_ceil(2);
    let nf = n as f64;
    let pim4 = PI.powf(-0.25);
    for i in 0..m {
        // bracket the i-th largest root of the Jacobi matrix by Sturm
        // bisection, then polish with Newton below
        let k = n - 1 - i;
        let (mut lo, mut hi) = (-1e-3, (2.0 * nf + 1.0).sqrt() + 1.0);
        for _ in 0..64 {
            let mid = 0.5 * (lo + hi);
            if sturm_count(n, mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let mut z = 0.5 * (lo + hi);
        let mut log_scale;
        let mut pp;
        let mut iter = 0;
        loop {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            log_scale = 0.0f64;
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                p1 = z * (2.0 / j as f64).sqrt() * p2 - ((j - 1) as f64 / j as f64).sqrt() * p3;
                if p1.abs() > 1e150 {
                    p1 *= 1e-150;
                    p2 *= 1e-150;
                    log_scale += 150.0 * std::f64::consts::LN_10;
                }
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            iter += 1;
            if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) || iter > 200 {
                break;
            }
        }
        z_phys[i] = z;
        z_phys[n - 1 - i] = -z;
        // w = 2 / (pp * scale)^2
        let log_w = std::f64::consts::LN_2 - 2.0 * (pp.abs().ln() + log_scale);
        w_phys[i] = log_w.exp();
        w_phys[n - 1 - i] = w_phys[i];
    }
    let sqrt_pi = PI.sqrt();
    let mut nodes: Vec<f64> = z_phys.iter().map(|z| z * std::f64::consts::SQRT_2).collect();
    let mut weights: Vec<f64> = w_phys.iter().map(|w| w / sqrt_pi).collect();
    nodes.reverse();
    weights.reverse();
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_kronrod_polynomial_and_smooth() {
        let r = integrate(|x| x * x, 0.0, 3.0, 1e-13, 1e-13).unwrap();
        assert!((r.value - 9.0).abs() < 1e-12);
        let r = integrate(|x: f64| x.sin(), 0.0, PI, 1e-13, 1e-13).unwrap();
        assert!((r.value - 2.0).abs() < 1e-12);
    }

    #[test]
    fn semi_infinite_exponential() {
        let r = integrate_to_infinity(|x: f64| (-x).exp(), 0.0, 1e-12, 1e-12).unwrap();
        assert!((r.value - 1.0).abs() < 1e-10);
    }

    #[test]
    fn tanh_sinh_endpoint_singularity() {
        // ∫_0^1 x^{-0.9} dx = 10
        let r = tanh_sinh(|_, da, _| da.powf(-0.9), 0.0, 1.0, 1e-12).unwrap();
        assert!((r.value - 10.0).abs() < 1e-8, "{}", r.value);
        // ∫_0^2 (2-x)^{-0.6} dx = 2^{0.4}/0.4
        let r = tanh_sinh(|_, _, db| db.powf(-0.6), 0.0, 2.0, 1e-12).unwrap();
        assert!((r.value - 2f64.powf(0.4) / 0.4).abs() < 1e-9);
    }

    #[test]
    fn slow_algebraic_tail() {
        // ∫_1^∞ x^{-1.2} dx = 5
        let r = tanh_sinh_to_infinity(|x: f64| x.powf(-1.2), 1.0, 0.0, 1e-12).unwrap();
        assert!((r.value - 5.0).abs() < 1e-9, "{}", r.value);
        let r = tanh_sinh_to_infinity(|x: f64| (-x).exp(), 0.0, 0.0, 1e-12).unwrap();
        assert!((r.value - 1.0).abs() < 1e-11, "{}", r.value);
    }

    #[test]
    fn hermite_rule_reproduces_gaussian_moments() {
        for &n in &[20usize, 200, 400, 800] {
            let (x, w) = gauss_hermite(n);
            let m0: f64 = w.iter().sum();
            let m2: f64 = x.iter().zip(&w).map(|(x, w)| w * x * x).sum();
            let m4: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(4)).sum();
            assert!((m0 - 1.0).abs() < 1e-12, "n={n} m0={m0}");
            assert!((m2 - 1.0).abs() < 1e-11, "n={n} m2={m2}");
            assert!((m4 - 3.0).abs() < 1e-10, "n={n} m4={m4}");
        }
    }

    #[test]
    fn legendre_rule_exact_for_degree_2n_minus_1() {
        let (x, w) = gauss_legendre(8);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(14)).sum();
        assert!((s - 2.0 / 15.0).abs() < 1e-13);
    }
}
