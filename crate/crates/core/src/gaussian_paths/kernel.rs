use crate::error::{ensure, Error, Result};
use crate::quadrature::{gauss_legendre, tanh_sinh, tanh_sinh_to_infinity, tanh_sinh_tol};

use super::correlation::fou_sigma;

fn check_long_memory(h: f64) -> Result<()> {
    ensure(h > 0.5 && h < 1.0, || format!("kernel representation needs H in (1/2, 1), got {h}"))
}

/// `c₁(H)² = ∫_0^∞ ((1+v)^{H-1/2} - v^{H-1/2})² dv + 1/(2H)`, the
/// Mandelbrot–Van Ness normalizer, by quadrature.
pub fn mvn_c1(h: f64) -> Result<f64> {
    ensure(h > 0.0 && h < 1.0, || format!("H = {h} outside (0, 1)"))?;
    let a = h - 0.5;
    let f = |v: f64| {
        // (1+v)^a - v^a = v^a expm1(a ln1p(1/v))
        let d = v.powf(a) * (a * (1.0 / v).ln_1p()).exp_m1();
        d * d
    };
    let near = tanh_sinh(|v, _, _| f(v), 0.0, 1.0, 1e-12)?.value;
    let far = tanh_sinh_to_infinity(f, 1.0, 1e-16, 1e-12)?.value;
    Ok((near + far + 1.0 / (2.0 * h)).sqrt())
}

/// `g₀(w) = e^{-w} ∫_0^w e^v v^a dv` for `a > -1`; zero for `w ≤ 0`.
pub fn g0(a: f64, w: f64) -> f64 {
    if w <= 0.0 {
        return 0.0;
    }
    if w <= 40.0 {
        // e^{-w} w^{a+1} Σ_k w^k / (k! (a+k+1)), all terms positive
        let mut term = 1.0;
        let mut sum = 1.0 / (a + 1.0);
        let mut k = 0.0;
        loop {
            k += 1.0;
            term *= w / k;
            let add = term / (a + k + 1.0);
            sum += add;
            if k > w && add < 1e-17 * sum {
                break;
            }
        }
        (-w).exp() * w.powf(a + 1.0) * sum
    } else {
        // Σ_j (-1)^j a(a-1)…(a-j+1) w^{a-j}, error O(e^{-w})
        let mut term = w.powf(a);
        let mut sum = term;
        let mut j = 0.0;
        loop {
            let next = -term * (a - j) / w;
            j += 1.0;
            if next.abs() >= term.abs() || next == 0.0 {
                break;
            }
            sum += next;
            term = next;
            if term.abs() < 1e-17 * sum.abs() {
                break;
            }
        }
        sum
    }
}

/// Appendix kernel `g(s) = (1/c₁) e^{-s} ∫_0^s e^u u^{H-3/2} du`, zero for `s ≤ 0`.
pub fn ou_kernel_g(h: f64, s: f64) -> Result<f64> {
    check_long_memory(h)?;
    Ok(g0(h - 1.5, s) / mvn_c1(h)?)
}

/// Precomputed constants of the moving-average representation
/// `y^ε_t = ∫ h_ε(t,s) dW_s`.
#[derive(Debug, Clone, Copy)]
pub struct OuKernel {
    pub h: f64,
    /// Exponent `H - 3/2`.
    pub a: f64,
    pub c1: f64,
    /// `σ (H - 1/2) / c₁`: makes `∫ h_ε(t,s)² ds = 1`.
    pub scale: f64,
}

impl OuKernel {
    pub fn new(h: f64) -> Result<Self> {
        check_long_memory(h)?;
        let c1 = mvn_c1(h)?;
        Ok(Self { h, a: h - 1.5, c1, scale: fou_sigma(h)? * (h - 0.5) / c1 })
    }

    /// Unit-time kernel `κ g₀(w)`; `y_t = ∫ unit(t - s) dW_s`.
    pub fn unit(&self, w: f64) -> f64 {
        self.scale * g0(self.a, w)
    }

    /// `h_ε(t,s) = ε^{-1/2} κ g₀((t-s)/ε)`.
    pub fn h_eps(&self, eps: f64, t: f64, s: f64) -> f64 {
        self.unit((t - s) / eps) / eps.sqrt()
    }
}

/// `h_ε(t,s)` for the unit-variance fOU. Carries the factor `σ(H-1/2)` that
/// converts the fBM kernel into the Wiener kernel of `y^ε`.
pub fn kernel_h_eps(h: f64, eps: f64, t: f64, s: f64) -> Result<f64> {
    ensure(eps > 0.0, || format!("eps must be positive, got {eps}"))?;
    Ok(OuKernel::new(h)?.h_eps(eps, t, s))
}

/// L² distance between the rescaled kernel `∫_0^t Π ε^{H-3/2} g₀((s-u_i)/ε) ds`
/// and its limit `∫_0^t Π (s-u_i)_+^{H-3/2} ds`, for `m ∈ {1, 2}`.
pub fn kernel_l2_gap(h: f64, eps: f64, t: f64, m: usize) -> Result<f64> {
    check_long_memory(h)?;
    ensure(eps > 0.0 && t > 0.0, || format!("need eps, t > 0, got eps = {eps}, t = {t}"))?;
    match m {
        1 => gap_rank_one(h, eps, t),
        2 => gap_rank_two(h, eps, t),
        _ => Err(Error::Argument(format!("kernel gap implemented for m = 1, 2; got {m}"))),
    }
}

/// The rank-one difference is `-ε^{H-1/2}[g₀((t-u)/ε) - g₀((-u)_+/ε)]`,
/// because `∫_0^x g₀ = x^{a+1}/(a+1) - g₀(x)`.
fn gap_rank_one(h: f64, eps: f64, t: f64) -> Result<f64> {
    let a = h - 1.5;
    let x = t / eps;
    // substitute u = ε w; squared norm = ε^{2H} ∫ [g₀(x-w) - g₀((-w)_+)]² dw
    let d = |w: f64| {
        let v = g0(a, x - w) - g0(a, (-w).max(0.0));
        v * v
    };
    let inside = tanh_sinh(|w, _, _| d(w), 0.0, x, 1e-10)?.value;
    let past = tanh_sinh_to_infinity(|v| d(-v), 0.0, 1e-16, 1e-10)?.value;
    Ok(eps.powf(h) * (inside + past).sqrt())
}

/// Gauss–Legendre panels on `[a, b]`, split geometrically toward the
/// endpoints flagged in `grade`.
fn graded_rule(a: f64, b: f64, grade: (bool, bool), levels: usize, order: usize) -> Vec<(f64, f64)> {
    let (x, w) = gauss_legendre(order);
    let mut cuts = vec![0.0, 1.0];
    // with both ends graded each side covers half the interval
    let span = if grade.0 && grade.1 { 0.5 } else { 1.0 };
    for j in 1..=levels {
        let r = span * 0.5f64.powi(j as i32);
        if grade.0 {
            cuts.push(r);
        }
        if grade.1 {
            cuts.push(1.0 - r);
        }
    }
    if grade.0 && grade.1 {
        cuts.push(0.5);
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut rule = Vec::with_capacity((cuts.len() - 1) * order);
    for pair in cuts.windows(2) {
        let (lo, hi) = (a + (b - a) * pair[0], a + (b - a) * pair[1]);
        let half = 0.5 * (hi - lo);
        for (xi, wi) in x.iter().zip(&w) {
            rule.push((lo + half * (xi + 1.0), half * wi));
        }
    }
    rule
}

/// Rank-two gap. The limit kernel behaves like `δ^{2H-2}` across the
/// diagonal `δ = |u₁ - u₂| → 0`, so the squared gap is finite only for
/// `H > 3/4`; the substitution `δ ∝ y^{1/(4H-3)}` removes the singularity.
fn gap_rank_two(h: f64, eps: f64, t: f64) -> Result<f64> {
    ensure(h > 0.75, || format!("rank-two kernels are square integrable only for H > 3/4, got {h}"))?;
    let a = h - 1.5;
    let pre = eps.powf(2.0 * a);
    let (nodes, weights) = gauss_legendre(48);
    // s - lo = (t - lo) y^p with p = 1/(a+1) flattens (s - lo)^a
    let p = 1.0 / (a + 1.0);
    let diff = |u: f64, delta: f64| -> f64 {
        let v = u + delta;
        let lo = v.max(0.0);
        let len = t - lo;
        if len <= 0.0 {
            return 0.0;
        }
        let mut acc = 0.0;
        for (x, w) in nodes.iter().zip(&weights) {
            let y = 0.5 * (x + 1.0);
            let ds = len * y.powf(p);
            let jac = 0.5 * w * len * p * y.powf(p - 1.0);
            let s = lo + ds;
            let dv = if lo == v { ds } else { s - v };
            let approx = pre * g0(a, (s - u) / eps) * g0(a, dv / eps);
            let limit = (s - u).powf(a) * dv.powf(a);
            acc += jac * (approx - limit);
        }
        acc
    };
    let q = 1.0 / (4.0 * h - 3.0);
    let inner = |u: f64| -> f64 {
        let upper = t - u;
        let near = if u < 0.0 { (-u).min(upper) } else { upper };
        // δ = near · y^q on [0, near]
        let mut total = 0.0;
        for (y, w) in graded_rule(0.0, 1.0, (false, true), 6, 8) {
            let d = near * y.powf(q);
            let jac = near * q * y.powf(q - 1.0);
            total += w * jac * diff(u, d).powi(2);
        }
        if near < upper {
            for (d, w) in graded_rule(near, upper, (true, false), 8, 8) {
                total += w * diff(u, d).powi(2);
            }
        }
        2.0 * total
    };
    let norm_sq = |window: f64| -> f64 {
        let mut total = 0.0;
        for (u, w) in graded_rule(-window, 0.0, (false, true), 14, 8) {
            total += w * inner(u);
        }
        for (u, w) in graded_rule(0.0, t, (true, true), 8, 8) {
            total += w * inner(u);
        }
        total
    };
    let window = 40.0 * t.max(eps);
    let full = norm_sq(window);
    let half = norm_sq(0.5 * window);
    if !full.is_finite() {
        return Err(Error::Accuracy("rank-two kernel gap quadrature produced a non-finite value".into()));
    }
    if (full - half).abs() > 0.01 * full {
        return Err(Error::Accuracy(format!(
            "truncation window {window} leaves {:.2}% of the squared gap outside",
            100.0 * (full - half).abs() / full
        )));
    }
    Ok(full.sqrt())
}

/// `E(ȳ^k_s ȳ^k_t)`, the covariance of the `F_k`-measurable parts of the
/// unit-rate fOU, assembled as `e^{-(t-k)-(s-k)} + II + III + IV` from the
/// decomposition `ȳ^k_t = e^{-(t-k)} y_k + σ∫_k^t e^{-(t-r)} dB̄^k_r`.
pub fn conditional_cov_decay(h: f64, k: f64, s: f64, t: f64) -> Result<f64> {
    ensure(s >= k && t >= k, || format!("need s, t ≥ k, got k = {k}, s = {s}, t = {t}"))?;
    let ker = OuKernel::new(h)?;
    let (ds, dt) = (s - k, t - k);
    if ds == 0.0 && dt == 0.0 {
        return Ok(1.0);
    }
    // in the past variable w = k - ξ ≥ 0: y_k ↔ κg₀(w), ȳ^k_t ↔ κg₀(t-k+w)
    let base = |w: f64| ker.unit(w);
    let j = move |tau: f64, w: f64| ker.unit(tau + w) - (-tau).exp() * ker.unit(w);
    let quad = |f: &dyn Fn(f64) -> f64| -> Result<f64> {
        let near = tanh_sinh_tol(|w, _, _| f(w), 0.0, 1.0, 1e-15, 1e-10)?.value;
        let far = tanh_sinh_to_infinity(f, 1.0, 1e-16, 1e-12)?.value;
        Ok(near + far)
    };
    let first = (-(dt + ds)).exp();
    let ii = (-dt).exp() * quad(&|w| base(w) * j(ds, w))?;
    let iii = (-ds).exp() * quad(&|w| base(w) * j(dt, w))?;
    let iv = quad(&|w| j(dt, w) * j(ds, w))?;
    Ok(first + ii + iii + iv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    /// `c₁² = Γ(H+1/2)² / (Γ(2H+1) sin(πH))`.
    fn mvn_c1_closed(h: f64) -> f64 {
        use statrs::function::gamma::gamma;
        (gamma(h + 0.5).powi(2) / (gamma(2.0 * h + 1.0) * (PI * h).sin())).sqrt()
    }

    #[test]
    fn c1_matches_closed_form() {
        for &h in &[0.2, 0.5, 0.7, 0.9] {
            let q = mvn_c1(h).unwrap();
            assert!((q - mvn_c1_closed(h)).abs() < 1e-9 * q, "H={h}");
        }
        assert!((mvn_c1(0.5).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn g0_branches_agree() {
        for &a in &[-0.9, -0.7, -0.55] {
            let lo = g0(a, 40.0);
            let hi = g0(a, 40.0 + 1e-9);
            assert!((lo - hi).abs() < 1e-10 * lo, "a={a}: {lo} vs {hi}");
        }
    }

    #[test]
    fn g0_against_quadrature() {
        let a = -0.7;
        for &w in &[0.01, 0.5, 3.0, 25.0] {
            let q = tanh_sinh(|v, _, dv| (-dv).exp() * v.powf(a), 0.0, w, 1e-12).unwrap().value;
            assert!((g0(a, w) - q).abs() < 1e-10 * q, "w={w}");
        }
    }

    #[test]
    fn kernel_is_one_sided_and_nonnegative() {
        assert_eq!(ou_kernel_g(0.8, -1.0).unwrap(), 0.0);
        for i in 0..200 {
            let s = i as f64 * 0.37 - 10.0;
            assert!(kernel_h_eps(0.8, 0.1, 0.0, s).unwrap() >= 0.0);
        }
    }

    #[test]
    fn ou_kernel_has_unit_l2_norm() {
        for &h in &[0.6, 0.8, 0.9] {
            let k = OuKernel::new(h).unwrap();
            let f = |w: f64| k.unit(w).powi(2);
            let n = tanh_sinh(|w, _, _| f(w), 0.0, 1.0, 1e-12).unwrap().value
                + tanh_sinh_to_infinity(f, 1.0, 1e-14, 1e-11).unwrap().value;
            assert!((n - 1.0).abs() < 1e-8, "H={h}: {n}");
        }
    }

    #[test]
    fn conditional_covariance_at_origin_is_one() {
        assert_eq!(conditional_cov_decay(0.8, 2.0, 2.0, 2.0).unwrap(), 1.0);
        let v = conditional_cov_decay(0.8, 0.0, 1e-6, 1e-6).unwrap();
        assert!((v - 1.0).abs() < 1e-4, "{v}");
    }
}
