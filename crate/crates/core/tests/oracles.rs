//! Closed forms and alternative computations checked against the library.

use std::f64::consts::PI;

use homog_core::gaussian_paths::{fbm_sample, fou_correlation, fou_sigma, mvn_c1};
use homog_core::hermite_process::{calibrate_k, hermite_sample, HermiteSpec};
use homog_core::quadrature::{gauss_legendre, tanh_sinh};
use homog_core::stats::ensemble_moments;
use statrs::function::beta::beta;
use statrs::function::gamma::gamma;

fn legendre_on(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let (x, w) = gauss_legendre(n);
    let (c, r) = (0.5 * (a + b), 0.5 * (b - a));
    x.iter().zip(&w).map(|(x, w)| w * f(c + r * x)).sum::<f64>() * r
}

/// `ρ(u)` from the spectral density `|x|^{1-2H}/(1+x²)`: the cosine
/// transform is summed over half periods between zeros of `cos(ux)` and the
/// alternating tail is accelerated by repeated averaging of partial sums.
fn spectral_rho(h: f64, u: f64) -> f64 {
    let dens = |x: f64| x.powf(1.0 - 2.0 * h) / (1.0 + x * x);
    let zero = |k: usize| (k as f64 + 0.5) * PI / u;
    let mut sums = Vec::new();
    let mut s = tanh_sinh(|x, _, _| (u * x).cos() * dens(x), 0.0, zero(0), 1e-14).unwrap().value;
    for k in 0..400 {
        s += legendre_on(|x| (u * x).cos() * dens(x), zero(k), zero(k + 1), 24);
        sums.push(s);
    }
    let mut tail: Vec<f64> = sums[sums.len() - 40..].to_vec();
    while tail.len() > 1 {
        tail = tail.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    }
    let norm = PI / (2.0 * (PI * (h - 0.5)).cos());
    tail[0] / norm
}

#[test]
fn correlation_matches_spectral_transform() {
    for h in [0.3, 0.7, 0.85] {
        for u in [0.5, 2.0, 7.0, 30.0] {
            let a = fou_correlation(h, u).unwrap();
            let b = spectral_rho(h, u);
            assert!((a - b).abs() < 1e-7, "H={h} u={u}: {a} vs {b}");
        }
    }
}

#[test]
fn sigma_closed_form() {
    // σ² Γ(2H+1) sin(πH) / (2π) ∫ |x|^{1-2H}/(1+x²) dx = 1
    for h in [0.2, 0.5, 0.8] {
        let s = fou_sigma(h).unwrap();
        let spectral = gamma(2.0 * h + 1.0) * (PI * h).sin() / PI * PI / (2.0 * (PI * (h - 0.5)).cos());
        assert!((s * s * spectral - 1.0).abs() < 1e-10, "H={h}");
    }
}

#[test]
fn mandelbrot_van_ness_constant() {
    for h in [0.2, 0.45, 0.7, 0.9] {
        let closed = (gamma(h + 0.5).powi(2) / (gamma(2.0 * h + 1.0) * (PI * h).sin())).sqrt();
        let c1 = mvn_c1(h).unwrap();
        assert!((c1 - closed).abs() < 1e-8 * closed, "H={h}: {c1} vs {closed}");
    }
}

#[test]
fn hermite_normalizer_near_continuum_value() {
    // Var(Z_1) with K = 1 is m! B(ĥ-1/2, 2-2ĥ)^m / (H(2H-1)) in the continuum.
    for (m, h) in [(1, 0.7), (2, 0.8)] {
        let spec = HermiteSpec::new(m, h, 1e-2).unwrap();
        let hh = spec.hhat;
        let fact = (1..=m).product::<usize>() as f64;
        let var = fact * beta(hh - 0.5, 2.0 - 2.0 * hh).powi(m as i32) / (h * (2.0 * h - 1.0));
        let closed = 1.0 / var.sqrt();
        let k = calibrate_k(&spec).unwrap();
        assert!((k / closed - 1.0).abs() < 0.03, "m={m} H={h}: {k} vs {closed}");
    }
}

#[test]
fn fbm_increment_variance() {
    // E (B_1 - B_{1/2})² = 2^{-2H}
    for h in [0.25, 0.75] {
        let n = 3000;
        let mut sq = Vec::with_capacity(n);
        for s in 0..n as u64 {
            let p = fbm_sample(h, 0.0, 1.0, 0.01, 100 + s, true).unwrap();
            let d = p.values[100] - p.values[50];
            sq.push(d * d);
        }
        let m = ensemble_moments(&sq, 2).unwrap();
        let exact = 0.5f64.powf(2.0 * h);
        assert!((m.mean() - exact).abs() < 4.0 * m.se(1), "H={h}: {} vs {exact}", m.mean());
    }
}

#[test]
fn rosenblatt_skewness() {
    let h = 0.8;
    // 48 B(H,H)/((3H-1) 3H) (H(2H-1)/2)^{3/2}
    let exact = 48.0 * beta(h, h) / ((3.0 * h - 1.0) * 3.0 * h) * (h * (2.0 * h - 1.0) / 2.0).powf(1.5);
    assert!((exact - 2.548).abs() < 1e-3);
    let spec = HermiteSpec::calibrated(2, h, 1e-2).unwrap();
    let z: Vec<f64> = (0..1500u64)
        .map(|s| {
            let p = hermite_sample(&spec, 1.0, 1e-2, s).unwrap();
            p.values[p.len() - 1]
        })
        .collect();
    let m = ensemble_moments(&z, 4).unwrap();
    assert!((m.variance() - 1.0).abs() < 4.0 * m.se(2) + 0.02, "variance {}", m.variance());
    assert!((m.skewness - exact).abs() < 4.0 * m.skewness_ci / 1.96, "skewness {} ± {}", m.skewness, m.skewness_ci);
}
