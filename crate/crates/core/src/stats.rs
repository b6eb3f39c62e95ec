//! Estimators shared by the verification routines: Kolmogorov–Smirnov
//! statistics, log-log slope fits and ensemble moments with jackknife
//! half-widths. Inputs are sorted before any summation, so every result is
//! invariant under permutation of the samples.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Asymptotic Kolmogorov coefficients for the 1% and 5% levels.
pub const KS_C_1PCT: f64 = 1.63;
pub const KS_C_5PCT: f64 = 1.36;

fn check_finite(xs: &[f64], what: &str) -> Result<()> {
    if xs.is_empty() {
        return Err(Error::Data(format!("{what}: no samples")));
    }
    if let Some(bad) = xs.iter().find(|x| !x.is_finite()) {
        return Err(Error::Data(format!("{what}: non-finite sample {bad}")));
    }
    Ok(())
}

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub stat: f64,
    pub n: usize,
    pub critical_1pct: f64,
    pub critical_5pct: f64,
}

impl KsResult {
    pub fn pass_1pct(&self) -> bool {
        self.stat < self.critical_1pct
    }

    pub fn pass_5pct(&self) -> bool {
        self.stat < self.critical_5pct
    }
}

/// One-sample KS distance between the empirical CDF of `samples` and `cdf`.
pub fn ks_one_sample(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<KsResult> {
    check_finite(samples, "ks_one_sample")?;
    if samples.len() < 50 {
        return Err(Error::Data(format!("ks_one_sample needs n ≥ 50, got {}", samples.len())));
    }
    let xs = sorted(samples);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, x) in xs.iter().enumerate() {
        let f = cdf(*x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    let root = n.sqrt();
    Ok(KsResult { stat: d, n: xs.len(), critical_1pct: KS_C_1PCT / root, critical_5pct: KS_C_5PCT / root })
}

/// Two-sample KS distance.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    check_finite(a, "ks_two_sample (first)")?;
    check_finite(b, "ks_two_sample (second)")?;
    let (xa, xb) = (sorted(a), sorted(b));
    let (na, nb) = (xa.len() as f64, xb.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < xa.len() && j < xb.len() {
        let x = xa[i].min(xb[j]);
        while i < xa.len() && xa[i] <= x {
            i += 1;
        }
        while j < xb.len() && xb[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let scale = ((na + nb) / (na * nb)).sqrt();
    Ok(KsResult {
        stat: d,
        n: xa.len().min(xb.len()),
        critical_1pct: KS_C_1PCT * scale,
        critical_5pct: KS_C_5PCT * scale,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    /// Standard error of the slope.
    pub slope_se: f64,
}

/// Ordinary least squares of `y` on `x`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LineFit> {
    if xs.len() != ys.len() {
        return Err(Error::Argument(format!("length mismatch {} vs {}", xs.len(), ys.len())));
    }
    if xs.len() < 3 {
        return Err(Error::Argument(format!("a slope fit needs at least 3 points, got {}", xs.len())));
    }
    check_finite(xs, "linear_fit x")?;
    check_finite(ys, "linear_fit y")?;
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Argument("all abscissae coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let r2 = if syy == 0.0 { 1.0 } else { (1.0 - sse / syy).clamp(0.0, 1.0) };
    let slope_se = (sse / (n - 2.0) / sxx).sqrt();
    Ok(LineFit { slope, intercept, r2, slope_se })
}

/// Least squares on `(ln x, ln y)`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Result<LineFit> {
    if let Some(bad) = xs.iter().chain(ys).find(|v| !(**v > 0.0)) {
        return Err(Error::Range(format!("log-log fit needs positive data, got {bad}")));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    linear_fit(&lx, &ly)
}

pub fn mean(xs: &[f64]) -> f64 {
    sorted(xs).iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let v = sorted(xs);
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Standard error of the mean.
pub fn mean_se(xs: &[f64]) -> f64 {
    (variance(xs) / xs.len() as f64).sqrt()
}

/// Sample Pearson correlation.
pub fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len().min(ys.len());
    let mut pairs: Vec<(f64, f64)> = xs.iter().copied().zip(ys.iter().copied()).take(n).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let nf = n as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / nf;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in &pairs {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    sxy / (sxx * syy).sqrt()
}

/// Mean of `x_i y_i` with its standard error.
pub fn product_mean(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let p: Vec<f64> = xs.iter().zip(ys).map(|(x, y)| x * y).collect();
    (mean(&p), mean_se(&p))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub n: usize,
    /// `values[0]` is the mean, `values[k-1]` the `k`-th central moment.
    pub values: Vec<f64>,
    /// Jackknife 95% half-widths.
    pub ci: Vec<f64>,
    pub skewness: f64,
    pub skewness_ci: f64,
    pub kurtosis: f64,
    pub kurtosis_ci: f64,
}

impl Moments {
    pub fn mean(&self) -> f64 {
        self.values[0]
    }

    pub fn variance(&self) -> f64 {
        self.values.get(1).copied().unwrap_or(0.0)
    }

    /// Standard error (not the 95% half-width) of moment `k`.
    pub fn se(&self, k: usize) -> f64 {
        self.ci[k - 1] / 1.96
    }
}

/// Central moments from power sums of data already centred at `c`.
fn central_from_sums(s: &[f64], n: f64, k_max: usize) -> Vec<f64> {
    // raw moments about c, then binomial shift to the sample mean
    let raw: Vec<f64> = s.iter().map(|v| v / n).collect();
    let m = raw[1];
    let mut out = vec![0.0; k_max + 1];
    out[1] = m;
    for k in 2..=k_max {
        let mut acc = 0.0;
        let mut binom = 1.0;
        for j in 0..=k {
            acc += binom * raw[j] * (-m).powi((k - j) as i32);
            binom = binom * (k - j) as f64 / (j + 1) as f64;
        }
        out[k] = acc;
    }
    out
}

fn shape(c: &[f64]) -> (f64, f64) {
    let var = c.get(2).copied().unwrap_or(0.0);
    if var <= 0.0 {
        return (0.0, 0.0);
    }
    let skew = c.get(3).map(|m3| m3 / var.powf(1.5)).unwrap_or(0.0);
    let kurt = c.get(4).map(|m4| m4 / (var * var)).unwrap_or(0.0);
    (skew, kurt)
}

/// Mean and central moments `2..=k_max` with jackknife 95% half-widths.
pub fn ensemble_moments(samples: &[f64], k_max: usize) -> Result<Moments> {
    check_finite(samples, "ensemble_moments")?;
    if samples.len() < 2 {
        return Err(Error::Data("ensemble_moments needs at least two samples".into()));
    }
    let k_max = k_max.max(2);
    let xs = sorted(samples);
    let n = xs.len() as f64;
    let c = xs.iter().sum::<f64>() / n;
    let centred: Vec<f64> = xs.iter().map(|x| x - c).collect();
    let mut sums = vec![0.0; k_max + 1];
    for x in &centred {
        let mut p = 1.0;
        for s in sums.iter_mut() {
            *s += p;
            p *= x;
        }
    }
    let full = central_from_sums(&sums, n, k_max);
    let (skew, kurt) = shape(&full);
    // leave-one-out estimates from the power sums
    let mut loo_sum = vec![0.0; k_max + 3];
    let mut loo_sq = vec![0.0; k_max + 3];
    let mut reduced = vec![0.0; k_max + 1];
    for x in &centred {
        let mut p = 1.0;
        for (r, s) in reduced.iter_mut().zip(&sums) {
            *r = s - p;
            p *= x;
        }
        let est = central_from_sums(&reduced, n - 1.0, k_max);
        let (sk, ku) = shape(&est);
        let mut vals = est;
        vals[1] += c;
        vals.push(sk);
        vals.push(ku);
        for (i, v) in vals.iter().enumerate().skip(1) {
            loo_sum[i] += v;
            loo_sq[i] += v * v;
        }
    }
    let half_width = |i: usize| {
        let m = loo_sum[i] / n;
        let var = ((n - 1.0) / n) * (loo_sq[i] - n * m * m);
        1.96 * var.max(0.0).sqrt()
    };
    let mut values = vec![c + full[1]];
    let mut ci = vec![half_width(1)];
    for k in 2..=k_max {
        values.push(full[k]);
        ci.push(half_width(k));
    }
    Ok(Moments {
        n: xs.len(),
        values,
        ci,
        skewness: skew,
        skewness_ci: half_width(k_max + 1),
        kurtosis: kurt,
        kurtosis_ci: half_width(k_max + 2),
    })
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn normals(n: usize, seed: u64) -> Vec<f64> {
        let mut r = rng(seed);
        (0..n).map(|_| r.sample(StandardNormal)).collect()
    }

    #[test]
    fn ks_degenerate_cases() {
        let c = vec![0.0; 100];
        assert!(ks_one_sample(&c, normal_cdf).unwrap().stat >= 0.5);
        assert!(ks_one_sample(&[], normal_cdf).is_err());
        let mut bad = normals(100, 1);
        bad[3] = f64::NAN;
        assert!(matches!(ks_one_sample(&bad, normal_cdf), Err(Error::Data(_))));
        let a = normals(500, 2);
        assert_eq!(ks_two_sample(&a, &a).unwrap().stat, 0.0);
        let b: Vec<f64> = a.iter().map(|x| x + 100.0).collect();
        assert_eq!(ks_two_sample(&a, &b).unwrap().stat, 1.0);
    }

    #[test]
    fn ks_two_sample_handles_ties() {
        let a = vec![0.0, 0.0, 1.0, 1.0];
        let b = vec![0.0, 1.0, 1.0, 1.0];
        assert!((ks_two_sample(&a, &b).unwrap().stat - 0.25).abs() < 1e-15);
    }

    #[test]
    fn slope_fits() {
        let x = [1.0, 2.0, 4.0, 8.0];
        let y: Vec<f64> = x.iter().map(|v| v * v).collect();
        let f = loglog_slope(&x, &y).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-14);
        assert!((f.r2 - 1.0).abs() < 1e-14);
        assert!(loglog_slope(&x[..2], &y[..2]).is_err());
        assert!(matches!(loglog_slope(&[1.0, 0.0, 2.0], &[1.0, 1.0, 1.0]), Err(Error::Range(_))));
    }

    #[test]
    fn gaussian_moments() {
        let m = ensemble_moments(&normals(10_000, 3), 4).unwrap();
        assert!((m.variance() - 1.0).abs() < 0.05);
        assert!((m.kurtosis - 3.0).abs() < 0.2);
        assert!(m.ci.iter().all(|c| *c >= 0.0));
    }

    #[test]
    fn constant_has_zero_variance() {
        let m = ensemble_moments(&vec![2.5; 200], 4).unwrap();
        assert_eq!(m.variance(), 0.0);
        assert_eq!(m.mean(), 2.5);
    }

    #[test]
    fn moments_scale_and_permute() {
        let x = normals(1000, 4);
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let (a, b) = (ensemble_moments(&x, 4).unwrap(), ensemble_moments(&y, 4).unwrap());
        for k in 2..=4 {
            assert!((b.values[k - 1] - 2f64.powi(k as i32) * a.values[k - 1]).abs() <= 1e-12 * b.values[k - 1].abs());
        }
        let mut z = x.clone();
        z.reverse();
        assert_eq!(ensemble_moments(&z, 4).unwrap(), a);
    }

    #[test]
    fn jackknife_matches_delta_method_for_mean() {
        let x = normals(4000, 5);
        let m = ensemble_moments(&x, 2).unwrap();
        let se = mean_se(&x);
        assert!((m.ci[0] / 1.96 - se).abs() < 1e-9);
    }
}
