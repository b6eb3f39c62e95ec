use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::grid::{GridPath, Model, PathMeta};
use crate::error::{ensure, Error, Result};
use crate::rng::{rng, PathRng};

/// Largest `n` for which the Cholesky fallback is attempted.
pub const CHOLESKY_MAX: usize = 4096;

/// Relative eigenvalue tolerance for the circulant embedding.
pub const EMBEDDING_TOL: f64 = 1e-10;

/// Autocovariance of fractional Gaussian noise with step `dt`.
pub fn fgn_autocov(h: f64, k: usize, dt: f64) -> f64 {
    let k = k as f64;
    let e = 2.0 * h;
    let second = if k == 0.0 { 2.0 } else { (k + 1.0).powf(e) + (k - 1.0).powf(e) - 2.0 * k.powf(e) };
    0.5 * dt.powf(e) * second
}

/// Lower Cholesky factor of the `n × n` Toeplitz covariance of fGn.
pub fn fgn_cholesky_factor(h: f64, n: usize, dt: f64) -> Result<DMatrix<f64>> {
    if n > CHOLESKY_MAX {
        return Err(Error::Resource(format!("Cholesky fallback limited to n ≤ {CHOLESKY_MAX}, got {n}")));
    }
    let gamma: Vec<f64> = (0..n).map(|k| fgn_autocov(h, k, dt)).collect();
    let cov = DMatrix::from_fn(n, n, |i, j| gamma[i.abs_diff(j)]);
    cholesky_with_jitter(cov)
}

/// Cholesky factor, retrying once with a `1e-12 · max diag` jitter.
pub fn cholesky_with_jitter(cov: DMatrix<f64>) -> Result<DMatrix<f64>> {
    if let Some(c) = cov.clone().cholesky() {
        return Ok(c.l());
    }
    let n = cov.nrows();
    let scale = (0..n).map(|i| cov[(i, i)]).fold(0.0, f64::max);
    let jittered = cov + DMatrix::identity(n, n) * (1e-12 * scale);
    jittered
        .cholesky()
        .map(|c| c.l())
        .ok_or_else(|| Error::Numeric("covariance matrix not positive definite after 1e-12 jitter".into()))
}

#[derive(Clone)]
enum Method {
    Circulant { sqrt_eig: Vec<f64>, fft: Arc<dyn Fft<f64>> },
    Cholesky { l: DMatrix<f64> },
}

/// Reusable fGn sampler: the embedding spectrum (or Cholesky factor) and
/// FFT plan are computed once and shared across an ensemble.
#[derive(Clone)]
pub struct FgnGenerator {
    pub h: f64,
    pub n: usize,
    pub dt: f64,
    method: Method,
}

impl std::fmt::Debug for FgnGenerator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FgnGenerator")
            .field("h", &self.h)
            .field("n", &self.n)
            .field("dt", &self.dt)
            .field("method", &self.method_name())
            .finish()
    }
}

impl FgnGenerator {
    pub fn new(h: f64, n: usize, dt: f64) -> Result<Self> {
        ensure(h > 0.0 && h < 1.0, || format!("H = {h} outside (0, 1)"))?;
        ensure(n >= 2, || format!("need n ≥ 2 increments, got {n}"))?;
        ensure(dt > 0.0 && dt.is_finite(), || format!("dt must be positive, got {dt}"))?;
        match Self::circulant(h, n, dt) {
            Some(method) => Ok(Self { h, n, dt, method }),
            None => Self::with_cholesky(h, n, dt),
        }
    }

    /// Forces the Cholesky method (exact, `O(n^2)` per sample).
    pub fn with_cholesky(h: f64, n: usize, dt: f64) -> Result<Self> {
        let l = fgn_cholesky_factor(h, n, dt)?;
        Ok(Self { h, n, dt, method: Method::Cholesky { l } })
    }

    fn circulant(h: f64, n: usize, dt: f64) -> Option<Method> {
        let m = (2 * n).next_power_of_two();
        let half = m / 2;
        let mut c: Vec<Complex64> = (0..m)
            .map(|j| {
                let k = if j <= half { j } else { m - j };
                Complex64::new(fgn_autocov(h, k, dt), 0.0)
            })
            .collect();
        let fft = FftPlanner::new().plan_fft_forward(m);
        fft.process(&mut c);
        let max = c.iter().map(|z| z.re).fold(0.0, f64::max);
        if c.iter().any(|z| z.re < -EMBEDDING_TOL * max) {
            return None;
        }
        let sqrt_eig = c.iter().map(|z| (z.re.max(0.0) / m as f64).sqrt()).collect();
        Some(Method::Circulant { sqrt_eig, fft })
    }

    pub fn method_name(&self) -> &'static str {
        match self.method {
            Method::Circulant { .. } => "circulant",
            Method::Cholesky { .. } => "cholesky",
        }
    }

    /// One draw of `n` increments.
    pub fn sample(&self, rng: &mut PathRng) -> Vec<f64> {
        match &self.method {
            Method::Circulant { sqrt_eig, fft } => {
                // Re and Im of the transform are independent draws with the
                // target covariance; only the real part is used.
                let mut z: Vec<Complex64> = sqrt_eig
                    .iter()
                    .map(|s| {
                        let a: f64 = rng.sample(StandardNormal);
                        let b: f64 = rng.sample(StandardNormal);
                        Complex64::new(s * a, s * b)
                    })
                    .collect();
                fft.process(&mut z);
                z[..self.n].iter().map(|c| c.re).collect()
            }
            Method::Cholesky { l } => {
                let z = DVector::from_fn(self.n, |_, _| rng.sample::<f64, _>(StandardNormal));
                (l * z).iter().copied().collect()
            }
        }
    }
}

/// `n` increments of fBM with Hurst index `h` on step `dt`.
pub fn fgn_sample(h: f64, n: usize, dt: f64, seed: u64) -> Result<Vec<f64>> {
    Ok(FgnGenerator::new(h, n, dt)?.sample(&mut rng(seed)))
}

/// Cumulates increments into a path on `[t0, t0 + n dt]` anchored so the
/// value at grid index `anchor` is zero.
pub fn cumulate(incr: &[f64], anchor: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(incr.len() + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for d in incr {
        acc += d;
        out.push(acc);
    }
    let shift = out[anchor];
    if shift != 0.0 {
        for v in out.iter_mut() {
            *v -= shift;
        }
    }
    out
}

fn anchor_index(t0: f64, dt: f64, n: usize, anchored_at_t0: bool) -> Result<usize> {
    if anchored_at_t0 {
        return Ok(0);
    }
    let x = -t0 / dt;
    let k = x.round();
    if t0 > 0.0 || k > n as f64 || (x - k).abs() > 1e-9 {
        return Err(Error::Contract(format!(
            "grid starting at {t0} with step {dt} does not contain t = 0; pass anchored_at_t0 to pin B_t0 = 0"
        )));
    }
    Ok(k as usize)
}

/// Two-sided fBM on `[t0, t1]` with `B_0 = 0`. With `anchored_at_t0` the
/// convention is `B_{t0} = 0` instead and the grid need not contain 0.
pub fn fbm_sample(h: f64, t0: f64, t1: f64, dt: f64, seed: u64, anchored_at_t0: bool) -> Result<GridPath> {
    let gen = fbm_generator(h, t0, t1, dt)?;
    fbm_sample_with(&gen, t0, seed, anchored_at_t0)
}

pub fn fbm_generator(h: f64, t0: f64, t1: f64, dt: f64) -> Result<FgnGenerator> {
    ensure(t1 > t0, || format!("empty interval [{t0}, {t1}]"))?;
    ensure(dt > 0.0, || format!("dt must be positive, got {dt}"))?;
    let n = ((t1 - t0) / dt).round() as usize;
    FgnGenerator::new(h, n.max(2), dt)
}

/// fBM path from a prepared generator; see [`fbm_sample`].
pub fn fbm_sample_with(gen: &FgnGenerator, t0: f64, seed: u64, anchored_at_t0: bool) -> Result<GridPath> {
    let anchor = anchor_index(t0, gen.dt, gen.n, anchored_at_t0)?;
    let incr = gen.sample(&mut rng(seed));
    let values = cumulate(&incr, anchor);
    let meta = PathMeta::new(Model::Fbm, seed).with_h(gen.h).with_mode(gen.method_name());
    GridPath::scalar(t0, gen.dt, values, meta)
}
