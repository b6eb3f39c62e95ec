use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::correlation::{fou_correlation, fou_sigma};
use super::fgn::{cholesky_with_jitter, cumulate, FgnGenerator, CHOLESKY_MAX};
use super::grid::{GridPath, Model, PathMeta};
use crate::error::{ensure, Error, Result};
use crate::rng::rng;

/// Default burn-in in relaxation times.
pub const DEFAULT_BURN_IN: f64 = 15.0;

/// Default fast-grid resolution, `dt = ε / DEFAULT_STEPS_PER_EPS`.
pub const DEFAULT_STEPS_PER_EPS: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FouMode {
    Langevin,
    ExactCov,
}

impl FouMode {
    pub fn name(self) -> &'static str {
        match self {
            FouMode::Langevin => "langevin",
            FouMode::ExactCov => "exact_cov",
        }
    }
}

/// Stationary fOU `y^ε_t = (σ/ε^H) ∫_{-∞}^t e^{-(t-s)/ε} dB_s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FouConfig {
    pub h: f64,
    pub eps: f64,
    pub sigma: f64,
    pub burn_in: f64,
    pub mode: FouMode,
}

impl FouConfig {
    pub fn new(h: f64, eps: f64) -> Result<Self> {
        ensure(eps > 0.0, || format!("eps must be positive, got {eps}"))?;
        Ok(Self { h, eps, sigma: fou_sigma(h)?, burn_in: DEFAULT_BURN_IN, mode: FouMode::Langevin })
    }

    pub fn exact(mut self) -> Self {
        self.mode = FouMode::ExactCov;
        self
    }
}

enum Engine {
    Langevin { fgn: FgnGenerator, burn: usize },
    Exact { l: DMatrix<f64> },
}

/// fOU sampler with the expensive set-up (embedding spectrum or covariance
/// factor) done once.
pub struct FouSampler {
    pub cfg: FouConfig,
    pub dt: f64,
    /// Grid points on `[0, t1]`.
    pub n: usize,
    engine: Engine,
}

impl FouSampler {
    pub fn new(cfg: FouConfig, t1: f64, dt: f64) -> Result<Self> {
        ensure(t1 > 0.0 && dt > 0.0, || format!("need t1, dt > 0, got t1 = {t1}, dt = {dt}"))?;
        ensure(cfg.burn_in >= 0.0, || "burn_in must be nonnegative".into())?;
        let steps = (t1 / dt).round() as usize;
        ensure(steps >= 1, || "t1 shorter than one step".into())?;
        let engine = match cfg.mode {
            FouMode::Langevin => {
                if dt > cfg.eps / 10.0 * (1.0 + 1e-12) {
                    return Err(Error::Contract(format!(
                        "dt = {dt} does not resolve the fast scale; langevin mode needs dt ≤ eps/10 = {}",
                        cfg.eps / 10.0
                    )));
                }
                let burn = (cfg.burn_in * cfg.eps / dt).ceil() as usize;
                Engine::Langevin { fgn: FgnGenerator::new(cfg.h, burn + steps, dt)?, burn }
            }
            FouMode::ExactCov => {
                let n = steps + 1;
                if n > CHOLESKY_MAX {
                    return Err(Error::Resource(format!("exact_cov mode limited to {CHOLESKY_MAX} points, got {n}")));
                }
                let rho: Vec<f64> =
                    (0..n).map(|k| fou_correlation(cfg.h, k as f64 * dt / cfg.eps)).collect::<Result<_>>()?;
                let cov = DMatrix::from_fn(n, n, |i, j| rho[i.abs_diff(j)]);
                Engine::Exact { l: cholesky_with_jitter(cov)? }
            }
        };
        Ok(Self { cfg, dt, n: steps + 1, engine })
    }

    fn meta(&self, seed: u64) -> PathMeta {
        PathMeta::new(Model::Fou, seed).with_h(self.cfg.h).with_eps(self.cfg.eps).with_mode(self.cfg.mode.name())
    }

    pub fn sample(&self, seed: u64) -> Result<GridPath> {
        Ok(self.sample_with_driver(seed)?.0)
    }

    /// The fOU path on `[0, t1]` and, in langevin mode, the driving fBM on
    /// the same grid with `B_0 = 0`.
    pub fn sample_with_driver(&self, seed: u64) -> Result<(GridPath, Option<GridPath>)> {
        let mut r = rng(seed);
        match &self.engine {
            Engine::Langevin { fgn, burn } => {
                let incr = fgn.sample(&mut r);
                let mut y: f64 = r.sample(StandardNormal);
                let u = self.dt / self.cfg.eps;
                let decay = (-u).exp();
                // exponential integrator with midpoint weight on the increment
                let gain = self.cfg.sigma * self.cfg.eps.powf(-self.cfg.h) * (-0.5 * u).exp();
                let mut values = Vec::with_capacity(self.n);
                for (k, d) in incr.iter().enumerate() {
                    if k >= *burn {
                        values.push(y);
                    }
                    y = decay * y + gain * d;
                }
                values.push(y);
                let drive = cumulate(&incr[*burn..], 0);
                let b = GridPath::scalar(0.0, self.dt, drive, PathMeta::new(Model::Fbm, seed).with_h(self.cfg.h))?;
                Ok((GridPath::scalar(0.0, self.dt, values, self.meta(seed))?, Some(b)))
            }
            Engine::Exact { l } => {
                let z = DVector::from_fn(self.n, |_, _| r.sample::<f64, _>(StandardNormal));
                let values = (l * z).iter().copied().collect();
                Ok((GridPath::scalar(0.0, self.dt, values, self.meta(seed))?, None))
            }
        }
    }
}

/// One fOU path on `[0, t1]`.
pub fn fou_sample(cfg: FouConfig, t1: f64, dt: f64, seed: u64) -> Result<GridPath> {
    FouSampler::new(cfg, t1, dt)?.sample(seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coarse_grid_is_a_contract_error() {
        let cfg = FouConfig::new(0.7, 0.01).unwrap();
        assert!(matches!(fou_sample(cfg, 1.0, 0.005, 1), Err(Error::Contract(_))));
        assert!(fou_sample(cfg, 0.1, 0.001, 1).is_ok());
    }

    #[test]
    fn exact_mode_size_limit() {
        let cfg = FouConfig::new(0.7, 0.01).unwrap().exact();
        assert!(matches!(FouSampler::new(cfg, 10.0, 0.001), Err(Error::Resource(_))));
    }

    #[test]
    fn driver_starts_at_zero_and_matches_grid() {
        let cfg = FouConfig::new(0.8, 0.05).unwrap();
        let (y, b) = FouSampler::new(cfg, 1.0, 0.0025).unwrap().sample_with_driver(4).unwrap();
        let b = b.unwrap();
        assert_eq!(y.len(), b.len());
        assert_eq!(b.values[0], 0.0);
        assert_eq!(y.len(), 401);
    }

    #[test]
    fn reproducible() {
        let cfg = FouConfig::new(0.3, 0.1).unwrap();
        assert_eq!(fou_sample(cfg, 1.0, 0.005, 8).unwrap(), fou_sample(cfg, 1.0, 0.005, 8).unwrap());
    }
}
