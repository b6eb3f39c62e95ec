//! Step-2 rough paths on a uniform grid: a base path plus one `d×d`
//! second-level block per step, with Chen composition, dyadic Hölder
//! metrics, Young integration and a Davie-type RDE solver.

mod metric;
mod solve;

use std::io::{Read, Write};

use crate::error::{ensure, Error, Result};
use crate::gaussian_paths::GridPath;

pub use metric::{holder_exponent_estimate, holder_seminorm, rough_metric, rough_norm, second_level_seminorm};
pub use solve::{
    rde_solve, young_integrate, FnField, LinearField, VectorField, YoungIntegral, DIVERGENCE_BOUND,
};

const BLOCK_MAGIC: &[u8; 8] = b"RGHBLK01";

#[derive(Debug, Clone, PartialEq)]
pub struct RoughGridPath {
    pub base: GridPath,
    /// Per-step blocks `𝕏_{t_k,t_{k+1}}`, row-major, `(len - 1)·d²` values.
    pub second: Vec<f64>,
    pub alpha_hint: f64,
}

impl RoughGridPath {
    pub fn new(base: GridPath, second: Vec<f64>, alpha_hint: f64) -> Result<Self> {
        ensure(base.len() >= 2, || "a rough path needs at least two grid points".into())?;
        let d = base.dim;
        ensure(second.len() == (base.len() - 1) * d * d, || {
            format!("expected {} second-level values, got {}", (base.len() - 1) * d * d, second.len())
        })?;
        ensure(alpha_hint > 1.0 / 3.0 && alpha_hint < 1.0, || format!("alpha_hint {alpha_hint} outside (1/3, 1)"))?;
        if second.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("second level contains non-finite values".into()));
        }
        Ok(Self { base, second, alpha_hint })
    }

    pub fn dim(&self) -> usize {
        self.base.dim
    }

    pub fn steps(&self) -> usize {
        self.base.len() - 1
    }

    pub fn block(&self, k: usize) -> &[f64] {
        let dd = self.dim() * self.dim();
        &self.second[k * dd..(k + 1) * dd]
    }

    /// `X_{t_i,t_j}`.
    pub fn increment(&self, i: usize, j: usize) -> Vec<f64> {
        self.base.row(j).iter().zip(self.base.row(i)).map(|(b, a)| b - a).collect()
    }

    /// `𝕏_{t_i,t_j}` by folding steps left to right.
    pub fn second_level(&self, i: usize, j: usize) -> Vec<f64> {
        let d = self.dim();
        let mut acc = vec![0.0; d * d];
        let mut inc = vec![0.0; d];
        for k in i..j {
            let dx = self.increment(k, k + 1);
            for (a, b) in acc.iter_mut().zip(self.block(k)) {
                *a += b;
            }
            outer_add(&mut acc, &inc, &dx);
            for (a, b) in inc.iter_mut().zip(&dx) {
                *a += b;
            }
        }
        acc
    }

    /// `𝕏_{t_i,t_j}` by recursive halving; a second bracketing order for
    /// Chen checks.
    pub fn second_level_balanced(&self, i: usize, j: usize) -> Vec<f64> {
        if j <= i {
            return vec![0.0; self.dim() * self.dim()];
        }
        if j == i + 1 {
            return self.block(i).to_vec();
        }
        let u = i + (j - i) / 2;
        let mut left = self.second_level_balanced(i, u);
        let right = self.second_level_balanced(u, j);
        for (a, b) in left.iter_mut().zip(&right) {
            *a += b;
        }
        outer_add(&mut left, &self.increment(i, u), &self.increment(u, j));
        left
    }

    /// Relative Chen residual `‖𝕏_{s,t} − 𝕏_{s,u} − 𝕏_{u,t} − X_{s,u}⊗X_{u,t}‖`
    /// with the long block folded and the short ones halved.
    pub fn chen_residual(&self, s: usize, u: usize, t: usize) -> f64 {
        let mut r = self.second_level(s, t);
        let a = self.second_level_balanced(s, u);
        let b = self.second_level_balanced(u, t);
        for ((x, y), z) in r.iter_mut().zip(&a).zip(&b) {
            *x -= y + z;
        }
        let xs = self.increment(s, u);
        let xt = self.increment(u, t);
        outer_add(&mut r, &xs.iter().map(|v| -v).collect::<Vec<_>>(), &xt);
        norm(&r) / self.scale().max(1.0)
    }

    /// Size of the path: largest increment squared or second-level entry.
    pub fn scale(&self) -> f64 {
        let n = self.base.len();
        let inc = norm(&self.increment(0, n - 1));
        let big = self.second.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        (inc * inc).max(big).max(norm(&self.second_level(0, n - 1)))
    }

    /// Per-step block file: magic, `d`, `n` (steps) and `alpha_hint`, then
    /// the blocks as little-endian `f64`.
    pub fn write_blocks<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(BLOCK_MAGIC)?;
        w.write_all(&(self.dim() as u64).to_le_bytes())?;
        w.write_all(&(self.steps() as u64).to_le_bytes())?;
        w.write_all(&self.alpha_hint.to_le_bytes())?;
        for v in &self.second {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_blocks<R: Read>(base: GridPath, mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != BLOCK_MAGIC {
            return Err(Error::Data("not a rough block file".into()));
        }
        let mut word = [0u8; 8];
        r.read_exact(&mut word)?;
        let d = u64::from_le_bytes(word) as usize;
        r.read_exact(&mut word)?;
        let n = u64::from_le_bytes(word) as usize;
        r.read_exact(&mut word)?;
        let alpha = f64::from_le_bytes(word);
        if d != base.dim || n + 1 != base.len() {
            return Err(Error::Data(format!("block header (d={d}, n={n}) does not match the base path")));
        }
        let mut second = Vec::with_capacity(n * d * d);
        for _ in 0..n * d * d {
            r.read_exact(&mut word)?;
            second.push(f64::from_le_bytes(word));
        }
        Self::new(base, second, alpha)
    }
}

/// `acc += a ⊗ b`.
pub(crate) fn outer_add(acc: &mut [f64], a: &[f64], b: &[f64]) {
    let d = b.len();
    for (i, ai) in a.iter().enumerate() {
        for (j, bj) in b.iter().enumerate() {
            acc[i * d + j] += ai * bj;
        }
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Lift of the piecewise-linear interpolant: `𝕏_{k,k+1} = ½ ΔX ⊗ ΔX`.
pub fn canonical_lift(path: &GridPath, alpha_hint: f64) -> Result<RoughGridPath> {
    let d = path.dim;
    let mut second = Vec::with_capacity(path.len().saturating_sub(1) * d * d);
    for k in 0..path.len().saturating_sub(1) {
        let dx: Vec<f64> = path.row(k + 1).iter().zip(path.row(k)).map(|(b, a)| b - a).collect();
        for i in 0..d {
            for j in 0..d {
                second.push(0.5 * dx[i] * dx[j]);
            }
        }
    }
    RoughGridPath::new(path.clone(), second, alpha_hint)
}

/// Adds `(t - s) A` to the second level, one `dt·A` per step.
pub fn add_drift_area(drive: &RoughGridPath, a: &[f64]) -> Result<RoughGridPath> {
    let d = drive.dim();
    ensure(a.len() == d * d, || format!("area matrix needs {} entries, got {}", d * d, a.len()))?;
    let dt = drive.base.dt;
    let mut out = drive.clone();
    for block in out.second.chunks_exact_mut(d * d) {
        for (b, x) in block.iter_mut().zip(a) {
            *b += dt * x;
        }
    }
    Ok(out)
}

/// Lift of a Brownian grid path with the Itô second level
/// `½ ΔW⊗ΔW − ½ dt I`.
pub fn ito_lift(path: &GridPath, alpha_hint: f64) -> Result<RoughGridPath> {
    let d = path.dim;
    let mut shift = vec![0.0; d * d];
    for i in 0..d {
        shift[i * d + i] = -0.5;
    }
    add_drift_area(&canonical_lift(path, alpha_hint)?, &shift)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian_paths::{Model, PathMeta};

    fn meta() -> PathMeta {
        PathMeta::new(Model::Custom, 0)
    }

    fn parabola(n: usize) -> GridPath {
        let dt = 1.0 / n as f64;
        let values = (0..=n).flat_map(|k| {
            let t = k as f64 * dt;
            [t, t * t]
        });
        GridPath::new(0.0, dt, 2, values.collect(), meta()).unwrap()
    }

    #[test]
    fn one_dimensional_lift_is_half_square() {
        let values: Vec<f64> = (0..200).map(|k| (k as f64 * 0.37).sin() * 2.0).collect();
        let p = GridPath::scalar(0.0, 0.01, values.clone(), meta()).unwrap();
        let x = canonical_lift(&p, 0.5).unwrap();
        let xx = x.second_level(0, 199)[0];
        let inc = values[199] - values[0];
        assert!((xx - 0.5 * inc * inc).abs() < 1e-10 * (0.5 * inc * inc));
    }

    #[test]
    fn iterated_integral_of_parabola() {
        let x = canonical_lift(&parabola(4000), 0.5).unwrap();
        let xx = x.second_level(0, 4000);
        assert!((xx[1] - 2.0 / 3.0).abs() < 1e-6);
        assert!((xx[1] + xx[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn chen_holds_for_both_bracketings() {
        let x = canonical_lift(&parabola(257), 0.5).unwrap();
        for (s, u, t) in [(0, 100, 257), (3, 4, 5), (10, 200, 256)] {
            assert!(x.chen_residual(s, u, t) < 1e-13);
        }
    }

    #[test]
    fn drift_area_telescopes() {
        let x = canonical_lift(&parabola(64), 0.5).unwrap();
        let a = [0.5, 1.0, -1.0, 0.25];
        let y = add_drift_area(&x, &a).unwrap();
        let diff: Vec<f64> = y.second_level(5, 45).iter().zip(x.second_level(5, 45)).map(|(p, q)| p - q).collect();
        for (d, a) in diff.iter().zip(a) {
            assert!((d - 40.0 / 64.0 * a).abs() < 1e-14);
        }
        assert!(y.chen_residual(0, 30, 64) < 1e-14);
        assert_eq!(add_drift_area(&x, &[0.0; 4]).unwrap(), x);
    }

    #[test]
    fn block_file_round_trip() {
        let x = canonical_lift(&parabola(10), 0.6).unwrap();
        let mut buf = Vec::new();
        x.write_blocks(&mut buf).unwrap();
        let back = RoughGridPath::read_blocks(x.base.clone(), buf.as_slice()).unwrap();
        assert_eq!(back, x);
        assert!(RoughGridPath::read_blocks(parabola(11), buf.as_slice()).is_err());
    }

    #[test]
    fn validation() {
        let p = parabola(4);
        assert!(RoughGridPath::new(p.clone(), vec![0.0; 3], 0.5).is_err());
        assert!(RoughGridPath::new(p, vec![0.0; 16], 0.2).is_err());
    }
}
