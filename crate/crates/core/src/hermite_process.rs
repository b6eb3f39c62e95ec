//! Hermite processes `Z^{H,m}` (fBM for `m = 1`, Rosenblatt for `m = 2`)
//! as discretized multiple Wiener–Itô integrals
//! `Z_t = K ∫_{ℝ^m} ∫_0^t Π_j (s - u_j)_+^{ĥ-3/2} ds dW_{u_1}…dW_{u_m}`.
//!
//! The Wiener integrator lives on a grid of cells: uniform cells of width
//! `u_dt` on `[-near, t1]` and geometrically growing cells further in the
//! past out to the horizon `-trunc`. With cell-averaged kernels
//! `x_i(s) = κ_i(s) ΔW_i`, the off-diagonal sum over distinct index tuples
//! equals `m! e_m(x(s))`, the elementary symmetric polynomial, which is
//! assembled from power sums by Newton's identities. Near-field power sums
//! are FFT convolutions, so a path costs `O(n log n)` instead of `O(n^m)`.

use std::collections::HashMap;
use std::sync::{Arc, OnceLock, RwLock};

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta;

use crate::ensemble::par_paths;
use crate::error::{ensure, Error, Result};
use crate::gaussian_paths::{GridPath, Model, PathMeta};
use crate::quadrature::tanh_sinh;
use crate::rng::{rng, PathRng};
use crate::stats::pearson;

/// Truncated variance fraction the default horizon is sized for. Kernels
/// decay like `|u|^{ĥ-3/2}`, so for `ĥ` near 1 a horizon of a few dozen
/// time units drops a sizeable part of the variance.
pub const TARGET_TRUNCATION: f64 = 1e-3;

/// Shortest default horizon.
pub const MIN_TRUNC: f64 = 1e3;

/// Default depth of the uniform near field below 0.
pub const DEFAULT_NEAR: f64 = 2.0;

/// Growth ratio of far-field cells.
pub const FAR_RATIO: f64 = 1.05;

/// Largest admissible truncated variance fraction.
pub const MAX_TRUNCATION: f64 = 0.01;

/// Largest number of Wiener cells a sampler may allocate.
pub const MAX_CELLS: usize = 1 << 22;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HermiteSpec {
    pub m: usize,
    /// Self-similarity exponent of the output process.
    pub h: f64,
    /// `ĥ = 1 + (H - 1)/m`.
    pub hhat: f64,
    /// Normalizer; zero until calibrated.
    pub k: f64,
    /// Past horizon `M`.
    pub trunc: f64,
    /// Wiener grid step.
    pub u_dt: f64,
    /// Depth of the uniform near field.
    pub near: f64,
}

impl HermiteSpec {
    pub fn new(m: usize, h: f64, u_dt: f64) -> Result<Self> {
        ensure((1..=3).contains(&m), || format!("direct simulation supports m ∈ {{1, 2, 3}}, got {m}"))?;
        ensure(h > 0.5 && h < 1.0, || format!("Hermite processes need H in (1/2, 1), got {h}"))?;
        ensure(u_dt > 0.0 && u_dt <= 0.1, || format!("u_dt must lie in (0, 0.1], got {u_dt}"))?;
        let hhat = 1.0 + (h - 1.0) / m as f64;
        let mut s = Self { m, h, hhat, k: 0.0, trunc: 1.0, u_dt, near: DEFAULT_NEAR };
        s.trunc = horizon_for(&s, TARGET_TRUNCATION).max(MIN_TRUNC);
        Ok(s)
    }

    /// Spec with `K` calibrated to `Var(Z_1) = 1`.
    pub fn calibrated(m: usize, h: f64, u_dt: f64) -> Result<Self> {
        let mut s = Self::new(m, h, u_dt)?;
        s.k = calibrate_k(&s)?;
        Ok(s)
    }

    /// The limit of rank-`m` functionals of fOU with Hurst index `h_fou`
    /// is `Z^{H*(m), m}`.
    pub fn for_fou_rank(h_fou: f64, m: usize, u_dt: f64) -> Result<Self> {
        Self::calibrated(m, m as f64 * (h_fou - 1.0) + 1.0, u_dt)
    }

    pub fn with_trunc(mut self, trunc: f64) -> Self {
        self.trunc = trunc;
        self.k = 0.0;
        self
    }

    pub fn with_near(mut self, near: f64) -> Self {
        self.near = near;
        self.k = 0.0;
        self
    }

    /// Kernel exponent `ĥ - 3/2 ∈ (-1, -1/2)`.
    pub fn a(&self) -> f64 {
        self.hhat - 1.5
    }
}

/// `∫_0^t Π_j (s - u_j)_+^{ĥ-3/2} ds` by tanh-sinh, which absorbs the
/// integrable singularity at `s = max_j u_j`.
pub fn hermite_kernel(spec: &HermiteSpec, t: f64, u: &[f64]) -> Result<f64> {
    ensure(t > 0.0, || format!("t must be positive, got {t}"))?;
    ensure(u.len() == spec.m, || format!("need {} arguments, got {}", spec.m, u.len()))?;
    let a = spec.a();
    let top = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if top >= t {
        return Ok(0.0);
    }
    let ties = u.iter().filter(|&&x| x == top).count();
    if top >= 0.0 && ties as f64 * a <= -1.0 {
        return Err(Error::Range(format!("kernel is infinite: {ties} coincident arguments at {top}")));
    }
    let lo = top.max(0.0);
    let r = tanh_sinh(
        |s, da, _| {
            u.iter()
                .map(|&uj| {
                    let d = if uj == top && lo == top { da } else { s - uj };
                    d.powf(a)
                })
                .product()
        },
        lo,
        t,
        1e-10,
    )?;
    Ok(r.value)
}

/// Beta constant `B(ĥ - 1/2, 2 - 2ĥ) = ∫ (1+v)^a v^a dv` of the kernel.
fn kernel_beta(spec: &HermiteSpec) -> f64 {
    beta(spec.hhat - 0.5, 2.0 - 2.0 * spec.hhat)
}

/// Fraction of `Var(Z_1)` carried by Wiener cells beyond `-trunc`
/// (leading order in `1/trunc`).
pub fn truncation_error(spec: &HermiteSpec) -> f64 {
    let a = spec.a();
    let q = 2.0 * a + 1.0;
    let c_out = spec.trunc.powf(q) / q.abs();
    let dbl = |p: f64| 2.0 / ((p + 1.0) * (p + 2.0));
    let m = spec.m as f64;
    m * c_out * dbl((m - 1.0) * q) / (kernel_beta(spec) * dbl(m * q))
}

/// Horizon whose truncated variance fraction is `target`.
pub fn horizon_for(spec: &HermiteSpec, target: f64) -> f64 {
    let q = 2.0 * spec.a() + 1.0;
    let unit = truncation_error(&HermiteSpec { trunc: 1.0, ..*spec });
    (target / unit).powf(1.0 / q)
}

/// Cell layout of the Wiener integrator.
#[derive(Debug, Clone)]
pub struct WienerGrid {
    pub u_dt: f64,
    /// Uniform cells below 0.
    pub lc: usize,
    /// Uniform cells on `[0, t1]`.
    pub n_t: usize,
    /// Far cells `[lo, lo + w]`, innermost first.
    pub far_lo: Vec<f64>,
    pub far_w: Vec<f64>,
}

impl WienerGrid {
    pub fn new(u_dt: f64, near: f64, trunc: f64, t1: f64) -> Result<Self> {
        ensure(near >= u_dt, || format!("near field depth {near} shorter than one cell"))?;
        ensure(trunc > near, || format!("horizon {trunc} inside the near field {near}"))?;
        let lc = (near / u_dt).round() as usize;
        let n_t = (t1 / u_dt).round() as usize;
        ensure(n_t >= 1, || format!("t1 = {t1} shorter than one cell"))?;
        let edge = -(lc as f64) * u_dt;
        let (mut far_lo, mut far_w) = (Vec::new(), Vec::new());
        let mut hi = edge;
        let mut w = u_dt * FAR_RATIO;
        while -hi < trunc {
            let width = w.min(trunc + hi);
            far_lo.push(hi - width);
            far_w.push(width);
            hi -= width;
            w *= FAR_RATIO;
        }
        if lc + n_t + far_w.len() > MAX_CELLS {
            return Err(Error::Resource(format!(
                "{} Wiener cells exceed the limit {MAX_CELLS}; coarsen u_dt or shorten t1",
                lc + n_t + far_w.len()
            )));
        }
        Ok(Self { u_dt, lc, n_t, far_lo, far_w })
    }

    pub fn near_len(&self) -> usize {
        self.lc + self.n_t
    }

    /// Far increments (outermost drawn first) followed by the near
    /// increments in time order, so grids differing only in `t1` share a
    /// prefix of the stream.
    pub fn draw(&self, r: &mut PathRng) -> WienerDraw {
        let mut far = vec![0.0; self.far_w.len()];
        for (i, w) in self.far_w.iter().enumerate().rev() {
            far[i] = w.sqrt() * r.sample::<f64, _>(StandardNormal);
        }
        let sd = self.u_dt.sqrt();
        let near = (0..self.near_len()).map(|_| sd * r.sample::<f64, _>(StandardNormal)).collect();
        WienerDraw { far, near }
    }
}

#[derive(Debug, Clone)]
pub struct WienerDraw {
    pub far: Vec<f64>,
    pub near: Vec<f64>,
}

/// Cell average of `w ↦ w^a` over `[max(l-1/2, 0), l+1/2] u_dt`.
fn near_kernel(a: f64, u_dt: f64, l: usize) -> f64 {
    let hi = l as f64 + 0.5;
    let b = a + 1.0;
    let v = if l == 0 {
        hi.powf(b)
    } else {
        let lo = l as f64 - 0.5;
        lo.powf(b) * (b * (1.0 / lo).ln_1p()).exp_m1()
    };
    u_dt.powf(a) * v / b
}

/// Cell average of `u ↦ (s - u)^a` over the far cell `[lo, lo + w]`.
fn far_kernel(a: f64, s: f64, lo: f64, w: f64) -> f64 {
    let b = a + 1.0;
    let d = s - (lo + w);
    d.powf(b) * (b * (w / d).ln_1p()).exp_m1() / (b * w)
}

/// Elementary symmetric polynomial `e_m` from power sums `p[0..m]`.
fn elementary(m: usize, p: &[f64]) -> f64 {
    match m {
        1 => p[0],
        2 => 0.5 * (p[0] * p[0] - p[1]),
        3 => (p[0] * p[0] * p[0] - 3.0 * p[0] * p[1] + 2.0 * p[2]) / 6.0,
        _ => unreachable!("rank checked at construction"),
    }
}

/// Exact variance of the discretized `Z_1` with `K = 1`:
/// `(m!)² u_dt² Σ_{j,j'} e_m(P(j,j'))`, `P_r(j,j') = Σ_i (κ_i(s_j) κ_i(s_j') w_i)^r`.
pub fn discrete_unit_variance(spec: &HermiteSpec) -> Result<f64> {
    let grid = WienerGrid::new(spec.u_dt, spec.near, spec.trunc, 1.0)?;
    let (a, m, d) = (spec.a(), spec.m, spec.u_dt);
    let n = grid.n_t;
    let lc = grid.lc;
    let kap: Vec<f64> = (0..n + lc).map(|l| near_kernel(a, d, l)).collect();
    // far part: Gram matrices of A_r[j, f] = (κ_f(s_j) √w_f)^r
    let nf = grid.far_w.len();
    let base = DMatrix::from_fn(n, nf, |j, f| {
        far_kernel(a, (j as f64 + 0.5) * d, grid.far_lo[f], grid.far_w[f]) * grid.far_w[f].sqrt()
    });
    let mut far = Vec::with_capacity(m);
    for r in 1..=m {
        let ar = base.map(|x| x.powi(r as i32));
        far.push(&ar * ar.transpose());
    }
    let mut total = 0.0;
    let mut p = [0.0f64; 3];
    let mut acc = [0.0f64; 3];
    for lag in 0..n {
        acc.iter_mut().for_each(|x| *x = 0.0);
        let weight = if lag == 0 { 1.0 } else { 2.0 };
        for l in 0..(n - lag + lc) {
            let prod = kap[l] * kap[l + lag] * d;
            let mut pw = prod;
            for slot in acc.iter_mut().take(m) {
                *slot += pw;
                pw *= prod;
            }
            if l >= lc {
                let j = l - lc;
                for r in 0..m {
                    p[r] = acc[r] + far[r][(j, j + lag)];
                }
                total += weight * elementary(m, &p);
            }
        }
    }
    let fact = (1..=m).product::<usize>() as f64;
    Ok(total * d * d * fact * fact)
}

type CacheKey = (usize, u64, u64, u64, u64);

fn k_cache() -> &'static RwLock<HashMap<CacheKey, f64>> {
    static CACHE: OnceLock<RwLock<HashMap<CacheKey, f64>>> = OnceLock::new();
    CACHE.get_or_init(|| RwLock::new(HashMap::new()))
}

/// File name of the persisted calibration cache inside a cache directory.
pub const CACHE_FILE: &str = "hermite_k_v2.json";

#[derive(Serialize, Deserialize)]
struct CacheEntry {
    m: usize,
    /// `f64::to_bits` of `H`, `trunc`, `u_dt` and `near`, so keys survive
    /// the round trip exactly.
    bits: [u64; 4],
    h: f64,
    k: f64,
}

/// Merges the calibration cache stored in `dir` into memory; returns the
/// number of entries read. A missing file reads as empty.
pub fn load_calibration_cache(dir: &std::path::Path) -> Result<usize> {
    let path = dir.join(CACHE_FILE);
    let text = match std::fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(0),
        Err(e) => return Err(e.into()),
    };
    let entries: Vec<CacheEntry> = serde_json::from_str(&text)
        .map_err(|e| Error::Data(format!("calibration cache {}: {e}", path.display())))?;
    let mut c = k_cache().write().map_err(|_| Error::Contract("calibration cache lock poisoned".into()))?;
    for e in &entries {
        c.insert((e.m, e.bits[0], e.bits[1], e.bits[2], e.bits[3]), e.k);
    }
    Ok(entries.len())
}

/// Writes every calibrated `K` to `dir`, creating it if needed.
pub fn save_calibration_cache(dir: &std::path::Path) -> Result<usize> {
    std::fs::create_dir_all(dir)?;
    let c = k_cache().read().map_err(|_| Error::Contract("calibration cache lock poisoned".into()))?;
    let mut entries: Vec<CacheEntry> = c
        .iter()
        .map(|(&(m, h, t, u, n), &k)| CacheEntry { m, bits: [h, t, u, n], h: f64::from_bits(h), k })
        .collect();
    entries.sort_by_key(|e| (e.m, e.bits));
    let tmp = dir.join(format!("{CACHE_FILE}.tmp"));
    std::fs::write(&tmp, serde_json::to_string_pretty(&entries)?)?;
    std::fs::rename(&tmp, dir.join(CACHE_FILE))?;
    Ok(entries.len())
}

/// `K` with `Var(Z_1) = 1` for the discretized process; cached per
/// `(m, H, trunc, u_dt, near)`.
pub fn calibrate_k(spec: &HermiteSpec) -> Result<f64> {
    let tail = truncation_error(spec);
    if tail > MAX_TRUNCATION {
        return Err(Error::Contract(format!(
            "horizon {} drops {:.2}% of Var(Z_1); enlarge trunc",
            spec.trunc,
            100.0 * tail
        )));
    }
    let key = (spec.m, spec.h.to_bits(), spec.trunc.to_bits(), spec.u_dt.to_bits(), spec.near.to_bits());
    if let Some(k) = k_cache().read().ok().and_then(|c| c.get(&key).copied()) {
        return Ok(k);
    }
    let v = discrete_unit_variance(spec)?;
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::Numeric(format!("discrete variance {v} is not positive")));
    }
    let k = 1.0 / v.sqrt();
    if let Ok(mut c) = k_cache().write() {
        c.insert(key, k);
    }
    Ok(k)
}

/// Far-field power sums `Σ_f (κ_f(s) ΔW_f)^r` at the fine times `s_j`.
/// The far kernels are analytic in `s` away from `-near`, so the sums are
/// evaluated at Chebyshev nodes on `[0, t1]` and interpolated.
struct FarField {
    /// `tables[r][c * nf + f] = κ_f(x_c)^{r+1}`.
    tables: Vec<Vec<f64>>,
    nf: usize,
    /// Interpolation matrix, row-major `n_t × nodes`; empty when the
    /// nodes are the fine times themselves.
    interp: Vec<f64>,
    nodes: usize,
}

impl FarField {
    fn new(grid: &WienerGrid, a: f64, m: usize, t1: f64, near: f64) -> Self {
        let n = grid.n_t;
        let nf = grid.far_w.len();
        // Bernstein ellipse through the branch point at s = -near
        let x = 1.0 + 2.0 * near / t1;
        let rho = x + (x * x - 1.0).sqrt();
        let want = (37.0 / rho.ln()).ceil() as usize + 2;
        let fine: Vec<f64> = (0..n).map(|j| (j as f64 + 0.5) * grid.u_dt).collect();
        let (xs, interp) = if want >= n {
            (fine, Vec::new())
        } else {
            let th: Vec<f64> = (0..want).map(|c| std::f64::consts::PI * (c as f64 + 0.5) / want as f64).collect();
            let xs: Vec<f64> = th.iter().map(|t| 0.5 * t1 * (1.0 - t.cos())).collect();
            let bw: Vec<f64> = th.iter().enumerate().map(|(c, t)| if c % 2 == 0 { t.sin() } else { -t.sin() }).collect();
            let mut interp = vec![0.0; n * want];
            for (j, s) in fine.iter().enumerate() {
                let row = &mut interp[j * want..(j + 1) * want];
                if let Some(c) = xs.iter().position(|x| x == s) {
                    row[c] = 1.0;
                    continue;
                }
                let mut tot = 0.0;
                for c in 0..want {
                    row[c] = bw[c] / (s - xs[c]);
                    tot += row[c];
                }
                row.iter_mut().for_each(|v| *v /= tot);
            }
            (xs, interp)
        };
        let nodes = xs.len();
        let base: Vec<f64> = xs
            .iter()
            .flat_map(|&s| (0..nf).map(move |f| far_kernel(a, s, grid.far_lo[f], grid.far_w[f])))
            .collect();
        let tables = (1..=m).map(|r| base.iter().map(|k| k.powi(r as i32)).collect()).collect();
        Self { tables, nf, interp, nodes }
    }

    fn power_sums(&self, r: usize, far: &[f64]) -> Vec<f64> {
        let pw: Vec<f64> = far.iter().map(|x| x.powi(r as i32 + 1)).collect();
        let at_nodes: Vec<f64> = self.tables[r]
            .chunks_exact(self.nf.max(1))
            .map(|row| row.iter().zip(&pw).map(|(k, x)| k * x).sum())
            .take(self.nodes)
            .collect();
        if self.interp.is_empty() {
            return at_nodes;
        }
        self.interp.chunks_exact(self.nodes).map(|row| row.iter().zip(&at_nodes).map(|(l, v)| l * v).sum()).collect()
    }
}

/// Sampler for one Hermite process on `[0, t1]`; precomputes kernel
/// transforms and the far-field kernel table.
pub struct HermiteSampler {
    pub spec: HermiteSpec,
    pub grid: WienerGrid,
    pub stride: usize,
    nfft: usize,
    kernel_fft: Vec<Vec<Complex64>>,
    far: FarField,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl HermiteSampler {
    /// `dt` must be a multiple of `spec.u_dt`.
    pub fn new(spec: HermiteSpec, t1: f64, dt: f64) -> Result<Self> {
        ensure(spec.k > 0.0, || "spec is not calibrated; use HermiteSpec::calibrated".into())?;
        let ratio = dt / spec.u_dt;
        let stride = ratio.round() as usize;
        ensure(stride >= 1 && (ratio - stride as f64).abs() < 1e-9, || {
            format!("dt = {dt} is not a multiple of u_dt = {}", spec.u_dt)
        })?;
        let grid = WienerGrid::new(spec.u_dt, spec.near, spec.trunc, t1)?;
        ensure(grid.n_t % stride == 0, || format!("t1 = {t1} is not a multiple of dt = {dt}"))?;
        let len = grid.near_len();
        let nfft = (2 * len).next_power_of_two();
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(nfft);
        let inv = planner.plan_fft_inverse(nfft);
        let a = spec.a();
        let mut kernel_fft = Vec::with_capacity(spec.m);
        for r in 1..=spec.m {
            let mut c = vec![Complex64::new(0.0, 0.0); nfft];
            for (l, slot) in c.iter_mut().take(len).enumerate() {
                slot.re = near_kernel(a, spec.u_dt, l).powi(r as i32);
            }
            fwd.process(&mut c);
            kernel_fft.push(c);
        }
        let far = FarField::new(&grid, a, spec.m, t1, spec.near);
        Ok(Self { spec, grid, stride, nfft, kernel_fft, far, fwd, inv })
    }

    pub fn dt(&self) -> f64 {
        self.stride as f64 * self.spec.u_dt
    }

    /// `Z` at the output grid `0, dt, …, t1` from one Wiener draw.
    pub fn path_from(&self, w: &WienerDraw) -> Vec<f64> {
        let (m, n, lc) = (self.spec.m, self.grid.n_t, self.grid.lc);
        let mut sums = vec![vec![0.0; n]; m];
        for r in 0..m {
            let mut b = vec![Complex64::new(0.0, 0.0); self.nfft];
            for (slot, x) in b.iter_mut().zip(&w.near) {
                slot.re = x.powi(r as i32 + 1);
            }
            self.fwd.process(&mut b);
            for (x, k) in b.iter_mut().zip(&self.kernel_fft[r]) {
                *x *= k;
            }
            self.inv.process(&mut b);
            let scale = 1.0 / self.nfft as f64;
            let far = self.far.power_sums(r, &w.far);
            for (j, out) in sums[r].iter_mut().enumerate() {
                *out = b[j + lc].re * scale + far[j];
            }
        }
        let mut z = Vec::with_capacity(n / self.stride + 1);
        z.push(0.0);
        let mut acc = 0.0;
        let mut p = [0.0; 3];
        let step = self.spec.k * (1..=m).product::<usize>() as f64 * self.spec.u_dt;
        for j in 0..n {
            for r in 0..m {
                p[r] = sums[r][j];
            }
            acc += step * elementary(m, &p);
            if (j + 1) % self.stride == 0 {
                z.push(acc);
            }
        }
        z
    }

    pub fn sample(&self, seed: u64) -> Result<GridPath> {
        let draw = self.grid.draw(&mut rng(seed));
        self.to_path(self.path_from(&draw), seed)
    }

    fn to_path(&self, values: Vec<f64>, seed: u64) -> Result<GridPath> {
        let meta = PathMeta::new(Model::Hermite, seed).with_h(self.spec.h).with_mode(format!("m={}", self.spec.m));
        GridPath::scalar(0.0, self.dt(), values, meta)
    }
}

/// Several Hermite processes driven by one Wiener draw. All samplers must
/// share the Wiener grid (same `u_dt`, `near`, `trunc` and `t1`).
pub fn sample_shared(samplers: &[&HermiteSampler], seed: u64) -> Result<Vec<GridPath>> {
    let first = samplers.first().ok_or_else(|| Error::Argument("no samplers given".into()))?;
    for s in samplers {
        ensure(
            s.grid.u_dt == first.grid.u_dt
                && s.grid.lc == first.grid.lc
                && s.grid.n_t == first.grid.n_t
                && s.grid.far_w.len() == first.grid.far_w.len(),
            || "samplers do not share a Wiener grid".into(),
        )?;
    }
    let draw = first.grid.draw(&mut rng(seed));
    samplers.iter().map(|s| s.to_path(s.path_from(&draw), seed)).collect()
}

/// One path of `Z^{H,m}` on `[0, t1]`.
pub fn hermite_sample(spec: &HermiteSpec, t1: f64, dt: f64, seed: u64) -> Result<GridPath> {
    HermiteSampler::new(*spec, t1, dt)?.sample(seed)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RankCorrelation {
    pub m1: usize,
    pub m2: usize,
    pub paths: usize,
    pub corr: f64,
    /// Standard error `1/√n` of a null correlation.
    pub se: f64,
    pub pass: bool,
}

/// Correlation of `Z^{H1,m1}_1` and `Z^{H2,m2}_1` built from one Wiener
/// draw per path: zero across different chaoses, one for identical specs.
pub fn uncorrelated_ranks_check(a: &HermiteSpec, b: &HermiteSpec, paths: usize, seed: u64) -> Result<RankCorrelation> {
    ensure(paths >= 10, || "need at least 10 paths".into())?;
    let dt = a.u_dt.max(b.u_dt);
    let sa = HermiteSampler::new(*a, 1.0, dt)?;
    let sb = HermiteSampler::new(*b, 1.0, dt)?;
    let pairs = par_paths(paths, seed, |_, s| {
        let z = sample_shared(&[&sa, &sb], s)?;
        Ok((*z[0].values.last().unwrap_or(&0.0), *z[1].values.last().unwrap_or(&0.0)))
    })?;
    let (x, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let corr = pearson(&x, &y);
    let se = 1.0 / (paths as f64).sqrt();
    let same = a == b;
    let pass = if same { (corr - 1.0).abs() < 1e-12 } else { corr.abs() <= 4.0 * se };
    Ok(RankCorrelation { m1: a.m, m2: b.m, paths, corr, se, pass })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_validation() {
        assert!(HermiteSpec::new(4, 0.8, 0.01).is_err());
        assert!(HermiteSpec::new(2, 0.4, 0.01).is_err());
        let s = HermiteSpec::new(2, 0.8, 0.01).unwrap();
        assert!((s.hhat - 0.9).abs() < 1e-15);
    }

    #[test]
    fn kernel_support_and_rank_one_closed_form() {
        let s = HermiteSpec::new(1, 0.7, 0.01).unwrap();
        assert_eq!(hermite_kernel(&s, 1.0, &[1.5]).unwrap(), 0.0);
        let u = -40.0f64;
        let b = s.hhat - 0.5;
        let exact = ((1.0 - u).powf(b) - (-u).powf(b)) / b;
        assert!((hermite_kernel(&s, 1.0, &[u]).unwrap() - exact).abs() < 1e-9 * exact.abs());
        let inside = 0.3f64;
        let exact = (1.0 - inside).powf(b) / b;
        assert!((hermite_kernel(&s, 1.0, &[inside]).unwrap() - exact).abs() < 1e-9 * exact);
    }

    #[test]
    fn calibration_cache_round_trip() {
        let spec = HermiteSpec::new(1, 0.7, 0.05).unwrap();
        let k = calibrate_k(&spec).unwrap();
        let dir = std::env::temp_dir().join(format!("homog-k-cache-{}", std::process::id()));
        assert!(save_calibration_cache(&dir).unwrap() >= 1);
        assert!(load_calibration_cache(&dir).unwrap() >= 1);
        assert_eq!(calibrate_k(&spec).unwrap(), k);
        assert_eq!(load_calibration_cache(&dir.join("absent")).unwrap(), 0);
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn coincident_arguments_rejected() {
        let s = HermiteSpec::new(2, 0.8, 0.01).unwrap();
        assert!(matches!(hermite_kernel(&s, 1.0, &[0.2, 0.2]), Err(Error::Range(_))));
        assert!(hermite_kernel(&s, 1.0, &[0.2, 0.1]).unwrap() > 0.0);
    }

    #[test]
    fn elementary_polynomials() {
        let x = [0.3, -1.2, 2.0];
        let p: Vec<f64> = (1..=3).map(|r| x.iter().map(|v: &f64| v.powi(r)).sum()).collect();
        assert!((elementary(1, &p) - 1.1).abs() < 1e-14);
        assert!((elementary(2, &p) - (0.3 * -1.2 + 0.3 * 2.0 + -1.2 * 2.0)).abs() < 1e-14);
        assert!((elementary(3, &p) - 0.3 * -1.2 * 2.0).abs() < 1e-14);
    }

    #[test]
    fn short_horizon_is_a_contract_error() {
        let s = HermiteSpec::new(2, 0.8, 0.01).unwrap().with_trunc(50.0);
        assert!(truncation_error(&s) > 0.3);
        assert!(matches!(calibrate_k(&s), Err(Error::Contract(_))));
    }

    #[test]
    fn far_kernel_matches_point_value_for_thin_cells() {
        let a = -0.6;
        let v = far_kernel(a, 0.5, -100.0, 1e-6);
        assert!((v - 100.5f64.powf(a)).abs() < 1e-7 * v);
    }

    #[test]
    fn default_horizon_meets_target() {
        for (m, h) in [(1, 0.7), (2, 0.8), (3, 0.8), (2, 0.95)] {
            let s = HermiteSpec::new(m, h, 0.01).unwrap();
            let e = truncation_error(&s);
            assert!(e <= TARGET_TRUNCATION * (1.0 + 1e-9), "m={m} H={h}: {e}");
        }
    }

    #[test]
    fn chebyshev_far_field_matches_direct_sum() {
        let grid = WienerGrid::new(0.01, 2.0, 1e8, 3.0).unwrap();
        let far = FarField::new(&grid, -0.55, 2, 3.0, 2.0);
        assert!(far.nodes < grid.n_t);
        let dw: Vec<f64> = grid.far_w.iter().enumerate().map(|(i, w)| w.sqrt() * ((i as f64).sin())).collect();
        for r in 0..2 {
            let got = far.power_sums(r, &dw);
            for j in [0, 17, 150, 299] {
                let s = (j as f64 + 0.5) * 0.01;
                let exact: f64 = (0..dw.len())
                    .map(|f| (far_kernel(-0.55, s, grid.far_lo[f], grid.far_w[f]) * dw[f]).powi(r as i32 + 1))
                    .sum();
                assert!((got[j] - exact).abs() < 1e-11 * (1.0 + exact.abs()), "r={r} j={j}");
            }
        }
    }

    #[test]
    fn sampler_shape_and_determinism() {
        let s = HermiteSpec::calibrated(2, 0.8, 0.01).unwrap();
        let smp = HermiteSampler::new(s, 1.0, 0.02).unwrap();
        let p = smp.sample(3).unwrap();
        assert_eq!(p.len(), 51);
        assert_eq!(p.values[0], 0.0);
        assert_eq!(p, smp.sample(3).unwrap());
        assert!(HermiteSampler::new(s, 1.0, 0.015).is_err());
    }
}
