//! Young integrals and the Davie scheme for `dx = F(x) d𝐗`.

use super::{norm, RoughGridPath};
use crate::error::{ensure, Error, Result};
use crate::gaussian_paths::{GridPath, Model, PathMeta};

use super::metric::holder_exponent_estimate;

/// States beyond this norm count as blow-up.
pub const DIVERGENCE_BOUND: f64 = 1e8;

/// A vector field `F: ℝ^m → L(ℝ^d, ℝ^m)` with its derivative.
pub trait VectorField: Sync {
    fn state_dim(&self) -> usize;
    fn drive_dim(&self) -> usize;
    /// `out[i * d + k] = F^i_k(x)`.
    fn eval(&self, x: &[f64], out: &mut [f64]);
    /// `out[(i * d + k) * m + j] = ∂_j F^i_k(x)`.
    fn jacobian(&self, x: &[f64], out: &mut [f64]);
}

type FieldFn = Box<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

/// Vector field from closures.
pub struct FnField {
    m: usize,
    d: usize,
    f: FieldFn,
    df: FieldFn,
}

impl FnField {
    pub fn new(
        m: usize,
        d: usize,
        f: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
        df: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        Self { m, d, f: Box::new(f), df: Box::new(df) }
    }

    /// Scalar state driven by a scalar path.
    pub fn scalar(f: impl Fn(f64) -> f64 + Send + Sync + 'static, df: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self::new(1, 1, move |x, o| o[0] = f(x[0]), move |x, o| o[0] = df(x[0]))
    }
}

impl VectorField for FnField {
    fn state_dim(&self) -> usize {
        self.m
    }
    fn drive_dim(&self) -> usize {
        self.d
    }
    fn eval(&self, x: &[f64], out: &mut [f64]) {
        (self.f)(x, out)
    }
    fn jacobian(&self, x: &[f64], out: &mut [f64]) {
        (self.df)(x, out)
    }
}

/// `F^i_k(x) = c_k x^i`, whose solutions are `x_0 exp(c·X_t)` for
/// geometric drivers.
#[derive(Debug, Clone)]
pub struct LinearField {
    pub m: usize,
    pub c: Vec<f64>,
}

impl VectorField for LinearField {
    fn state_dim(&self) -> usize {
        self.m
    }
    fn drive_dim(&self) -> usize {
        self.c.len()
    }
    fn eval(&self, x: &[f64], out: &mut [f64]) {
        let d = self.c.len();
        for i in 0..self.m {
            for k in 0..d {
                out[i * d + k] = self.c[k] * x[i];
            }
        }
    }
    fn jacobian(&self, _x: &[f64], out: &mut [f64]) {
        let (m, d) = (self.m, self.c.len());
        out.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..m {
            for k in 0..d {
                out[(i * d + k) * m + i] = self.c[k];
            }
        }
    }
}

/// Davie scheme
/// `x ← x + F(x) X_{k,k+1} + Σ_{k,l} (DF_l · F_k)(x) 𝕏^{k,l}_{k,k+1}`
/// on the drive's grid.
pub fn rde_solve(field: &dyn VectorField, drive: &RoughGridPath, x0: &[f64]) -> Result<GridPath> {
    let (m, d) = (field.state_dim(), field.drive_dim());
    ensure(x0.len() == m, || format!("initial state has {} components, field expects {m}", x0.len()))?;
    ensure(drive.dim() == d, || format!("drive has dimension {}, field expects {d}", drive.dim()))?;
    let n = drive.base.len();
    let mut values = Vec::with_capacity(n * m);
    values.extend_from_slice(x0);
    let mut x = x0.to_vec();
    let mut f = vec![0.0; m * d];
    let mut df = vec![0.0; m * d * m];
    let mut next = vec![0.0; m];
    for k in 0..n - 1 {
        field.eval(&x, &mut f);
        field.jacobian(&x, &mut df);
        let dx = drive.increment(k, k + 1);
        let xx = drive.block(k);
        for i in 0..m {
            let mut v = x[i];
            for a in 0..d {
                v += f[i * d + a] * dx[a];
            }
            for a in 0..d {
                for b in 0..d {
                    let w = xx[a * d + b];
                    if w == 0.0 {
                        continue;
                    }
                    // (DF_b · F_a)^i = Σ_j ∂_j F^i_b F^j_a
                    let mut g = 0.0;
                    for j in 0..m {
                        g += df[(i * d + b) * m + j] * f[j * d + a];
                    }
                    v += g * w;
                }
            }
            next[i] = v;
        }
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("rde state became non-finite at step {}", k + 1)));
        }
        let r = norm(&next);
        if r > DIVERGENCE_BOUND {
            return Err(Error::Divergence { step: k + 1, norm: r, seed: None });
        }
        x.copy_from_slice(&next);
        values.extend_from_slice(&x);
    }
    let meta = PathMeta::new(Model::Custom, drive.base.meta.seed).with_mode("rde");
    GridPath::new(drive.base.t0, drive.base.dt, m, values, meta)
}

#[derive(Debug, Clone)]
pub struct YoungIntegral {
    /// Cumulative left-point sums `∫_0^{t_k} Y dX`.
    pub path: GridPath,
    pub value: f64,
    /// Richardson extrapolation at rate `min(γ_Y + γ_X − 1, 1)`.
    pub extrapolated: f64,
    pub error_estimate: f64,
    pub exponent_sum: f64,
    /// Set when the empirical exponents do not exceed 1 in sum.
    pub warning: Option<String>,
}

fn left_sum(y: &GridPath, x: &GridPath, stride: usize, last: usize) -> f64 {
    let mut s = 0.0;
    let mut k = 0;
    while k + stride <= last {
        let dy: f64 = y.row(k).iter().zip(x.row(k + stride).iter().zip(x.row(k))).map(|(a, (b, c))| a * (b - c)).sum();
        s += dy;
        k += stride;
    }
    s
}

/// `∫ Y dX` (componentwise inner product) by left-point Riemann sums,
/// with a refinement error estimate from strides 1, 2 and 4.
pub fn young_integrate(y: &GridPath, x: &GridPath) -> Result<YoungIntegral> {
    if y.len() != x.len() || y.dim != x.dim || (y.dt - x.dt).abs() > 1e-12 * x.dt {
        return Err(Error::Contract("integrand and integrator live on different grids".into()));
    }
    let n = x.len();
    ensure(n >= 17, || format!("need at least 17 points, got {n}"))?;
    let mut cum = Vec::with_capacity(n);
    let mut acc = 0.0;
    cum.push(0.0);
    for k in 0..n - 1 {
        acc += y.row(k).iter().zip(x.row(k + 1).iter().zip(x.row(k))).map(|(a, (b, c))| a * (b - c)).sum::<f64>();
        cum.push(acc);
    }
    let exponent_sum = holder_exponent_estimate(y)? + holder_exponent_estimate(x)?;
    let warning = (exponent_sum <= 1.0)
        .then(|| format!("empirical exponents sum to {exponent_sum:.3} ≤ 1; Young theory does not apply"));
    let last = (n - 1) / 4 * 4;
    let (i1, i2, i4) = (left_sum(y, x, 1, last), left_sum(y, x, 2, last), left_sum(y, x, 4, last));
    let (d1, d2) = ((i1 - i2).abs(), (i2 - i4).abs());
    let scale = i1.abs().max(1.0);
    if d1 > 2.0 * d2 + 1e-14 * scale && d1 > 1e-12 * scale {
        return Err(Error::Accuracy(format!(
            "Riemann sums do not settle under refinement: |I_1 − I_2| = {d1:e} exceeds |I_2 − I_4| = {d2:e}"
        )));
    }
    let rate = (exponent_sum - 1.0).clamp(0.05, 1.0);
    let factor = 2f64.powf(rate) - 1.0;
    let error_estimate = (i1 - i2).abs() / factor;
    let extrapolated = acc + (i1 - i2) / factor;
    let meta = PathMeta::new(Model::Custom, x.meta.seed).with_mode("young");
    Ok(YoungIntegral {
        path: GridPath::scalar(x.t0, x.dt, cum, meta)?,
        value: acc,
        extrapolated,
        error_estimate,
        exponent_sum,
        warning,
    })
}
