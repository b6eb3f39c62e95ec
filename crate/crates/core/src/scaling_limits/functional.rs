use crate::chaos::ChaosExpansion;
use crate::error::{Error, Result};
use crate::gaussian_paths::{GridPath, Model, PathMeta};
use crate::rough::{canonical_lift, RoughGridPath};

/// `α ∫_0^{t_k} G(y_s) ds` by the trapezoid rule on the grid of `y`.
pub fn functional_values(g: &ChaosExpansion, y: &[f64], dt: f64, alpha: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(y.len());
    let mut acc = 0.0;
    let mut prev = g.eval(y[0]);
    out.push(0.0);
    for &v in &y[1..] {
        let cur = g.eval(v);
        acc += 0.5 * dt * (prev + cur);
        prev = cur;
        out.push(alpha * acc);
    }
    out
}

/// `X_t = α ∫_0^t G(y^ε_s) ds` for a scalar fOU path `y`.
pub fn path_functional(g: &ChaosExpansion, y: &GridPath, alpha: f64) -> Result<GridPath> {
    if y.meta.model != Model::Fou {
        return Err(Error::Contract(format!("path functionals take fOU paths, got {:?}", y.meta.model)));
    }
    if y.dim != 1 {
        return Err(Error::Contract(format!("expected a scalar fOU path, got dimension {}", y.dim)));
    }
    let mut meta = PathMeta::new(Model::Custom, y.meta.seed).with_mode(format!("functional {}", g.source));
    meta.h = y.meta.h;
    meta.eps = y.meta.eps;
    GridPath::scalar(y.t0, y.dt, functional_values(g, &y.values, y.dt, alpha), meta)
}

/// Per-step blocks `∫_{t_k}^{t_{k+1}} (X^i_s − X^i_{t_k}) dX^j_s` of the
/// piecewise-linear interpolants, `½ ΔX^i ΔX^j`.
pub fn lift_functional(xi: &GridPath, xj: &GridPath) -> Result<Vec<f64>> {
    if xi.len() != xj.len() || xi.dim != 1 || xj.dim != 1 || (xi.dt - xj.dt).abs() > 1e-12 * xi.dt {
        return Err(Error::Contract("lift components live on different grids".into()));
    }
    Ok(xi.values.windows(2).zip(xj.values.windows(2)).map(|(a, b)| 0.5 * (a[1] - a[0]) * (b[1] - b[0])).collect())
}

/// `𝕏^{i,j}_{0,T}` of two scalar grid paths, composed from per-step blocks.
pub fn iterated_integral(xi: &[f64], xj: &[f64]) -> f64 {
    let mut acc = 0.0;
    for k in 0..xi.len().min(xj.len()).saturating_sub(1) {
        let (di, dj) = (xi[k + 1] - xi[k], xj[k + 1] - xj[k]);
        acc += (xi[k] - xi[0]) * dj + 0.5 * di * dj;
    }
    acc
}

/// Stacks scalar functionals into one path in `ℝ^d` and lifts it.
pub fn functional_lift(paths: &[GridPath], alpha_hint: f64) -> Result<RoughGridPath> {
    let first = paths.first().ok_or_else(|| Error::Argument("no components given".into()))?;
    let d = paths.len();
    for p in paths {
        if p.len() != first.len() || p.dim != 1 || (p.dt - first.dt).abs() > 1e-12 * first.dt {
            return Err(Error::Contract("lift components live on different grids".into()));
        }
    }
    let mut values = Vec::with_capacity(first.len() * d);
    for k in 0..first.len() {
        values.extend(paths.iter().map(|p| p.values[k]));
    }
    let base = GridPath::new(first.t0, first.dt, d, values, first.meta.clone())?;
    canonical_lift(&base, alpha_hint)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian_paths::{FouConfig, FouSampler};

    fn fou(seed: u64) -> GridPath {
        FouSampler::new(FouConfig::new(0.7, 0.05).unwrap(), 1.0, 0.005).unwrap().sample(seed).unwrap()
    }

    #[test]
    fn zero_observable_gives_zero_path() {
        let x = path_functional(&ChaosExpansion::zero(), &fou(1), 3.0).unwrap();
        assert!(x.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn requires_fou_input() {
        let mut y = fou(1);
        y.meta.model = Model::Fbm;
        assert!(matches!(path_functional(&ChaosExpansion::hermite(1), &y, 1.0), Err(Error::Contract(_))));
    }

    #[test]
    fn one_dimensional_area_is_half_square() {
        let x = path_functional(&ChaosExpansion::hermite(2), &fou(2), 2.0).unwrap();
        let xx = iterated_integral(&x.values, &x.values);
        let end = *x.values.last().unwrap();
        assert!((xx - 0.5 * end * end).abs() < 1e-10 * (0.5 * end * end).max(1e-300));
    }

    #[test]
    fn integration_by_parts() {
        let y = fou(3);
        let a = path_functional(&ChaosExpansion::hermite(1), &y, 1.0).unwrap();
        let b = path_functional(&ChaosExpansion::hermite(3), &y, 1.0).unwrap();
        let ab = iterated_integral(&a.values, &b.values);
        let ba = iterated_integral(&b.values, &a.values);
        let prod = a.values.last().unwrap() * b.values.last().unwrap();
        assert!((ab + ba - prod).abs() < 1e-10 * prod.abs().max(1.0));
        let lift = functional_lift(&[a.clone(), b.clone()], 0.45).unwrap();
        assert!((lift.second_level(0, a.len() - 1)[1] - ab).abs() < 1e-10 * ab.abs().max(1.0));
        assert_eq!(lift_functional(&a, &b).unwrap().len(), a.len() - 1);
    }
}
