//! Hölder-type seminorms and the inhomogeneous rough metric, evaluated on
//! dyadic pairs `(t_i, t_{i+2^j})` for every start `i`. This under-estimates
//! the full supremum by at most a bounded factor at `O(n log n)` cost.

use super::{norm, outer_add, RoughGridPath};
use crate::error::{ensure, Error, Result};
use crate::gaussian_paths::GridPath;
use crate::stats::loglog_slope;

fn check_exponent(gamma: f64) -> Result<()> {
    ensure(gamma > 0.0 && gamma < 1.0, || format!("Hölder exponent {gamma} outside (0, 1)"))
}

/// `max |x_t − x_s| / |t − s|^γ` over dyadic pairs.
pub fn holder_seminorm(path: &GridPath, gamma: f64) -> Result<f64> {
    check_exponent(gamma)?;
    let n = path.len();
    let mut best = 0.0f64;
    let mut span = 1;
    while span < n {
        let h = (span as f64 * path.dt).powf(gamma);
        for i in 0..n - span {
            let d: f64 = path.row(i + span).iter().zip(path.row(i)).map(|(b, a)| (b - a) * (b - a)).sum();
            best = best.max(d.sqrt() / h);
        }
        span *= 2;
    }
    Ok(best)
}

/// Regularity exponent from the scaling of root-mean-square increments
/// over dyadic lags (the refinement-slope heuristic). Capped at 1.
pub fn holder_exponent_estimate(path: &GridPath) -> Result<f64> {
    let n = path.len();
    ensure(n >= 17, || format!("need at least 17 points to estimate regularity, got {n}"))?;
    let (mut lags, mut rms) = (Vec::new(), Vec::new());
    let mut span = 1;
    while span * 8 <= n {
        let count = n - span;
        let ms: f64 = (0..count)
            .map(|i| path.row(i + span).iter().zip(path.row(i)).map(|(b, a)| (b - a) * (b - a)).sum::<f64>())
            .sum::<f64>()
            / count as f64;
        lags.push(span as f64 * path.dt);
        rms.push(ms.sqrt());
        span *= 2;
    }
    if rms.iter().all(|&r| r == 0.0) {
        return Ok(1.0);
    }
    if rms.iter().any(|&r| r == 0.0) {
        return Err(Error::Data("path has vanishing increments at some lags only".into()));
    }
    Ok(loglog_slope(&lags, &rms)?.slope.min(1.0))
}

/// Visits every dyadic pair with the composed second-level blocks of each
/// path. `visit(span, i, levels)` reads block `i` of each `levels[p]`.
fn walk_dyadic(paths: &[&RoughGridPath], mut visit: impl FnMut(usize, usize, &[Vec<f64>])) {
    let n = paths[0].steps();
    let d = paths[0].dim();
    let dd = d * d;
    let mut cur: Vec<Vec<f64>> = paths.iter().map(|p| p.second.clone()).collect();
    let mut span = 1;
    loop {
        for i in 0..=n - span {
            visit(span, i, &cur);
        }
        if 2 * span > n {
            break;
        }
        let count = n + 1 - 2 * span;
        for (p, level) in paths.iter().zip(cur.iter_mut()) {
            let mut next = vec![0.0; count * dd];
            for i in 0..count {
                let out = &mut next[i * dd..(i + 1) * dd];
                let (a, b) = (&level[i * dd..(i + 1) * dd], &level[(i + span) * dd..(i + span + 1) * dd]);
                for ((o, x), y) in out.iter_mut().zip(a).zip(b) {
                    *o = x + y;
                }
                outer_add(out, &p.increment(i, i + span), &p.increment(i + span, i + 2 * span));
            }
            *level = next;
        }
        span *= 2;
    }
}

/// Inhomogeneous `α`-Hölder rough distance
/// `sup |X_{s,t} − Y_{s,t}|/|t−s|^α + sup ‖𝕏_{s,t} − 𝕐_{s,t}‖/|t−s|^{2α}`.
pub fn rough_metric(x: &RoughGridPath, y: &RoughGridPath, alpha: f64) -> Result<f64> {
    check_exponent(alpha)?;
    if x.base.len() != y.base.len() || x.dim() != y.dim() || (x.base.dt - y.base.dt).abs() > 1e-12 * x.base.dt {
        return Err(Error::Contract("rough paths live on different grids".into()));
    }
    let dd = x.dim() * x.dim();
    let dt = x.base.dt;
    let (mut first, mut second) = (0.0f64, 0.0f64);
    walk_dyadic(&[x, y], |span, i, lv| {
        let h = span as f64 * dt;
        let dx: Vec<f64> = x.increment(i, i + span).iter().zip(y.increment(i, i + span)).map(|(a, b)| a - b).collect();
        first = first.max(norm(&dx) / h.powf(alpha));
        let dxx: f64 = lv[0][i * dd..(i + 1) * dd]
            .iter()
            .zip(&lv[1][i * dd..(i + 1) * dd])
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        second = second.max(dxx.sqrt() / h.powf(2.0 * alpha));
    });
    Ok(first + second)
}

/// `‖X‖_α = sup |X_{s,t}|/|t−s|^α + sup ‖𝕏_{s,t}‖^{1/2}/|t−s|^α`.
pub fn rough_norm(x: &RoughGridPath, alpha: f64) -> Result<f64> {
    check_exponent(alpha)?;
    let dd = x.dim() * x.dim();
    let dt = x.base.dt;
    let (mut first, mut second) = (0.0f64, 0.0f64);
    walk_dyadic(&[x], |span, i, lv| {
        let h = (span as f64 * dt).powf(alpha);
        first = first.max(norm(&x.increment(i, i + span)) / h);
        second = second.max(norm(&lv[0][i * dd..(i + 1) * dd]).sqrt() / h);
    });
    Ok(first + second)
}

/// `‖𝕏‖_{2α} = sup ‖𝕏_{s,t}‖/|t−s|^{2α}`.
pub fn second_level_seminorm(x: &RoughGridPath, alpha: f64) -> Result<f64> {
    check_exponent(alpha)?;
    let dd = x.dim() * x.dim();
    let dt = x.base.dt;
    let mut best = 0.0f64;
    walk_dyadic(&[x], |span, i, lv| {
        best = best.max(norm(&lv[0][i * dd..(i + 1) * dd]) / (span as f64 * dt).powf(2.0 * alpha));
    });
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian_paths::{Model, PathMeta};
    use crate::rough::canonical_lift;

    fn line(n: usize, f: impl Fn(f64) -> f64) -> GridPath {
        let dt = 1.0 / n as f64;
        GridPath::scalar(0.0, dt, (0..=n).map(|k| f(k as f64 * dt)).collect(), PathMeta::new(Model::Custom, 0))
            .unwrap()
    }

    #[test]
    fn linear_and_constant_paths() {
        let v = holder_seminorm(&line(64, |t| t), 0.5).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
        assert_eq!(holder_seminorm(&line(64, |_| 3.0), 0.5).unwrap(), 0.0);
        assert!(holder_seminorm(&line(8, |t| t), 1.0).is_err());
    }

    #[test]
    fn smooth_paths_have_unit_exponent() {
        assert!((holder_exponent_estimate(&line(256, |t| 2.0 * t)).unwrap() - 1.0).abs() < 1e-9);
        assert_eq!(holder_exponent_estimate(&line(256, |_| 1.0)).unwrap(), 1.0);
    }

    #[test]
    fn metric_vanishes_on_diagonal_and_matches_full_span() {
        let x = canonical_lift(&line(32, |t| (3.0 * t).sin()), 0.5).unwrap();
        assert_eq!(rough_metric(&x, &x, 0.4).unwrap(), 0.0);
        // the full-span second level equals the folded one
        let mut top = 0.0f64;
        walk_dyadic(&[&x], |span, i, lv| {
            if span == 32 {
                top = lv[0][i];
            }
        });
        assert!((top - x.second_level(0, 32)[0]).abs() < 1e-14);
    }

    #[test]
    fn norm_and_metric_to_zero_path() {
        let x = canonical_lift(&line(64, |t| t * t), 0.45).unwrap();
        let zero = canonical_lift(&line(64, |_| 0.0), 0.45).unwrap();
        let r = rough_metric(&x, &zero, 0.45).unwrap();
        let nx = rough_norm(&x, 0.45).unwrap();
        assert!(r <= nx + nx * nx + 1e-12);
        assert!(second_level_seminorm(&x, 0.45).unwrap() > 0.0);
    }

    #[test]
    fn grid_mismatch_is_a_contract_error() {
        let x = canonical_lift(&line(16, |t| t), 0.5).unwrap();
        let y = canonical_lift(&line(32, |t| t), 0.5).unwrap();
        assert!(matches!(rough_metric(&x, &y, 0.4), Err(Error::Contract(_))));
    }
}
