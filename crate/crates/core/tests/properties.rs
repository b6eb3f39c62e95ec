use std::io::{BufReader, Cursor};

use homog_core::chaos::hermite_eval;
use homog_core::config::ExperimentConfig;
use homog_core::gaussian_paths::{GridPath, Model, PathMeta};
use homog_core::rough::canonical_lift;
use homog_core::stats::{ensemble_moments, ks_one_sample, ks_two_sample, loglog_slope, normal_cdf};
use proptest::prelude::*;

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}

fn path_from(dim: usize, values: Vec<f64>) -> GridPath {
    GridPath::new(0.0, 0.01, dim, values, PathMeta::new(Model::Fbm, 3).with_h(0.6)).unwrap()
}

proptest! {
    #[test]
    fn hermite_rotation_identity(theta in 0.0..std::f64::consts::TAU, x in -4.0..4.0f64, y in -4.0..4.0f64, n in 0usize..=10) {
        let (a, b) = (theta.cos(), theta.sin());
        let lhs = hermite_eval(n as i32, a * x + b * y).unwrap();
        let (mut rhs, mut size) = (0.0, 0.0);
        for k in 0..=n {
            let term = binomial(n, k) * a.powi(k as i32) * b.powi((n - k) as i32)
                * hermite_eval(k as i32, x).unwrap() * hermite_eval((n - k) as i32, y).unwrap();
            rhs += term;
            size += term.abs();
        }
        prop_assert!((lhs - rhs).abs() <= 1e-10 * size.max(1.0));
    }

    #[test]
    fn grid_path_round_trips(dim in 1usize..4, rows in 2usize..40, seed in any::<u64>()) {
        let values: Vec<f64> = (0..dim * rows).map(|i| ((i as u64).wrapping_mul(seed | 1) % 1000) as f64 / 7.0 - 50.0).collect();
        let p = path_from(dim, values);
        let mut bin = Vec::new();
        p.write_binary(&mut bin).unwrap();
        prop_assert_eq!(&GridPath::read_binary(Cursor::new(bin)).unwrap(), &p);
        let mut csv = Vec::new();
        p.write_csv(&mut csv).unwrap();
        let back = GridPath::read_csv(BufReader::new(Cursor::new(csv)), p.meta.clone()).unwrap();
        prop_assert_eq!(back.dim, p.dim);
        for (a, b) in back.values.iter().zip(&p.values) {
            prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }

    #[test]
    fn chen_relation(steps in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 3..60), cut in 0.0..1.0f64, left in 0.0..1.0f64) {
        let mut values = vec![0.0, 0.0];
        for (k, (a, b)) in steps.iter().enumerate() {
            values.push(values[2 * k] + a);
            values.push(values[2 * k + 1] + b);
        }
        let x = canonical_lift(&path_from(2, values), 0.45).unwrap();
        let n = steps.len();
        let t = n;
        let s = ((left * n as f64) as usize).min(n - 1);
        let u = s + ((cut * (t - s) as f64) as usize);
        prop_assert!(x.chen_residual(s, u, t) < 1e-12);
        // 1-d projection: symmetric part of the second level is half the square
        let xx = x.second_level(s, t);
        let inc = x.increment(s, t);
        prop_assert!((xx[0] - 0.5 * inc[0] * inc[0]).abs() < 1e-12 * steps.len() as f64);
        prop_assert!((xx[1] + xx[2] - inc[0] * inc[1]).abs() < 1e-12 * steps.len() as f64);
    }

    #[test]
    fn estimators_ignore_order(mut xs in prop::collection::vec(-10.0..10.0f64, 100..300), rot in 0usize..100) {
        let m1 = ensemble_moments(&xs, 4).unwrap();
        let k1 = ks_one_sample(&xs, normal_cdf).unwrap();
        let half = xs.len() / 2;
        let k2 = ks_two_sample(&xs[..half], &xs[half..]).unwrap();
        let len = xs.len();
        xs.rotate_left(rot % len);
        xs.reverse();
        let m2 = ensemble_moments(&xs, 4).unwrap();
        prop_assert_eq!(m1, m2);
        prop_assert_eq!(k1, ks_one_sample(&xs, normal_cdf).unwrap());
        let mut a = xs.clone();
        let b = a.split_off(half);
        // two-sample statistic is symmetric in its arguments
        prop_assert_eq!(ks_two_sample(&a, &b).unwrap().stat, ks_two_sample(&b, &a).unwrap().stat);
        prop_assert!(k2.stat >= 0.0 && k2.stat <= 1.0);
    }

    #[test]
    fn power_laws_fit_exactly(c in 0.1..10.0f64, slope in -2.0..2.0f64) {
        let xs = [0.1f64, 0.2, 0.4, 0.8, 1.6];
        let ys: Vec<f64> = xs.iter().map(|x| c * x.powf(slope)).collect();
        let fit = loglog_slope(&xs, &ys).unwrap();
        prop_assert!((fit.slope - slope).abs() < 1e-10);
        prop_assert!((fit.intercept - c.ln()).abs() < 1e-10);
    }

    #[test]
    fn overrides_set_values(h in 0.55..0.74f64, paths in 10usize..5000) {
        let base = "h = 0.7\nx0 = [0.0]\n[[component]]\nfield = \"tanh\"\ng = \"H2\"\n";
        let cfg = ExperimentConfig::parse_with_overrides(base, &[format!("h={h}"), format!("paths={paths}")]).unwrap();
        prop_assert_eq!(cfg.h, h);
        prop_assert_eq!(cfg.paths, paths);
    }
}
