//! Fixtures shared by the benchmarks.

use homog_core::gaussian_paths::{fbm_sample, GridPath};
use homog_core::rough::{canonical_lift, RoughGridPath};

/// Two-dimensional fBM path on `[0, 1]` with its canonical lift.
pub fn lifted_fbm(h: f64, dt: f64, seed: u64) -> RoughGridPath {
    let a = fbm_sample(h, 0.0, 1.0, dt, seed, true).expect("fbm sample");
    let b = fbm_sample(h, 0.0, 1.0, dt, seed + 1, true).expect("fbm sample");
    let values = a.values.iter().zip(&b.values).flat_map(|(x, y)| [*x, *y]).collect();
    let path = GridPath::new(0.0, dt, 2, values, a.meta.clone()).expect("grid path");
    canonical_lift(&path, h - 0.05).expect("lift")
}
