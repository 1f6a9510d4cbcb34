#![allow(dead_code)]

use std::path::PathBuf;

use supstop_core::distribution::{load_or_estimate, McSpec, SupremumDistribution};
use supstop_core::ModelParams;

/// Shared across test binaries so each default-size distribution is simulated once.
pub fn cache_dir() -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("sup-cache");
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

pub fn params(alpha: f64, c: f64, p: f64) -> ModelParams {
    ModelParams::unit(alpha, c, p).unwrap()
}

pub fn default_dist(params: &ModelParams) -> SupremumDistribution {
    dist_with(params, McSpec::default())
}

pub fn dist_with(params: &ModelParams, spec: McSpec) -> SupremumDistribution {
    load_or_estimate(params, &spec, Some(&cache_dir())).unwrap()
}

pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}
