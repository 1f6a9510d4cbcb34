//! Spectrally positive stable process: characteristic exponent, exact
//! increment sampling and grid paths with their running supremum.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use rand::{RngCore, SeedableRng};
use rand_distr::{Distribution, Exp1};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::params::ModelParams;

/// `psi(lambda) = c Gamma(-alpha) (-i lambda)^alpha` on the principal
/// branch, so that `E exp(i lambda X_t) = exp(t psi(lambda))`.
pub fn char_exponent(params: &ModelParams, lambda: f64) -> Complex64 {
    if lambda == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let arg = -FRAC_PI_2 * lambda.signum() * params.alpha;
    Complex64::from_polar(params.scale_const() * lambda.abs().powf(params.alpha), arg)
}

/// Scale `sigma` of the standard totally skewed law `S_alpha(sigma, 1, 0)`
/// that `X_1` follows.
pub fn stable_scale(params: &ModelParams) -> f64 {
    (-params.scale_const() * (PI * params.alpha / 2.0).cos()).powf(1.0 / params.alpha)
}

/// Independent stream for path `index` under `seed`. Streams do not overlap,
/// so results never depend on how paths are split across threads.
pub fn path_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Uniform on the open interval (0, 1).
#[inline]
pub fn open01<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Chambers-Mallows-Stuck sampler for `X_dt` with all constants hoisted.
#[derive(Debug, Clone, Copy)]
pub struct StableSampler {
    pub alpha: f64,
    pub sigma: f64,
    alpha_b: f64,
    s_factor: f64,
    inv_alpha: f64,
}

impl StableSampler {
    pub fn new(params: &ModelParams) -> Self {
        let alpha = params.alpha;
        let t = (PI * alpha / 2.0).tan();
        StableSampler {
            alpha,
            sigma: stable_scale(params),
            alpha_b: t.atan(),
            s_factor: (1.0 + t * t).powf(0.5 / alpha),
            inv_alpha: 1.0 / alpha,
        }
    }

    /// One draw of `S_alpha(1, 1, 0)`.
    #[inline]
    pub fn standard<R: RngCore + ?Sized>(&self, rng: &mut R) -> f64 {
        let v = PI * (open01(rng) - 0.5);
        let w: f64 = Exp1.sample(rng);
        let a = self.alpha * v + self.alpha_b;
        // (cos(v - a) / w)^((1 - alpha)/alpha) / cos(v)^(1/alpha), one log
        let cva = (v - a).cos();
        let q = cva / (w * v.cos());
        self.s_factor * a.sin() * (w / cva) * (self.inv_alpha * q.ln()).exp()
    }

    /// Increment multiplier `sigma dt^(1/alpha)`.
    pub fn step_scale(&self, dt: f64) -> f64 {
        self.sigma * dt.powf(self.inv_alpha)
    }

    /// One draw of `X_dt`.
    pub fn increment<R: RngCore + ?Sized>(&self, dt: f64, rng: &mut R) -> f64 {
        self.step_scale(dt) * self.standard(rng)
    }
}

/// Draw of `X_dt` for the given parameters.
pub fn sample_increment<R: RngCore + ?Sized>(params: &ModelParams, dt: f64, rng: &mut R) -> f64 {
    StableSampler::new(params).increment(dt, rng)
}

/// Values of `X` and its running maximum on a uniform grid over `[0, T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSample {
    pub times: Vec<f64>,
    pub x: Vec<f64>,
    pub s: Vec<f64>,
    pub seed: u64,
}

impl PathSample {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Drawdown `S - X` at each grid point.
    pub fn drawdown(&self) -> Vec<f64> {
        self.s.iter().zip(&self.x).map(|(s, x)| s - x).collect()
    }
}

/// Uniform grid of `n_steps + 1` points on `[0, T]`. `seed` is recorded
/// only; the randomness comes from `rng`.
pub fn simulate_path<R: RngCore + ?Sized>(params: &ModelParams, n_steps: usize, seed: u64, rng: &mut R) -> PathSample {
    assert!(n_steps >= 1, "n_steps must be positive");
    let sampler = StableSampler::new(params);
    let dt = params.horizon / n_steps as f64;
    let scale = sampler.step_scale(dt);
    let mut times = Vec::with_capacity(n_steps + 1);
    let mut x = Vec::with_capacity(n_steps + 1);
    let mut s = Vec::with_capacity(n_steps + 1);
    times.push(0.0);
    x.push(0.0);
    s.push(0.0);
    let (mut xi, mut si) = (0.0f64, 0.0f64);
    for i in 1..=n_steps {
        xi += scale * sampler.standard(rng);
        si = si.max(xi);
        times.push(if i == n_steps { params.horizon } else { i as f64 * dt });
        x.push(xi);
        s.push(si);
    }
    PathSample { times, x, s, seed }
}

/// Grid supremum and terminal value of one path, without storing it.
/// `sups[k]` receives the maximum over the sub-grid of every `2^k`-th point,
/// which gives coarser discretizations of the same path for free.
pub fn simulate_sup<R: RngCore + ?Sized>(sampler: &StableSampler, scale: f64, n_steps: usize, sups: &mut [f64], rng: &mut R) -> f64 {
    sups.iter_mut().for_each(|v| *v = 0.0);
    let mut x = 0.0f64;
    for i in 1..=n_steps {
        x += scale * sampler.standard(rng);
        let mut stride = 1usize;
        for sup in sups.iter_mut() {
            if i % stride != 0 {
                break;
            }
            if x > *sup {
                *sup = x;
            }
            stride <<= 1;
        }
    }
    x
}

/// `t(s) = 1 - exp(-alpha s)`.
pub fn time_change(alpha: f64, s: f64) -> f64 {
    -(-alpha * s).exp_m1()
}

/// Inverse of [`time_change`]; defined for `t` in `[0, 1)`.
pub fn inverse_time_change(alpha: f64, t: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&t) {
        return Err(Error::Domain(format!("time {t} outside [0, 1)")));
    }
    Ok(-(-t).ln_1p() / alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::gamma;

    #[test]
    fn exponent_at_zero_and_unit_scale() {
        let alpha = 1.5;
        let c = 1.0 / gamma(-alpha).unwrap();
        let params = ModelParams::unit(alpha, c, 1.2).unwrap();
        assert_eq!(char_exponent(&params, 0.0), Complex64::new(0.0, 0.0));
        let z = char_exponent(&params, 1.0);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((z.re + h).abs() < 1e-14 && (z.im + h).abs() < 1e-14, "{z}");
    }

    #[test]
    fn exponent_real_part_negative() {
        let params = ModelParams::unit(1.3, 1.0, 1.1).unwrap();
        for l in [-2.0, -0.1, 0.1, 2.0] {
            assert!(char_exponent(&params, l).re < 0.0);
        }
    }

    #[test]
    fn time_change_examples() {
        assert_eq!(time_change(1.5, 0.0), 0.0);
        assert!((time_change(2.0, 2f64.ln() / 2.0) - 0.5).abs() < 1e-15);
        let back = inverse_time_change(1.6, time_change(1.6, 0.7)).unwrap();
        assert!((back - 0.7).abs() < 1e-12);
        assert!(inverse_time_change(1.6, 1.0).is_err());
    }

    #[test]
    fn single_step_path() {
        let params = ModelParams::new(1.7, 1.0, 1.3, 2.0).unwrap();
        let path = simulate_path(&params, 1, 5, &mut path_rng(5, 0));
        assert_eq!(path.times, vec![0.0, 2.0]);
        assert_eq!(path.x[0], 0.0);
        assert_eq!(path.s[1], path.x[1].max(0.0));
    }

    #[test]
    fn paths_are_reproducible() {
        let params = ModelParams::unit(1.6, 1.0, 1.2).unwrap();
        let a = simulate_path(&params, 200, 9, &mut path_rng(9, 3));
        let b = simulate_path(&params, 200, 9, &mut path_rng(9, 3));
        let other = simulate_path(&params, 200, 9, &mut path_rng(9, 4));
        assert_eq!(a, b);
        assert_ne!(a.x, other.x);
    }

    #[test]
    fn streaming_sup_matches_stored_path() {
        let params = ModelParams::unit(1.6, 1.0, 1.2).unwrap();
        let sampler = StableSampler::new(&params);
        let n = 64;
        let path = simulate_path(&params, n, 1, &mut path_rng(1, 0));
        let mut sups = [0.0; 3];
        let last = simulate_sup(&sampler, sampler.step_scale(1.0 / n as f64), n, &mut sups, &mut path_rng(1, 0));
        assert_eq!(last, path.x[n]);
        assert_eq!(sups[0], path.s[n]);
        let coarse = (0..=n).step_by(4).map(|i| path.x[i]).fold(0.0, f64::max);
        assert_eq!(sups[2], coarse);
    }
}
