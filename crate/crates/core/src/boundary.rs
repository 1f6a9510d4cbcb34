//! `H = L_Z G - p G` and the smooth-fit boundary `(beta_star, z_star)`
//! obtained by minimizing `G / V_1`.

use rayon::prelude::*;
use serde::Serialize;

use crate::distribution::{McSpec, SupremumDistribution};
use crate::error::{Error, Result};
use crate::params::ModelParams;
use crate::quadrature::{jacobi_integral_graded, DEFAULT_NODES};
use crate::regime::{classify, Regime};
use crate::series::{a1_constant, beta_integral, build_series_auto, SeriesSolution};

const H_LEVELS: usize = 12;
const GRID_POINTS: usize = 240;
const GRID_START: f64 = 1e-3;
/// Relative width within which other grid minima of `G / V_1` are reported.
pub const NEAR_MIN_REL: f64 = 1e-4;

#[derive(Debug, Clone, Serialize)]
pub struct BoundarySolution {
    pub params: ModelParams,
    pub beta_star: f64,
    pub z_star: f64,
    pub tangency_gap: f64,
    pub smooth_fit_gap: f64,
    /// `G'(z_star)`, the scale for `smooth_fit_gap`.
    pub g_prime_at_star: f64,
    /// `H(z_star)`, expected to be nonnegative up to MC error.
    pub h_at_star: f64,
    pub ratio_curve: Vec<(f64, f64)>,
    pub value_at_origin: f64,
    /// Other local minima of the ratio within [`NEAR_MIN_REL`] of `beta_star`.
    pub near_minima: Vec<f64>,
    pub z_max: f64,
}

fn check(params: &ModelParams, dist: &SupremumDistribution) -> Result<()> {
    params.validate()?;
    if params.alpha != dist.alpha || params.c != dist.c {
        return Err(Error::Domain(format!(
            "distribution built for (alpha, c) = ({}, {}), not ({}, {})",
            dist.alpha, dist.c, params.alpha, params.c
        )));
    }
    Ok(())
}

/// `H(z)` in the grouping
/// `-p z^p (1-F(z)) + k (p-1) B(p-1, 2-alpha) z^(p-alpha) - p (G(z) - z^p)
///  - k (p-1) int_0^z x^(p-2) (1-F(x)) (z-x)^(1-alpha) dx + k int_0^z x^(p-1) f(x) (z-x)^(1-alpha) dx`
/// with `k = c p / (alpha - 1)`, which keeps the `z^(p-alpha)` growth in closed form.
pub fn h_function(params: &ModelParams, dist: &SupremumDistribution, z: f64) -> Result<f64> {
    h_function_with(params, dist, z, DEFAULT_NODES)
}

pub fn h_function_with(params: &ModelParams, dist: &SupremumDistribution, z: f64, nodes: usize) -> Result<f64> {
    check(params, dist)?;
    if !(z > 0.0 && z.is_finite()) {
        return Err(Error::Domain(format!("z = {z} must be positive")));
    }
    let (alpha, c, p) = (params.alpha, params.c, params.p);
    let k = c * p / (alpha - 1.0);
    let mut breaks: Vec<f64> = dist.grid.iter().copied().filter(|&x| x < z).collect();
    breaks.extend(
        std::iter::successors(Some(2.0 * dist.blend_hi), |x| Some(2.0 * x)).take_while(|&x| x < z),
    );
    let t1 = -p * z.powf(p) * dist.survival(z);
    let t2 = k * (p - 1.0) * beta_integral(p - 1.0, 2.0 - alpha, 1.0)? * z.powf(p - alpha);
    let t3 = -p * (dist.gain(p, z)? - z.powf(p));
    let t4 = -k * (p - 1.0) * jacobi_integral_graded(|x| dist.survival(x), 0.0, z, p - 2.0, 1.0 - alpha, &breaks, nodes, H_LEVELS);
    let t5 = k * jacobi_integral_graded(|x| dist.pdf_scaled(x), 0.0, z, p + alpha - 3.0, 1.0 - alpha, &breaks, nodes, H_LEVELS);
    let h = t1 + t2 + t3 + t4 + t5;
    if h.is_finite() {
        Ok(h)
    } else {
        Err(Error::QuadratureFailure(format!("H({z}) = {h}: terms {t1} {t2} {t3} {t4} {t5}")))
    }
}

/// `3 x` (quadrature error + MC error) of `H(z)`. The quadrature part
/// compares two node counts, the MC part compares the models built from
/// the odd and even halves of the sample.
pub fn h_tolerance(params: &ModelParams, dist: &SupremumDistribution, z: f64) -> Result<f64> {
    let full = h_function(params, dist, z)?;
    let quad = (h_function_with(params, dist, z, 2 * DEFAULT_NODES)? - full).abs();
    let half = dist.samples.len() / 2;
    let spec = McSpec { n_paths: half, ..dist.spec };
    let mc = if spec.validate().is_ok() {
        let odd: Vec<f64> = dist.samples.iter().skip(1).step_by(2).copied().take(half).collect();
        let even: Vec<f64> = dist.samples.iter().step_by(2).copied().take(half).collect();
        let a = SupremumDistribution::from_samples(dist.alpha, dist.c, spec, odd)?;
        let b = SupremumDistribution::from_samples(dist.alpha, dist.c, spec, even)?;
        // halves have twice the variance of the full sample
        (h_function(params, &a, z)? - h_function(params, &b, z)?).abs() / 2.0
    } else {
        0.0
    };
    Ok(3.0 * (quad + mc))
}

fn golden<F: Fn(f64) -> Result<f64>>(f: F, mut a: f64, mut b: f64, tol: f64) -> Result<(f64, f64)> {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - r * (b - a);
    let mut x2 = a + r * (b - a);
    let (mut f1, mut f2) = (f(x1)?, f(x2)?);
    while b - a > tol * (1.0 + a.abs()) {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = f(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = f(x2)?;
        }
    }
    Ok(if f1 <= f2 { (x1, f1) } else { (x2, f2) })
}

/// Tangency point of `beta V_1` and `G` as the minimizer of `G / V_1` on `(0, z_max]`.
pub fn solve_boundary(params: &ModelParams, dist: &SupremumDistribution, series: &SeriesSolution, tol: f64) -> Result<BoundarySolution> {
    check(params, dist)?;
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tol = {tol} must be positive")));
    }
    let report = classify(params)?;
    if report.regime == Regime::NoLargeZStopping {
        return Err(Error::Regime(format!(
            "ell({}, {}) = {:.6} < 0: it is never optimal to stop far from the maximum, no boundary to solve for",
            params.alpha, params.p, report.ell_value
        )));
    }
    match solve_on(params, dist, series, tol) {
        Err(Error::NoBoundaryFound { message, ratio_curve }) if message.contains("right edge") => {
            let wider = build_series_auto(params, 4.0 * series.z_max)?;
            if wider.z_max <= series.z_max {
                return Err(Error::NoBoundaryFound { message, ratio_curve });
            }
            solve_on(params, dist, &wider, tol)
        }
        other => other,
    }
}

fn solve_on(params: &ModelParams, dist: &SupremumDistribution, series: &SeriesSolution, tol: f64) -> Result<BoundarySolution> {
    let p = params.p;
    let a1 = a1_constant(params);
    let z_max = series.z_max;
    let ratio = |z: f64| -> Result<f64> { Ok(dist.gain(p, z)? / (a1 * series.eval_f1(z)?)) };
    let step = (z_max / GRID_START).powf(1.0 / (GRID_POINTS - 1) as f64);
    let zs: Vec<f64> = (0..GRID_POINTS).map(|k| (GRID_START * step.powi(k as i32)).min(z_max)).collect();
    let hs = zs.par_iter().map(|&z| ratio(z)).collect::<Result<Vec<_>>>()?;
    let curve: Vec<(f64, f64)> = zs.iter().copied().zip(hs.iter().copied()).collect();
    let best = (0..hs.len()).fold(0, |b, k| if hs[k] < hs[b] { k } else { b });
    if best == hs.len() - 1 {
        return Err(Error::NoBoundaryFound {
            message: format!("G/V_1 decreases up to the right edge z_max = {z_max}"),
            ratio_curve: curve,
        });
    }
    if best == 0 {
        return Err(Error::NoBoundaryFound {
            message: format!("G/V_1 is smallest at the left edge z = {GRID_START}"),
            ratio_curve: curve,
        });
    }
    let (z_star, beta_star) = golden(ratio, zs[best - 1], zs[best + 1], tol)?;
    if !(beta_star < 1.0) {
        return Err(Error::NoBoundaryFound {
            message: format!("min G/V_1 = {beta_star} is not below 1"),
            ratio_curve: curve,
        });
    }
    // smallest z among the near-ties comes first
    let mut near_minima: Vec<f64> = (1..hs.len() - 1)
        .filter(|&k| k != best && hs[k] <= hs[k - 1] && hs[k] <= hs[k + 1])
        .filter(|&k| (hs[k] - beta_star) <= NEAR_MIN_REL * beta_star)
        .map(|k| zs[k])
        .collect();
    near_minima.sort_by(f64::total_cmp);
    let (z_star, beta_star) = match near_minima.first() {
        Some(&z) if z < z_star => {
            let k = zs.iter().position(|&x| x == z).unwrap();
            let (zz, bb) = golden(ratio, zs[k - 1], zs[k + 1], tol)?;
            near_minima.retain(|&x| x != z);
            near_minima.push(z_star);
            (zz, bb)
        }
        _ => (z_star, beta_star),
    };
    let v1 = a1 * series.eval_f1(z_star)?;
    let v1p = a1 * series.eval_d1(z_star)?;
    let g = dist.gain(p, z_star)?;
    let (g1, _) = dist.gain_derivs(p, z_star)?;
    Ok(BoundarySolution {
        params: *params,
        beta_star,
        z_star,
        tangency_gap: (beta_star * v1 - g).abs(),
        smooth_fit_gap: (beta_star * v1p - g1).abs(),
        g_prime_at_star: g1,
        h_at_star: h_function(params, dist, z_star)?,
        ratio_curve: curve,
        value_at_origin: beta_star * a1,
        near_minima,
        z_max,
    })
}

/// `V(z)`: `beta_star V_1(z)` in the continuation region, `G(z)` beyond `z_star`.
pub fn value_function(solution: &BoundarySolution, series: &SeriesSolution, dist: &SupremumDistribution, z: f64) -> Result<f64> {
    if !(z >= 0.0) {
        return Err(Error::Domain(format!("z = {z} must be nonnegative")));
    }
    if z <= solution.z_star {
        Ok(solution.beta_star * a1_constant(&solution.params) * series.eval_f1(z)?)
    } else {
        dist.gain(solution.params.p, z)
    }
}

/// `T^(p/alpha) beta_star a_1`, the minimal expected loss over the horizon `T`.
pub fn optimal_value(params: &ModelParams, solution: &BoundarySolution) -> f64 {
    params.horizon.powf(params.p / params.alpha) * solution.beta_star * a1_constant(params)
}
