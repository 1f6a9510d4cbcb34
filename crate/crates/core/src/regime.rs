//! The sign function `ell(alpha, p)` that decides whether stopping is ever
//! optimal far from the maximum, its zero curve `p_star(alpha)` and the
//! breakdown index `alpha_star`.

use std::sync::OnceLock;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::params::ModelParams;
use crate::quadrature::gauss_legendre;
use crate::special::{digamma, GammaValue};

/// Scan points used before bisection.
pub const SCAN_POINTS: usize = 64;
/// `|ell|` below this is reported as critical.
pub const CRITICAL_BAND: f64 = 1e-10;
/// Tolerance behind the cached [`alpha_star_cached`].
pub const ALPHA_STAR_TOL: f64 = 1e-9;

const NEAR_ONE: f64 = 0.05;
const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Regime {
    BoundaryExists,
    NoLargeZStopping,
    Critical,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::BoundaryExists => "BOUNDARY_EXISTS",
            Regime::NoLargeZStopping => "NO_LARGE_Z_STOPPING",
            Regime::Critical => "CRITICAL",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RegimeReport {
    pub params: ModelParams,
    pub ell_value: f64,
    pub regime: Regime,
    pub p_star: Option<f64>,
    pub alpha_star: f64,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 1.0 && alpha < 2.0) {
        return Err(Error::Domain(format!("alpha = {alpha} must lie in (1, 2)")));
    }
    Ok(())
}

/// `g(p) = Gamma(p - alpha) - Gamma(p) Gamma(1 - alpha)`, whose sign is that of `ell`.
/// Close to `p = 1` the two products nearly cancel, so there `g` is
/// `Gamma(1 - alpha) Gamma(p) expm1(int_0^(p-1) psi(1 - alpha + t) - psi(1 + t) dt)`.
fn g(alpha: f64, p: f64) -> Result<f64> {
    let d = p - 1.0;
    if d > 0.0 && d < NEAR_ONE.min(0.5 * (alpha - 1.0)) {
        let rule = gauss_legendre(16);
        let mut diff = 0.0;
        for (t, w) in rule.nodes.iter().zip(&rule.weights) {
            let x = 0.5 * d * (1.0 + t);
            diff += w * (digamma(1.0 - alpha + x)? - digamma(1.0 + x)?);
        }
        let front = GammaValue::of(1.0 - alpha)?.times(GammaValue::of(p)?);
        return Ok(front.value() * (0.5 * d * diff).exp_m1());
    }
    let a = GammaValue::of(p - alpha)?.value();
    let b = GammaValue::of(p)?.times(GammaValue::of(1.0 - alpha)?).value();
    Ok(a - b)
}

/// `ell(alpha, p, c) = c p / Gamma(p - alpha + 1) (Gamma(p - alpha) - Gamma(p) Gamma(1 - alpha))`.
/// Defined for `p` in `[1, alpha)`.
pub fn ell(alpha: f64, p: f64, c: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if !(p >= 1.0 && p < alpha) || !(c > 0.0) {
        return Err(Error::Domain(format!("need 1 <= p < alpha and c > 0 (p = {p}, c = {c})")));
    }
    if p == 1.0 {
        return Ok(0.0);
    }
    let front = GammaValue::of(p - alpha + 1.0)?;
    Ok(c * p * front.sign * (-front.log_abs).exp() * g(alpha, p)?)
}

/// Every sign change of `g` on the scan grid over `(1 + tol, alpha - tol)`.
fn brackets(alpha: f64, tol: f64) -> Result<Vec<(f64, f64)>> {
    let (lo, hi) = (1.0 + tol, alpha - tol);
    if lo >= hi {
        return Ok(Vec::new());
    }
    let grid: Vec<f64> = (0..SCAN_POINTS).map(|k| lo + (hi - lo) * k as f64 / (SCAN_POINTS - 1) as f64).collect();
    let vals = grid.iter().map(|&p| g(alpha, p)).collect::<Result<Vec<_>>>()?;
    Ok((1..SCAN_POINTS)
        .filter(|&k| vals[k - 1].signum() != vals[k].signum())
        .map(|k| (grid[k - 1], grid[k]))
        .collect())
}

fn bisect<F: Fn(f64) -> Result<f64>>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64> {
    let mut flo = f(lo)?;
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let fm = f(mid)?;
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Zero of `ell(alpha, .)` in `(1, alpha)`, or `None` when `g` keeps its sign.
/// More than one sign change on the scan grid is reported as an error.
pub fn p_star(alpha: f64, tol: f64) -> Result<Option<f64>> {
    check_alpha(alpha)?;
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tol = {tol} must be positive")));
    }
    let found = brackets(alpha, tol)?;
    match found.as_slice() {
        [] => Ok(None),
        [(lo, hi)] => bisect(|p| g(alpha, p), *lo, *hi, tol).map(Some),
        many => Err(Error::ConvergenceFailure(format!(
            "{} sign changes of ell in p at alpha = {alpha}, first brackets {:?}",
            many.len(),
            &many[..many.len().min(3)]
        ))),
    }
}

/// Root of `psi(1 - alpha) = -gamma_E`, where `d ell / dp` at `p = 1` changes sign.
pub fn alpha_star_derivative(tol: f64) -> Result<f64> {
    bisect(|a| Ok(digamma(1.0 - a)? + EULER_GAMMA), 1.05, 1.95, tol)
}

/// Infimum of the `alpha` for which [`p_star`] exists, by bisection on existence.
pub fn alpha_star_existence(tol: f64) -> Result<f64> {
    let exists = |a: f64| p_star(a, tol).map(|r| r.is_some());
    let (mut lo, mut hi) = (1.05, 1.95);
    if exists(lo)? || !exists(hi)? {
        return Err(Error::ConvergenceFailure("existence of p_star does not switch on (1.05, 1.95)".into()));
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if exists(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Breakdown index `alpha_star`, cross-checked between the existence and
/// derivative characterizations.
pub fn alpha_star(tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tol = {tol} must be positive")));
    }
    let by_derivative = alpha_star_derivative(tol)?;
    let by_existence = alpha_star_existence(tol)?;
    if (by_derivative - by_existence).abs() > 10.0 * tol {
        return Err(Error::ConvergenceFailure(format!(
            "alpha_star characterizations disagree: {by_derivative} vs {by_existence}"
        )));
    }
    Ok(by_derivative)
}

/// [`alpha_star`] at [`ALPHA_STAR_TOL`], computed once.
pub fn alpha_star_cached() -> Result<f64> {
    static CACHE: OnceLock<std::result::Result<f64, String>> = OnceLock::new();
    CACHE
        .get_or_init(|| alpha_star(ALPHA_STAR_TOL).map_err(|e| e.to_string()))
        .clone()
        .map_err(Error::ConvergenceFailure)
}

pub fn classify(params: &ModelParams) -> Result<RegimeReport> {
    params.validate()?;
    let ell_value = ell(params.alpha, params.p, params.c)?;
    let regime = if ell_value.abs() < CRITICAL_BAND {
        Regime::Critical
    } else if ell_value > 0.0 {
        Regime::BoundaryExists
    } else {
        Regime::NoLargeZStopping
    };
    let alpha_star = alpha_star_cached()?;
    let p_star = if params.alpha > alpha_star { p_star(params.alpha, 1e-12)? } else { None };
    Ok(RegimeReport { params: *params, ell_value, regime, p_star, alpha_star })
}

/// `(alpha, p_star(alpha))` on `n` equally spaced `alpha` in `(alpha_star, 2)`.
pub fn frontier(n: usize) -> Result<Vec<(f64, f64)>> {
    let a0 = alpha_star_cached()?;
    let mut out = Vec::with_capacity(n);
    for k in 1..=n {
        let alpha = a0 + (2.0 - a0) * k as f64 / (n + 1) as f64;
        if let Some(p) = p_star(alpha, 1e-12)? {
            out.push((alpha, p));
        }
    }
    Ok(out)
}
