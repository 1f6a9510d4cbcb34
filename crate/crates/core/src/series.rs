//! Power series solution `F_1(z) = sum_n a_n z^(alpha n)` of the master
//! equation `z F' + (c/(alpha-1)) int_0^z F''(x)(z-x)^(1-alpha) dx = p F`,
//! its scale constant `a_1`, `V_1 = a_1 F_1` and the Laplace transform of
//! `V_1`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::params::ModelParams;
use crate::quadrature::{jacobi_integral_graded, legendre};
use crate::special::{ln_gamma, ln_upper_gamma_scaled, GammaValue};

/// Largest intermediate term allowed relative to the sum.
pub const CANCELLATION_LIMIT: f64 = 1e8;
pub const MAX_TERMS: usize = 2000;
/// Default truncation tolerance for the first neglected term.
pub const DEFAULT_TOL: f64 = 1e-16;

#[derive(Debug, Clone, Serialize)]
pub struct SeriesSolution {
    pub params: ModelParams,
    /// `a_n` for `n < n_terms`; may underflow to zero far out, the logs
    /// below are authoritative.
    pub coeffs: Vec<f64>,
    pub log_abs: Vec<f64>,
    pub signs: Vec<f64>,
    pub n_terms: usize,
    pub z_max: f64,
    pub tail_bound: f64,
}

/// `log |a_n|` and sign via the telescoped recurrence.
fn coefficient_logs(params: &ModelParams, count: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let alpha = params.alpha;
    let q = params.p / alpha;
    let ln_k = params.scale_const().ln();
    let mut logs = Vec::with_capacity(count);
    let mut signs = Vec::with_capacity(count);
    let mut acc = 0.0;
    let mut sign = 1.0;
    for n in 0..count {
        logs.push(if n == 0 { 0.0 } else { acc - n as f64 * ln_k - ln_gamma(alpha * n as f64 + 1.0)? });
        signs.push(sign);
        let factor = q - n as f64;
        acc += factor.abs().ln();
        sign *= factor.signum();
    }
    Ok((logs, signs))
}

/// Ratio of the largest term to the sum at `z`, plus the sum itself. The
/// ratio is the worse of the sums for `F_1` and for `z^(2-alpha) F_1''`,
/// since the second derivative loses digits first.
fn cancellation(logs: &[f64], signs: &[f64], alpha: f64, z: f64) -> (f64, f64) {
    let lz = z.ln();
    let mut sum = Neumaier::default();
    let mut sum2 = Neumaier::default();
    let mut max_term: f64 = 1.0;
    let mut max_term2: f64 = 0.0;
    for (n, (l, s)) in logs.iter().zip(signs).enumerate() {
        let t = s * (l + alpha * n as f64 * lz).exp();
        max_term = max_term.max(t.abs());
        sum.add(t);
        if n > 0 {
            let e = alpha * n as f64;
            let t2 = s * e * (e - 1.0) * (l + (e - alpha) * lz).exp();
            max_term2 = max_term2.max(t2.abs());
            sum2.add(t2);
        }
    }
    let value = sum.total();
    let ratio2 = if max_term2 > 0.0 { max_term2 / sum2.total().abs() } else { 1.0 };
    ((max_term / value.abs()).max(ratio2), value)
}

/// Build the truncated series valid on `[0, z_max]`.
pub fn build_series(params: &ModelParams, z_max: f64, tol: f64) -> Result<SeriesSolution> {
    params.validate()?;
    if !(z_max > 0.0 && z_max.is_finite()) || !(tol > 0.0) {
        return Err(Error::Domain(format!("need z_max > 0 and tol > 0 (z_max = {z_max}, tol = {tol})")));
    }
    let alpha = params.alpha;
    let (logs, signs) = coefficient_logs(params, MAX_TERMS + 1)?;
    let lz = z_max.ln();
    let term_log = |n: usize| logs[n] + alpha * n as f64 * lz;
    let mut n_terms = None;
    for n in 2..=MAX_TERMS {
        let ratio = (term_log(n) - term_log(n - 1)).exp();
        if term_log(n).exp() < tol && ratio < 0.5 {
            n_terms = Some(n);
            break;
        }
    }
    let n_terms = n_terms.ok_or_else(|| {
        Error::NonConvergence(format!("terms at z_max = {z_max} still above tol after {MAX_TERMS} terms"))
    })?;
    let (ratio, _) = cancellation(&logs[..n_terms], &signs[..n_terms], alpha, z_max);
    if !(ratio <= CANCELLATION_LIMIT) {
        return Err(Error::NonConvergence(format!(
            "z_max = {z_max} too large: largest term is {ratio:.3e} times the sum"
        )));
    }
    let tail_bound = term_log(n_terms).exp();
    let logs = logs[..n_terms].to_vec();
    let signs = signs[..n_terms].to_vec();
    let coeffs = logs.iter().zip(&signs).map(|(l, s)| s * l.exp()).collect();
    Ok(SeriesSolution { params: *params, coeffs, log_abs: logs, signs, n_terms, z_max, tail_bound })
}

/// Largest `z` (on a geometric grid of ratio 1.05, capped at `cap`) whose
/// sum keeps every term within [`CANCELLATION_LIMIT`] times the value.
pub fn certified_z_max(params: &ModelParams, cap: f64) -> Result<f64> {
    let (logs, signs) = coefficient_logs(params, MAX_TERMS + 1)?;
    let mut best = None;
    let mut z = 0.25;
    while z <= cap {
        let count = terms_needed(&logs, params.alpha, z);
        let ok = count.is_some_and(|k| cancellation(&logs[..k], &signs[..k], params.alpha, z).0 <= CANCELLATION_LIMIT);
        if !ok {
            break;
        }
        best = Some(z);
        z *= 1.05;
    }
    best.ok_or_else(|| Error::NonConvergence("no certified evaluation radius".into()))
}

fn terms_needed(logs: &[f64], alpha: f64, z: f64) -> Option<usize> {
    let lz = z.ln();
    (2..logs.len()).find(|&n| {
        let t = logs[n] + alpha * n as f64 * lz;
        t.exp() < DEFAULT_TOL && t - (logs[n - 1] + alpha * (n - 1) as f64 * lz) < -std::f64::consts::LN_2
    })
}

/// Largest term over the sum at `z`, and the sum, with as many terms as
/// needed for the default tolerance.
pub fn cancellation_at(params: &ModelParams, z: f64) -> Result<(f64, f64)> {
    let (logs, signs) = coefficient_logs(params, MAX_TERMS + 1)?;
    let k = terms_needed(&logs, params.alpha, z)
        .ok_or_else(|| Error::NonConvergence(format!("no decay by {MAX_TERMS} terms at z = {z}")))?;
    Ok(cancellation(&logs[..k], &signs[..k], params.alpha, z))
}

/// Series on the largest certified radius up to `cap`.
pub fn build_series_auto(params: &ModelParams, cap: f64) -> Result<SeriesSolution> {
    let z_max = certified_z_max(params, cap)?;
    build_series(params, z_max, DEFAULT_TOL)
}

impl SeriesSolution {
    fn check(&self, z: f64) -> Result<()> {
        if !(z >= 0.0) || z > self.z_max * (1.0 + 1e-12) {
            return Err(Error::Domain(format!("z = {z} outside [0, z_max = {}]", self.z_max)));
        }
        Ok(())
    }

    /// `sum_n a_n w_n z^(alpha n - shift)` with compensated summation,
    /// skipping the `n < skip` terms.
    fn sum_with(&self, z: f64, skip: usize, shift: f64, weight: impl Fn(f64) -> f64) -> f64 {
        let alpha = self.params.alpha;
        let lz = z.ln();
        let mut acc = Neumaier::default();
        for n in skip..self.n_terms {
            let e = alpha * n as f64 - shift;
            let w = weight(alpha * n as f64);
            if w == 0.0 {
                continue;
            }
            let mag = if e == 0.0 { self.log_abs[n].exp() } else { (self.log_abs[n] + e * lz).exp() };
            acc.add(self.signs[n] * w * mag);
        }
        acc.total()
    }

    /// `F_1(z)`.
    pub fn eval_f1(&self, z: f64) -> Result<f64> {
        self.check(z)?;
        if z == 0.0 {
            return Ok(1.0);
        }
        Ok(self.sum_with(z, 0, 0.0, |_| 1.0))
    }

    /// `F_1'(z)` by termwise differentiation.
    pub fn eval_d1(&self, z: f64) -> Result<f64> {
        self.check(z)?;
        if z == 0.0 {
            return Ok(0.0);
        }
        Ok(self.sum_with(z, 1, 1.0, |e| e))
    }

    /// `F_1''(z)`, singular like `z^(alpha-2)` at 0.
    pub fn eval_d2(&self, z: f64) -> Result<f64> {
        self.check(z)?;
        if z == 0.0 {
            return Err(Error::Domain("F'' is singular at 0".into()));
        }
        Ok(self.sum_with(z, 1, 2.0, |e| e * (e - 1.0)))
    }

    /// `z^(2-alpha) F_1''(z)`, finite at 0.
    pub fn eval_d2_scaled(&self, z: f64) -> Result<f64> {
        self.check(z)?;
        let alpha = self.params.alpha;
        if z == 0.0 {
            return Ok(self.coeffs[1] * alpha * (alpha - 1.0));
        }
        Ok(self.sum_with(z, 1, alpha, |e| e * (e - 1.0)))
    }

    /// Largest term over the sum at `z`.
    pub fn cancellation_ratio(&self, z: f64) -> f64 {
        cancellation(&self.log_abs, &self.signs, self.params.alpha, z).0
    }
}

/// `a_1 = alpha (c Gamma(-alpha))^(p/alpha) Gamma(p) / Gamma(p/alpha)`.
pub fn a1_constant(params: &ModelParams) -> f64 {
    let (alpha, p) = (params.alpha, params.p);
    let log = alpha.ln() + (p / alpha) * params.scale_const().ln() + ln_gamma(p).unwrap() - ln_gamma(p / alpha).unwrap();
    log.exp()
}

/// A value of `V_1` and whether it came from the large-z asymptote.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct V1Value {
    pub value: f64,
    pub asymptotic: bool,
}

/// `V_1(z) = a_1 F_1(z)` inside the certified radius, `z^p` beyond it.
pub fn eval_v1(series: &SeriesSolution, z: f64) -> Result<V1Value> {
    if !(z >= 0.0) {
        return Err(Error::Domain(format!("z = {z} must be non-negative")));
    }
    if z > series.z_max {
        return Ok(V1Value { value: z.powf(series.params.p), asymptotic: true });
    }
    Ok(V1Value { value: a1_constant(&series.params) * series.eval_f1(z)?, asymptotic: false })
}

/// `V_1'(z)`, with `p z^(p-1)` beyond the certified radius.
pub fn eval_v1_prime(series: &SeriesSolution, z: f64) -> Result<V1Value> {
    if !(z >= 0.0) {
        return Err(Error::Domain(format!("z = {z} must be non-negative")));
    }
    let p = series.params.p;
    if z > series.z_max {
        return Ok(V1Value { value: p * z.powf(p - 1.0), asymptotic: true });
    }
    Ok(V1Value { value: a1_constant(&series.params) * series.eval_d1(z)?, asymptotic: false })
}

/// Closed-form Laplace transform of `V_1`:
/// `a_1 / K^(p/alpha) * e^u Gamma(1 + p/alpha, u) / lambda^(1+p)` with
/// `K = c Gamma(-alpha)` and `u = K lambda^alpha`, evaluated in logs.
pub fn laplace_v1_closed(params: &ModelParams, lambda: f64) -> Result<f64> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::Domain(format!("lambda = {lambda} must be positive")));
    }
    let (alpha, p) = (params.alpha, params.p);
    let k = params.scale_const();
    let u = k * lambda.powf(alpha);
    let log = a1_constant(params).ln() - (p / alpha) * k.ln() + ln_upper_gamma_scaled(1.0 + p / alpha, u)?
        - (1.0 + p) * lambda.ln();
    Ok(log.exp())
}

/// Coefficient `b` of the first correction in `V_1(z) ~ z^p + b z^(p-alpha)`,
/// from balancing powers of `z` in the master equation:
/// `b = c Gamma(-alpha) Gamma(1+p) / Gamma(1+p-alpha)`.
pub fn v1_tail_correction(params: &ModelParams) -> f64 {
    let (alpha, p) = (params.alpha, params.p);
    params.scale_const() * (ln_gamma(1.0 + p).unwrap() - ln_gamma(1.0 + p - alpha).unwrap()).exp()
}

/// `int_0^inf e^(-lambda z) V_1(z) dz` by quadrature: graded panels on the
/// series range, then the two-term large-z form of `V_1` in closed form.
pub fn laplace_v1_numeric(series: &SeriesSolution, lambda: f64) -> Result<f64> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::Domain(format!("lambda = {lambda} must be positive")));
    }
    let z_max = series.z_max;
    let a1 = a1_constant(&series.params);
    let (alpha, p) = (series.params.alpha, series.params.p);
    let f = |z: f64| (-lambda * z).exp() * series.eval_f1(z).unwrap();
    // F_1 - 1 carries z^alpha, so panels shrink geometrically toward 0
    let mut total = 0.0;
    let mut hi = z_max.min(1.0);
    while hi > 1e-14 * z_max {
        total += legendre(f, 0.25 * hi, hi, 20);
        hi *= 0.25;
    }
    total += hi;
    let mut a = z_max.min(1.0);
    while a < z_max {
        let b = (a + 0.5).min(z_max);
        total += legendre(f, a, b, 20);
        a = b;
    }
    let x = lambda * z_max;
    let power_tail = |q: f64| -> Result<f64> { Ok((ln_upper_gamma_scaled(1.0 + q, x)? - x - (1.0 + q) * lambda.ln()).exp()) };
    let tail = power_tail(p)? + v1_tail_correction(&series.params) * power_tail(p - alpha)?;
    Ok(a1 * total + tail)
}

/// `int_0^z x^(mu-1) (z-x)^(nu-1) dx = z^(mu+nu-1) Gamma(mu)Gamma(nu)/Gamma(mu+nu)`.
pub fn beta_integral(mu: f64, nu: f64, z: f64) -> Result<f64> {
    if !(mu > 0.0 && nu > 0.0 && z > 0.0) {
        return Err(Error::Domain(format!("beta integral needs positive arguments (mu = {mu}, nu = {nu}, z = {z})")));
    }
    let g = GammaValue::of(mu)?.times(GammaValue::of(nu)?).over(GammaValue::of(mu + nu)?);
    Ok(((mu + nu - 1.0) * z.ln() + g.log_abs).exp())
}

/// `int_0^z x^(mu-1) (z-x)^(nu-1) dx` by the weighted quadrature, used to
/// cross-check [`beta_integral`].
pub fn beta_integral_quadrature(mu: f64, nu: f64, z: f64) -> f64 {
    jacobi_integral_graded(|_| 1.0, 0.0, z, mu - 1.0, nu - 1.0, &[], 20, 0)
}

/// Neumaier compensated sum.
#[derive(Debug, Default, Clone, Copy)]
pub struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.comp
    }
}
