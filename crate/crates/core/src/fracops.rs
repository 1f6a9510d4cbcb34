//! Generators of the reflected process `Y = S - X` and of the time-changed
//! process `Z`, in Itô, Riemann-Liouville and Caputo form, the two-sided
//! and `alpha <= 1` variants, and a product-integration solver for the
//! weakly singular Volterra equation behind the master equation.

use crate::error::{Error, Result};
use crate::params::ModelParams;
use crate::quadrature::{jacobi_integral_graded, legendre, legendre_pieces};
use crate::series::{beta_integral, SeriesSolution};
use crate::special::gamma;

const NODES: usize = 20;
const LEVELS: usize = 14;
const PANEL: f64 = 0.5;
/// Intervals on `[0, b]` used by [`volterra_solve`] unless a finer mesh is asked for.
pub const DEFAULT_VOLTERRA_NODES: usize = 256;

/// A test or solution function on `[0, inf)` with two derivatives.
pub trait SmoothFunction: Sync {
    fn value(&self, x: f64) -> f64;
    fn d1(&self, x: f64) -> f64;
    fn d2(&self, x: f64) -> f64;

    /// `kappa` with `|F''(x)| = O(x^kappa)` as `x -> 0`.
    fn zero_exponent(&self) -> f64 {
        0.0
    }

    /// `F''(x) x^(-kappa)`, finite at 0.
    fn d2_scaled(&self, x: f64) -> f64 {
        let k = self.zero_exponent();
        if k == 0.0 {
            self.d2(x)
        } else {
            self.d2(x) * x.powf(-k)
        }
    }

    /// Abscissae where the second derivative may have kinks.
    fn breaks(&self) -> Vec<f64> {
        Vec::new()
    }

    /// A point beyond which `F` is constant to within `tol`, if one is known.
    fn flat_beyond(&self, _tol: f64) -> Option<f64> {
        None
    }
}

fn check_y(y: f64) -> Result<()> {
    if !(y > 0.0 && y.is_finite()) {
        return Err(Error::Domain(format!("y = {y} must be positive")));
    }
    Ok(())
}

fn finite(v: f64, what: &str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::QuadratureFailure(format!("{what} produced {v}")))
    }
}

/// `int_0^y F''(x) (y - x)^(1-alpha) dx`.
fn caputo_integral<F: SmoothFunction + ?Sized>(f: &F, y: f64, alpha: f64) -> f64 {
    let k = f.zero_exponent();
    jacobi_integral_graded(|x| f.d2_scaled(x), 0.0, y, k, 1.0 - alpha, &panels(f.breaks(), y), NODES, LEVELS)
}

/// Break points plus a uniform cut every [`PANEL`] so that fast-growing
/// integrands such as long series still see enough nodes per piece.
fn panels(mut breaks: Vec<f64>, len: f64) -> Vec<f64> {
    let n = (len / PANEL).ceil() as usize;
    breaks.extend((1..n).map(|k| len * k as f64 / n as f64));
    breaks
}

/// Caputo form `c/(alpha(alpha-1)) int_0^y F''(x) (y-x)^(1-alpha) dx`.
pub fn caputo_ly<F: SmoothFunction + ?Sized>(f: &F, y: f64, alpha: f64, c: f64) -> Result<f64> {
    check_y(y)?;
    if f.zero_exponent() < alpha - 2.0 {
        return Err(Error::Domain(format!(
            "F'' ~ x^{} at 0 is too singular for alpha = {alpha}",
            f.zero_exponent()
        )));
    }
    finite(c / (alpha * (alpha - 1.0)) * caputo_integral(f, y, alpha), "Caputo form")
}

/// `int_0^y (F(y-x) - F(y) + F'(y) x) x^(-1-alpha) dx`, the compensated
/// small-jump part of the Itô form.
fn compensated_down<F: SmoothFunction + ?Sized>(f: &F, y: f64, alpha: f64) -> f64 {
    let half = 0.5 * y;
    let (fy, dfy) = (f.value(y), f.d1(y));
    let breaks = f.breaks();
    // x in (0, y/2]: the bracket is x^2 int_0^1 (1-s) F''(y - x s) ds
    let inner = |x: f64| {
        let inner_breaks: Vec<f64> = breaks.iter().map(|b| (y - b) / x).filter(|s| *s > 0.0 && *s < 1.0).collect();
        legendre_pieces(|s| (1.0 - s) * f.d2(y - x * s), 0.0, 1.0, &inner_breaks, NODES)
    };
    let outer_breaks: Vec<f64> = breaks.iter().map(|b| y - b).filter(|x| *x > 0.0 && *x < half).collect();
    let near = jacobi_integral_graded(inner, 0.0, half, 1.0 - alpha, 0.0, &outer_breaks, NODES, 0);
    // x in [y/2, y], written in u = y - x so that grading reaches F near 0
    let far_breaks: Vec<f64> = breaks.iter().copied().filter(|b| *b > 0.0 && *b < half).collect();
    let far = jacobi_integral_graded(
        |u| (f.value(u) - fy + dfy * (y - u)) * (y - u).powf(-1.0 - alpha),
        0.0,
        half,
        0.0,
        0.0,
        &far_breaks,
        NODES,
        LEVELS,
    );
    near + far
}

/// Itô form: compensated jumps below `y` plus the reflected big jumps.
pub fn ito_ly<F: SmoothFunction + ?Sized>(f: &F, y: f64, alpha: f64, c: f64) -> Result<f64> {
    check_y(y)?;
    let jumps = c * compensated_down(f, y, alpha);
    let reflected = c * (f.value(0.0) - f.value(y)) / (alpha * y.powf(alpha))
        + c * f.d1(y) / ((alpha - 1.0) * y.powf(alpha - 1.0));
    finite(jumps + reflected, "Itô form")
}

/// Riemann-Liouville form
/// `c/(alpha(alpha-1)) d^2/dy^2 int_0^y F(x)(y-x)^(1-alpha) dx + c F(0)/(alpha y^alpha)`.
/// The integral is `y^(2-alpha) Phi(y)` with `Phi(y) = int_0^1 F(yt)(1-t)^(1-alpha) dt`,
/// which is differentiated under the integral sign.
pub fn rl_ly<F: SmoothFunction + ?Sized>(f: &F, y: f64, alpha: f64, c: f64) -> Result<f64> {
    check_y(y)?;
    let w = 1.0 - alpha;
    let breaks: Vec<f64> = f.breaks().iter().map(|b| b / y).filter(|t| *t > 0.0 && *t < 1.0).collect();
    let int = |g: &dyn Fn(f64) -> f64| jacobi_integral_graded(g, 0.0, 1.0, 0.0, w, &breaks, NODES, LEVELS);
    let phi = int(&|t| f.value(y * t));
    let phi1 = int(&|t| t * f.d1(y * t));
    let phi2 = int(&|t| t * t * f.d2(y * t));
    let second = (2.0 - alpha) * (1.0 - alpha) * y.powf(-alpha) * phi
        + 2.0 * (2.0 - alpha) * y.powf(1.0 - alpha) * phi1
        + y.powf(2.0 - alpha) * phi2;
    finite(c / (alpha * (alpha - 1.0)) * second + c * f.value(0.0) / (alpha * y.powf(alpha)), "RL form")
}

/// Generator of `Z`: `z F'(z) + alpha L_Y F(z)`.
pub fn generator_lz<F: SmoothFunction + ?Sized>(f: &F, z: f64, params: &ModelParams) -> Result<f64> {
    Ok(z * f.d1(z) + params.alpha * caputo_ly(f, z, params.alpha, params.c)?)
}

impl SmoothFunction for SeriesSolution {
    fn value(&self, x: f64) -> f64 {
        self.eval_f1(x).unwrap_or(f64::NAN)
    }
    fn d1(&self, x: f64) -> f64 {
        self.eval_d1(x).unwrap_or(f64::NAN)
    }
    fn d2(&self, x: f64) -> f64 {
        self.eval_d2(x).unwrap_or(f64::NAN)
    }
    fn zero_exponent(&self) -> f64 {
        self.params.alpha - 2.0
    }
    fn d2_scaled(&self, x: f64) -> f64 {
        self.eval_d2_scaled(x).unwrap_or(f64::NAN)
    }
}

/// Residual of the master equation for `F_1`:
/// `z F' + (c/(alpha-1)) int_0^z F''(x)(z-x)^(1-alpha) dx - p F`.
pub fn master_residual(series: &SeriesSolution, z: f64) -> Result<f64> {
    check_y(z)?;
    if z > series.z_max {
        return Err(Error::Domain(format!("z = {z} beyond z_max = {}", series.z_max)));
    }
    let pr = &series.params;
    Ok(generator_lz(series, z, pr)? - pr.p * series.eval_f1(z)?)
}

/// For each `n`, the relative mismatch between the `z^(alpha n)` part of the
/// master equation and zero, using the exact Caputo image of
/// `z^(alpha (n+1))` from the beta integral.
pub fn termwise_residuals(series: &SeriesSolution) -> Result<Vec<f64>> {
    let pr = &series.params;
    let (alpha, c, p) = (pr.alpha, pr.c, pr.p);
    let mut out = Vec::new();
    for n in 0..series.n_terms.saturating_sub(1) {
        let e = alpha * (n + 1) as f64;
        // (c/(alpha-1)) int_0^1 e(e-1) x^(e-2) (1-x)^(1-alpha) dx, the coefficient of z^(alpha n)
        let caputo = c / (alpha - 1.0) * e * (e - 1.0) * beta_integral(e - 1.0, 2.0 - alpha, 1.0)?;
        let lhs_log = series.log_abs[n] + ((alpha * n as f64 - p).abs()).ln();
        let rhs_log = series.log_abs[n + 1] + caputo.ln();
        let sign_l = series.signs[n] * (alpha * n as f64 - p).signum();
        let sign_r = series.signs[n + 1];
        out.push(if sign_l == -sign_r { (lhs_log - rhs_log).exp_m1().abs() } else { f64::INFINITY });
    }
    Ok(out)
}

/// Sum of the `c_plus` and `c_minus` sides of a two-sided stable generator
/// in Caputo form, for `alpha` in `(1, 2)`, `(0, 1)` or `alpha = 1`.
pub fn caputo_general<F: SmoothFunction + ?Sized>(f: &F, y: f64, alpha: f64, c_plus: f64, c_minus: f64, tol: f64) -> Result<f64> {
    check_y(y)?;
    if !(alpha > 0.0 && alpha < 2.0) || c_plus < 0.0 || c_minus < 0.0 {
        return Err(Error::Domain(format!("need alpha in (0, 2) and c+, c- >= 0 (alpha = {alpha})")));
    }
    let breaks = f.breaks();
    let upper = |label: &str| -> Result<f64> {
        f.flat_beyond(tol).ok_or_else(|| Error::Domain(format!("{label}: no decay bound known for the upper integral")))
    };
    if alpha == 1.0 {
        if c_plus != c_minus {
            return Err(Error::Domain("alpha = 1 needs c+ = c-".into()));
        }
        let end = upper("log kernel")?.max(y);
        let down = log_moment(|u| f.d2(y - u), y, &shifted(&breaks, y, -1.0));
        let up = log_moment(|u| f.d2(y + u), end - y, &up_panels(&breaks, y, end - y));
        return finite(c_plus * (down + up), "log-kernel form");
    }
    if alpha > 1.0 {
        let mut total = c_plus / (alpha * (alpha - 1.0)) * caputo_integral(f, y, alpha);
        if c_minus > 0.0 {
            let end = upper("Caputo form")?.max(y);
            let ups = up_panels(&breaks, y, end - y);
            let up = jacobi_integral_graded(|u| f.d2(y + u), 0.0, end - y, 1.0 - alpha, 0.0, &ups, NODES, 0);
            total += c_minus / (alpha * (alpha - 1.0)) * up;
        }
        return finite(total, "two-sided Caputo form");
    }
    let down = jacobi_integral_graded(|x| f.d1(x), 0.0, y, 0.0, -alpha, &breaks, NODES, LEVELS);
    let mut total = -c_plus / alpha * down;
    if c_minus > 0.0 {
        let end = upper("Caputo form")?.max(y);
        let up = jacobi_integral_graded(|u| f.d1(y + u), 0.0, end - y, -alpha, 0.0, &up_panels(&breaks, y, end - y), NODES, 0);
        total += c_minus / alpha * up;
    }
    finite(total, "Caputo form for alpha < 1")
}

/// Upward distances from `y` to the break points, cut into panels on `[0, len]`.
fn up_panels(breaks: &[f64], y: f64, len: f64) -> Vec<f64> {
    let mut out = panels(shifted(breaks, y, 1.0), len);
    out.extend([0.125, 0.25].iter().copied().filter(|u| *u < len));
    out.sort_by(f64::total_cmp);
    out
}

/// Break points expressed as distances from `y`, on the side given by `dir`.
fn shifted(breaks: &[f64], y: f64, dir: f64) -> Vec<f64> {
    breaks.iter().map(|b| dir * (b - y)).filter(|u| *u > 0.0).collect()
}

/// `int_0^len g(u) log(1/u) du`: geometric panels toward 0 and the exact
/// log moment `g(0) eps (1 - log eps)` on the innermost one.
fn log_moment<G: Fn(f64) -> f64>(g: G, len: f64, breaks: &[f64]) -> f64 {
    if len <= 0.0 {
        return 0.0;
    }
    let first = breaks.iter().copied().filter(|b| *b > 0.0 && *b < len).fold(len, f64::min);
    let rest = legendre_pieces(|u| -g(u) * u.ln(), first, len, breaks, NODES);
    let mut total = rest;
    let mut hi = first;
    while hi > 1e-13 * first {
        let lo = 0.25 * hi;
        total += legendre(|u| -g(u) * u.ln(), lo, hi, NODES);
        hi = lo;
    }
    total + g(0.0) * hi * (1.0 - hi.ln())
}

/// `int_0^inf (F(y+x) - F(y) - F'(y) x) x^(-1-alpha) dx` for `alpha` in (1, 2).
fn compensated_up<F: SmoothFunction + ?Sized>(f: &F, y: f64, alpha: f64, end: f64) -> f64 {
    let (fy, dfy) = (f.value(y), f.d1(y));
    let breaks = f.breaks();
    let len = (end - y).max(y);
    let h = 0.5 * len.min(y.max(1e-3));
    let inner = |x: f64| {
        let ib: Vec<f64> = breaks.iter().map(|b| (b - y) / x).filter(|s| *s > 0.0 && *s < 1.0).collect();
        legendre_pieces(|s| (1.0 - s) * f.d2(y + x * s), 0.0, 1.0, &ib, NODES)
    };
    let ups = up_panels(&breaks, y, len);
    let near = jacobi_integral_graded(inner, 0.0, h, 1.0 - alpha, 0.0, &ups, NODES, 0);
    let far = legendre_pieces(|x| (f.value(y + x) - fy - dfy * x) * x.powf(-1.0 - alpha), h, len, &ups, NODES);
    // beyond `len` F is flat at F(end)
    let flat = f.value(end.max(y + len));
    let tail = (flat - fy) * len.powf(-alpha) / alpha - dfy * len.powf(1.0 - alpha) / (alpha - 1.0);
    near + far + tail
}

/// Itô counterpart of [`caputo_general`], by direct compensated-jump
/// quadrature.
pub fn ito_general<F: SmoothFunction + ?Sized>(f: &F, y: f64, alpha: f64, c_plus: f64, c_minus: f64, tol: f64) -> Result<f64> {
    check_y(y)?;
    let end = f.flat_beyond(tol);
    let need_end = || end.ok_or_else(|| Error::Domain("no decay bound known for the upward jumps".into()));
    let breaks = f.breaks();
    let (f0, fy, dfy) = (f.value(0.0), f.value(y), f.d1(y));
    if alpha == 1.0 {
        if c_plus != c_minus {
            return Err(Error::Domain("alpha = 1 needs c+ = c-".into()));
        }
        let c = c_plus;
        let end = need_end()?.max(2.0 * y);
        let down = compensated_down_alpha1(f, y);
        let ups = up_panels(&breaks, y, end - y);
        let inner = |x: f64| {
            let ib: Vec<f64> = breaks.iter().map(|b| (b - y) / x).filter(|s| *s > 0.0 && *s < 1.0).collect();
            legendre_pieces(|s| (1.0 - s) * f.d2(y + x * s), 0.0, 1.0, &ib, NODES)
        };
        let up_small = legendre_pieces(inner, 0.0, y, &ups, NODES);
        let up_large = legendre_pieces(|x| (f.value(y + x) - fy) / (x * x), y, end - y, &ups, NODES)
            + (f.value(end) - fy) / (end - y);
        return finite(c * (down + (f0 - fy) / y + up_small + up_large), "Itô form for alpha = 1");
    }
    if alpha > 1.0 {
        let mut total = c_plus * compensated_down(f, y, alpha)
            + c_plus * (f0 - fy) / (alpha * y.powf(alpha))
            + c_plus * dfy / ((alpha - 1.0) * y.powf(alpha - 1.0));
        if c_minus > 0.0 {
            total += c_minus * compensated_up(f, y, alpha, need_end()?);
        }
        return finite(total, "two-sided Itô form");
    }
    // alpha < 1: no compensation
    let half = 0.5 * y;
    let downs: Vec<f64> = breaks.iter().map(|b| y - b).filter(|x| *x > 0.0 && *x < half).collect();
    let first = |x: f64| {
        let ib: Vec<f64> = breaks.iter().map(|b| (y - b) / x).filter(|s| *s > 0.0 && *s < 1.0).collect();
        -legendre_pieces(|s| f.d1(y - x * s), 0.0, 1.0, &ib, NODES)
    };
    let near = jacobi_integral_graded(first, 0.0, half, -alpha, 0.0, &downs, NODES, 0);
    let far_breaks: Vec<f64> = breaks.iter().copied().filter(|b| *b > 0.0 && *b < half).collect();
    let far = jacobi_integral_graded(|u| (f.value(u) - fy) * (y - u).powf(-1.0 - alpha), 0.0, half, 0.0, 0.0, &far_breaks, NODES, LEVELS);
    let mut total = c_plus * (near + far) + c_plus * (f0 - fy) / (alpha * y.powf(alpha));
    if c_minus > 0.0 {
        let end = need_end()?.max(2.0 * y);
        let ups = up_panels(&breaks, y, end - y);
        let inner = |x: f64| {
            let ib: Vec<f64> = breaks.iter().map(|b| (b - y) / x).filter(|s| *s > 0.0 && *s < 1.0).collect();
            legendre_pieces(|s| f.d1(y + x * s), 0.0, 1.0, &ib, NODES)
        };
        let up_near = jacobi_integral_graded(inner, 0.0, y, -alpha, 0.0, &ups, NODES, 0);
        let up_far = legendre_pieces(|x| (f.value(y + x) - fy) * x.powf(-1.0 - alpha), y, end - y, &ups, NODES)
            + (f.value(end) - fy) * (end - y).powf(-alpha) / alpha;
        total += c_minus * (up_near + up_far);
    }
    finite(total, "Itô form for alpha < 1")
}

/// `int_0^y (F(y-x) - F(y) + F'(y) x) x^(-2) dx`.
fn compensated_down_alpha1<F: SmoothFunction + ?Sized>(f: &F, y: f64) -> f64 {
    compensated_down(f, y, 1.0)
}

/// Solution of the Volterra equation `phi(z) + int_0^z K(z,x) phi(x) dx = psi`
/// and the reconstructed `F`.
#[derive(Debug, Clone)]
pub struct VolterraSolution {
    pub grid: Vec<f64>,
    pub phi: Vec<f64>,
    pub f_reconstructed: Vec<f64>,
    pub psi: f64,
    /// Largest nodal residual of the discrete equation.
    pub residual: f64,
}

impl VolterraSolution {
    /// Piecewise linear interpolation of the reconstructed `F`.
    pub fn f_at(&self, z: f64) -> f64 {
        let h = self.grid[1] - self.grid[0];
        let i = ((z / h).floor() as usize).min(self.grid.len() - 2);
        let t = (z - self.grid[i]) / h;
        (1.0 - t) * self.f_reconstructed[i] + t * self.f_reconstructed[i + 1]
    }
}

/// Exact weights of `int (z_i - x)^beta phi(x) dx` over `[0, z_i]` for a
/// piecewise linear `phi` on the uniform grid, node by node.
fn hat_moments(i: usize, h: f64, beta: f64, out: &mut [f64]) {
    out[..=i].iter_mut().for_each(|w| *w = 0.0);
    let zi = i as f64 * h;
    for j in 0..i {
        let d0 = zi - j as f64 * h;
        let d1 = zi - (j + 1) as f64 * h;
        let m0 = (d0.powf(beta + 1.0) - d1.powf(beta + 1.0)) / (beta + 1.0);
        let m1 = (d0.powf(beta + 2.0) - d1.powf(beta + 2.0)) / (beta + 2.0);
        // left hat (u - d1)/h, right hat (d0 - u)/h in u = z_i - x
        out[j] += (m1 - d1 * m0) / h;
        out[j + 1] += (d0 * m0 - m1) / h;
    }
}

/// Product-integration solve of the Volterra form of the master equation on
/// `[0, b]` with `n_nodes` intervals and piecewise linear `phi`.
pub fn volterra_solve(params: &ModelParams, f0: f64, b: f64, n_nodes: usize) -> Result<VolterraSolution> {
    params.validate()?;
    if n_nodes < 32 || !(b > 0.0) {
        return Err(Error::Domain(format!("need b > 0 and at least 32 nodes (b = {b}, n = {n_nodes})")));
    }
    let (alpha, c, p) = (params.alpha, params.c, params.p);
    let gg = gamma(alpha)? * gamma(2.0 - alpha)?;
    let k0 = (alpha - 1.0) / (c * gg);
    let psi = p * (alpha - 1.0) * f0 / c;
    let h = b / n_nodes as f64;
    let grid: Vec<f64> = (0..=n_nodes).map(|i| i as f64 * h).collect();
    let mut phi = vec![0.0; n_nodes + 1];
    phi[0] = psi;
    let mut w_sing = vec![0.0; n_nodes + 1];
    let mut w_reg = vec![0.0; n_nodes + 1];
    let mut residual: f64 = 0.0;
    // K(z,x) = k0 [(alpha-1) z (z-x)^(alpha-2) - p (z-x)^(alpha-1)]
    for i in 1..=n_nodes {
        hat_moments(i, h, alpha - 2.0, &mut w_sing);
        hat_moments(i, h, alpha - 1.0, &mut w_reg);
        let zi = grid[i];
        let weight = |j: usize| k0 * ((alpha - 1.0) * zi * w_sing[j] - p * w_reg[j]);
        let known: f64 = (0..i).map(|j| weight(j) * phi[j]).sum();
        let diag = 1.0 + weight(i);
        if diag.abs() < 1e-12 {
            return Err(Error::SolverFailure(format!("vanishing pivot {diag:e} at z = {zi}")));
        }
        phi[i] = (psi - known) / diag;
        let check = phi[i] + known + weight(i) * phi[i] - psi;
        residual = residual.max(check.abs());
    }
    let mut f = vec![f0; n_nodes + 1];
    for (i, fi) in f.iter_mut().enumerate().skip(1) {
        hat_moments(i, h, alpha - 1.0, &mut w_reg);
        *fi = f0 + (0..=i).map(|j| w_reg[j] * phi[j]).sum::<f64>() / gg;
    }
    Ok(VolterraSolution { grid, phi, f_reconstructed: f, psi, residual })
}

/// Named test functions for the generator cross-checks and the CLI.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TestFunction {
    /// `F = 1`.
    Constant,
    /// `F = y^2`.
    Square,
    /// `F = cos y`.
    Cosine,
    /// `F = exp(-y^2)`.
    Gaussian,
    /// `F = y^2 exp(-y)`.
    SquareExp,
    /// `F = (1 - y^2)^4` on `[0, 1]`, zero beyond.
    Bump,
}

impl TestFunction {
    pub const ALL: [TestFunction; 6] = [
        TestFunction::Constant,
        TestFunction::Square,
        TestFunction::Cosine,
        TestFunction::Gaussian,
        TestFunction::SquareExp,
        TestFunction::Bump,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            TestFunction::Constant => "const",
            TestFunction::Square => "square",
            TestFunction::Cosine => "cos",
            TestFunction::Gaussian => "gauss",
            TestFunction::SquareExp => "square-exp",
            TestFunction::Bump => "bump",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|f| f.name() == name)
    }
}

impl SmoothFunction for TestFunction {
    fn value(&self, y: f64) -> f64 {
        match self {
            TestFunction::Constant => 1.0,
            TestFunction::Square => y * y,
            TestFunction::Cosine => y.cos(),
            TestFunction::Gaussian => (-y * y).exp(),
            TestFunction::SquareExp => y * y * (-y).exp(),
            TestFunction::Bump => {
                if y < 1.0 {
                    (1.0 - y * y).powi(4)
                } else {
                    0.0
                }
            }
        }
    }

    fn d1(&self, y: f64) -> f64 {
        match self {
            TestFunction::Constant => 0.0,
            TestFunction::Square => 2.0 * y,
            TestFunction::Cosine => -y.sin(),
            TestFunction::Gaussian => -2.0 * y * (-y * y).exp(),
            TestFunction::SquareExp => (2.0 * y - y * y) * (-y).exp(),
            TestFunction::Bump => {
                if y < 1.0 {
                    -8.0 * y * (1.0 - y * y).powi(3)
                } else {
                    0.0
                }
            }
        }
    }

    fn d2(&self, y: f64) -> f64 {
        match self {
            TestFunction::Constant => 0.0,
            TestFunction::Square => 2.0,
            TestFunction::Cosine => -y.cos(),
            TestFunction::Gaussian => (4.0 * y * y - 2.0) * (-y * y).exp(),
            TestFunction::SquareExp => (2.0 - 4.0 * y + y * y) * (-y).exp(),
            TestFunction::Bump => {
                if y < 1.0 {
                    let u = 1.0 - y * y;
                    -8.0 * u.powi(3) + 48.0 * y * y * u * u
                } else {
                    0.0
                }
            }
        }
    }

    fn breaks(&self) -> Vec<f64> {
        match self {
            TestFunction::Bump => vec![1.0],
            _ => Vec::new(),
        }
    }

    fn flat_beyond(&self, tol: f64) -> Option<f64> {
        match self {
            TestFunction::Constant | TestFunction::Bump => Some(1.0),
            // |F| and |F'| fall below tol once y^2 e^-y, y e^-y... do
            TestFunction::SquareExp => Some((-tol.ln() + 10.0) * 1.5),
            TestFunction::Gaussian => Some((-tol.ln()).sqrt() + 2.0),
            TestFunction::Square | TestFunction::Cosine => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn square_closed_form() {
        for (alpha, c, y) in [(1.5f64, 1.0, 0.5f64), (1.8, 0.7, 2.0), (1.2, 2.0, 1.0)] {
            let want = 2.0 * c * y.powf(2.0 - alpha) / (alpha * (alpha - 1.0) * (2.0 - alpha));
            let got = caputo_ly(&TestFunction::Square, y, alpha, c).unwrap();
            assert!(rel(got, want) < 1e-10, "{got} vs {want}");
            let ito = ito_ly(&TestFunction::Square, y, alpha, c).unwrap();
            let rl = rl_ly(&TestFunction::Square, y, alpha, c).unwrap();
            assert!(rel(ito, want) < 1e-8, "ito {ito} vs {want}");
            assert!(rel(rl, want) < 1e-8, "rl {rl} vs {want}");
        }
    }

    #[test]
    fn constants_are_annihilated() {
        let f = TestFunction::Constant;
        for y in [0.3, 1.0, 3.0] {
            assert_eq!(caputo_ly(&f, y, 1.6, 1.0).unwrap(), 0.0);
            assert!(ito_ly(&f, y, 1.6, 1.0).unwrap().abs() < 1e-14);
            assert!(rl_ly(&f, y, 1.6, 1.0).unwrap().abs() < 1e-12);
            assert_eq!(generator_lz(&f, y, &ModelParams::unit(1.6, 1.0, 1.2).unwrap()).unwrap(), 0.0);
        }
    }

    #[test]
    fn generator_on_square() {
        let pr = ModelParams::unit(1.7, 1.3, 1.2).unwrap();
        let z = 1.4f64;
        let want = 2.0 * z * z + 2.0 * pr.c * z.powf(2.0 - pr.alpha) / ((pr.alpha - 1.0) * (2.0 - pr.alpha));
        assert!(rel(generator_lz(&TestFunction::Square, z, &pr).unwrap(), want) < 1e-10);
    }

    #[test]
    fn too_singular_is_rejected() {
        struct Rough;
        impl SmoothFunction for Rough {
            fn value(&self, x: f64) -> f64 {
                x.powf(0.2)
            }
            fn d1(&self, x: f64) -> f64 {
                0.2 * x.powf(-0.8)
            }
            fn d2(&self, x: f64) -> f64 {
                -0.16 * x.powf(-1.8)
            }
            fn zero_exponent(&self) -> f64 {
                -1.8
            }
        }
        assert!(matches!(caputo_ly(&Rough, 1.0, 1.5, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn log_moment_exact_for_constant() {
        // int_0^2 log(1/u) du = 2 (1 - log 2)
        let got = log_moment(|_| 1.0, 2.0, &[]);
        assert!((got - 2.0 * (1.0 - 2f64.ln())).abs() < 1e-13);
    }

    #[test]
    fn volterra_starts_at_f0() {
        let pr = ModelParams::unit(1.5, 1.0, 1.2).unwrap();
        let sol = volterra_solve(&pr, 2.5, 1.0, 64).unwrap();
        assert_eq!(sol.f_reconstructed[0], 2.5);
        assert!(sol.residual < 1e-12);
        assert!(volterra_solve(&pr, 1.0, 1.0, 16).is_err());
    }
}
