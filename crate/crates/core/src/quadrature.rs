//! Gauss rules and endpoint-weighted integration.
//!
//! Rules are built once by Golub-Welsch (eigen-decomposition of the Jacobi
//! matrix) and cached per `(n, a, b)`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, SymmetricEigen};

use crate::special::ln_gamma;

/// Nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Default node count for panels.
pub const DEFAULT_NODES: usize = 20;
const MAX_DEPTH: usize = 64;

type Key = (usize, u64, u64);

fn cache() -> &'static Mutex<HashMap<Key, Arc<Rule>>> {
    static CACHE: OnceLock<Mutex<HashMap<Key, Arc<Rule>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Gauss-Jacobi rule for the weight `(1 - t)^a (1 + t)^b` on `[-1, 1]`.
pub fn gauss_jacobi(n: usize, a: f64, b: f64) -> Arc<Rule> {
    assert!(n >= 1 && a > -1.0 && b > -1.0, "bad Gauss-Jacobi request n={n} a={a} b={b}");
    let key = (n, a.to_bits(), b.to_bits());
    if let Some(rule) = cache().lock().unwrap().get(&key) {
        return rule.clone();
    }
    let rule = Arc::new(build_jacobi(n, a, b));
    cache().lock().unwrap().insert(key, rule.clone());
    rule
}

pub fn gauss_legendre(n: usize) -> Arc<Rule> {
    gauss_jacobi(n, 0.0, 0.0)
}

fn build_jacobi(n: usize, a: f64, b: f64) -> Rule {
    let ab = a + b;
    let mut m = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        let kf = k as f64;
        let diag = if k == 0 {
            (b - a) / (ab + 2.0)
        } else {
            (b * b - a * a) / ((2.0 * kf + ab) * (2.0 * kf + ab + 2.0))
        };
        m[(k, k)] = diag;
        if k + 1 < n {
            let j = kf + 1.0;
            let sq = if k == 0 {
                4.0 * (1.0 + a) * (1.0 + b) / ((2.0 + ab).powi(2) * (3.0 + ab))
            } else {
                let s = 2.0 * j + ab;
                4.0 * j * (j + a) * (j + b) * (j + ab) / (s * s * (s + 1.0) * (s - 1.0))
            };
            let off = sq.sqrt();
            m[(k, k + 1)] = off;
            m[(k + 1, k)] = off;
        }
    }
    let mu0 = ((ab + 1.0) * std::f64::consts::LN_2 + ln_gamma(a + 1.0).unwrap() + ln_gamma(b + 1.0).unwrap()
        - ln_gamma(ab + 2.0).unwrap())
    .exp();
    let eig = SymmetricEigen::new(m);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            (eig.eigenvalues[i], mu0 * v0 * v0)
        })
        .collect();
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    Rule { nodes: pairs.iter().map(|p| p.0).collect(), weights: pairs.iter().map(|p| p.1).collect() }
}

/// Plain Gauss-Legendre on `[lo, hi]`.
pub fn legendre<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, n: usize) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    let rule = gauss_legendre(n);
    let half = 0.5 * (hi - lo);
    let mid = 0.5 * (hi + lo);
    rule.nodes.iter().zip(&rule.weights).map(|(t, w)| w * f(mid + half * t)).sum::<f64>() * half
}

/// Gauss-Legendre on each piece between sorted `breaks`.
pub fn legendre_pieces<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, breaks: &[f64], n: usize) -> f64 {
    let mut total = 0.0;
    let mut u = lo;
    for &b in breaks.iter().filter(|&&b| b > lo && b < hi) {
        total += legendre(&f, u, b, n);
        u = b;
    }
    total + legendre(&f, u, hi, n)
}

/// `int_lo^hi g(x) (x - lo)^a (hi - x)^b dx` with `g` smooth on every
/// piece between `breaks`. Pieces touching a weighted endpoint use the
/// matching Jacobi rule; the others are bisected until each is no longer
/// than its distance to either weighted endpoint.
pub fn jacobi_integral<G: Fn(f64) -> f64>(g: G, lo: f64, hi: f64, a: f64, b: f64, breaks: &[f64], n: usize) -> f64 {
    jacobi_integral_graded(g, lo, hi, a, b, breaks, n, 0)
}

/// As [`jacobi_integral`], but the piece touching `lo` is first cut into
/// `levels` geometric panels (ratio 1/4) so that `g` may itself carry
/// fractional powers of `x - lo`. Works with `a = 0` too.
#[allow(clippy::too_many_arguments)]
pub fn jacobi_integral_graded<G: Fn(f64) -> f64>(
    g: G,
    lo: f64,
    hi: f64,
    a: f64,
    b: f64,
    breaks: &[f64],
    n: usize,
    levels: usize,
) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    let mut points = vec![lo];
    let mut inner: Vec<f64> = breaks.iter().copied().filter(|&x| x > lo && x < hi).collect();
    if levels > 0 && inner.is_empty() {
        inner.push(0.5 * (lo + hi));
    }
    inner.sort_by(f64::total_cmp);
    inner.dedup();
    points.extend(inner);
    points.push(hi);
    let ctx = Ctx { g: &g, lo, hi, a, b, n, levels };
    points.windows(2).map(|w| ctx.piece(w[0], w[1], 0, levels > 0)).sum()
}

struct Ctx<'a, G> {
    g: &'a G,
    lo: f64,
    hi: f64,
    a: f64,
    b: f64,
    n: usize,
    levels: usize,
}

impl<G: Fn(f64) -> f64> Ctx<'_, G> {
    fn weight(&self, x: f64) -> f64 {
        let l = if self.a == 0.0 { 1.0 } else { (x - self.lo).powf(self.a) };
        let r = if self.b == 0.0 { 1.0 } else { (self.hi - x).powf(self.b) };
        l * r
    }

    fn piece(&self, u: f64, v: f64, depth: usize, grade: bool) -> f64 {
        let len = v - u;
        if len <= 0.0 {
            return 0.0;
        }
        let left_w = u == self.lo && self.a != 0.0;
        let right_w = v == self.hi && self.b != 0.0;
        let dl = if self.a != 0.0 { u - self.lo } else { f64::INFINITY };
        let dr = if self.b != 0.0 { self.hi - v } else { f64::INFINITY };
        let half = 0.5 * len;
        let mid = u + half;
        if left_w && right_w {
            let rule = gauss_jacobi(self.n, self.b, self.a);
            let scale = half.powf(1.0 + self.a + self.b);
            return scale * rule.nodes.iter().zip(&rule.weights).map(|(t, w)| w * (self.g)(mid + half * t)).sum::<f64>();
        }
        let split = depth < MAX_DEPTH && ((!left_w && dl < len) || (!right_w && dr < len));
        if split {
            return self.piece(u, mid, depth + 1, grade) + self.piece(mid, v, depth + 1, false);
        }
        if grade && u == self.lo {
            let mut total = 0.0;
            let mut right = v;
            for _ in 0..self.levels {
                let left = u + 0.25 * (right - u);
                total += legendre(|x| (self.g)(x) * self.weight(x), left, right, self.n);
                right = left;
            }
            return total + self.piece(u, right, depth + 1, false);
        }
        if left_w {
            let rule = gauss_jacobi(self.n, 0.0, self.a);
            let scale = half.powf(1.0 + self.a);
            let r = |x: f64| if self.b == 0.0 { 1.0 } else { (self.hi - x).powf(self.b) };
            return scale
                * rule.nodes.iter().zip(&rule.weights).map(|(t, w)| {
                    let x = mid + half * t;
                    w * (self.g)(x) * r(x)
                }).sum::<f64>();
        }
        if right_w {
            let rule = gauss_jacobi(self.n, self.b, 0.0);
            let scale = half.powf(1.0 + self.b);
            let l = |x: f64| if self.a == 0.0 { 1.0 } else { (x - self.lo).powf(self.a) };
            return scale
                * rule.nodes.iter().zip(&rule.weights).map(|(t, w)| {
                    let x = mid + half * t;
                    w * (self.g)(x) * l(x)
                }).sum::<f64>();
        }
        legendre(|x| (self.g)(x) * self.weight(x), u, v, self.n)
    }
}

/// `int_lo^hi f(x) dx` for `f` with an integrable power singularity at
/// `lo` of unknown form, by geometric panels shrinking toward `lo`.
pub fn graded_left<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, n: usize) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    let mut total = 0.0;
    let mut right = hi;
    let floor = (hi - lo) * 1e-15;
    while right - lo > floor {
        let left = lo + 0.25 * (right - lo);
        total += legendre(&f, left, right, n);
        right = left;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    fn beta(x: f64, y: f64) -> f64 {
        (ln_gamma(x).unwrap() + ln_gamma(y).unwrap() - ln_gamma(x + y).unwrap()).exp()
    }

    #[test]
    fn legendre_exact_for_polynomials() {
        let got = legendre(|x| x.powi(19) + 3.0 * x.powi(4), 0.0, 1.0, 10);
        assert!((got - (1.0 / 20.0 + 3.0 / 5.0)).abs() < 1e-14);
    }

    #[test]
    fn jacobi_weights_sum_to_moment() {
        for (a, b) in [(0.0, 0.0), (-0.5, 0.3), (0.8, -0.4), (-0.7, -0.2)] {
            let rule = gauss_jacobi(12, a, b);
            let sum: f64 = rule.weights.iter().sum();
            let mu0 = 2f64.powf(a + b + 1.0) * beta(a + 1.0, b + 1.0);
            assert!((sum - mu0).abs() < 1e-13 * mu0, "a={a} b={b}");
            assert!(rule.nodes.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn beta_integral_both_weights() {
        // int_0^y x^k (y-x)^w dx = y^(k+w+1) B(k+1, w+1)
        for (k, w, y) in [(-0.4f64, -0.3f64, 1.0f64), (0.5, -0.8, 2.5), (-0.9, 0.2, 0.3)] {
            let want = y.powf(k + w + 1.0) * beta(k + 1.0, w + 1.0);
            let got = jacobi_integral(|_| 1.0, 0.0, y, k, w, &[], 16);
            assert!(((got - want) / want).abs() < 1e-13, "k={k} w={w}");
            let got_split = jacobi_integral(|_| 1.0, 0.0, y, k, w, &[0.37 * y, 0.999 * y], 16);
            assert!(((got_split - want) / want).abs() < 1e-11, "split k={k} w={w}: {got_split} vs {want}");
        }
    }

    #[test]
    fn smooth_factor_with_breaks() {
        // int_0^1 e^x (1-x)^(-1/2) dx = e sqrt(pi) erf(1)
        let want = std::f64::consts::E * std::f64::consts::PI.sqrt() * 0.842_700_792_949_714_9;
        let got = jacobi_integral(f64::exp, 0.0, 1.0, 0.0, -0.5, &[0.5, 0.9], 20);
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    }

    #[test]
    fn grading_handles_fractional_factor() {
        // g(x) = 1 + x^0.5 is not smooth at 0
        let want = beta(0.7, 0.6) + beta(1.2, 0.6);
        let plain = jacobi_integral(|x: f64| 1.0 + x.sqrt(), 0.0, 1.0, -0.3, -0.4, &[], 20);
        let graded = jacobi_integral_graded(|x: f64| 1.0 + x.sqrt(), 0.0, 1.0, -0.3, -0.4, &[], 20, 14);
        assert!((graded - want).abs() < 1e-12 * want, "{graded} vs {want}");
        assert!((graded - want).abs() < (plain - want).abs());
    }
}
