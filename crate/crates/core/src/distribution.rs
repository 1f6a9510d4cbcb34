//! Law of `S_1 = sup_{t <= 1} X_t` by Monte Carlo, with both tails pinned
//! to their power laws, and the gain function `G(z) = E (z v S_1)^p`.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::params::ModelParams;
use crate::quadrature::legendre;
use crate::special::GammaValue;
use crate::stable::{path_rng, simulate_sup, StableSampler};

pub const FORMAT_VERSION: u32 = 2;
pub const MIN_PATHS: usize = 10_000;
pub const MIN_STEPS: usize = 1_000;
pub const DEFAULT_PATHS: usize = 40_000;
pub const DEFAULT_STEPS: usize = 2_000;
pub const DEFAULT_SEED: u64 = 20_240_601;
pub const DEFAULT_BLEND_LO: f64 = 0.2;
pub const DEFAULT_BLEND_HI: f64 = 0.998;
/// Window of `z` used for the lower tail slope.
pub const LOWER_SLOPE_WINDOW: (f64, f64) = (0.05, 0.2);

const PIECE_NODES: usize = 8;
/// Width, as a ratio in `z`, of the windows in which the empirical model hands over to the tails.
const MIX_RATIO: f64 = 2.0;
const MIX_CHECK_POINTS: usize = 200;

/// Simulation inputs; together with `alpha` and `c` they determine the estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McSpec {
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
    /// Probability levels of `blend_lo` and `blend_hi`.
    pub blend_lo_q: f64,
    pub blend_hi_q: f64,
}

impl Default for McSpec {
    fn default() -> Self {
        McSpec {
            n_paths: DEFAULT_PATHS,
            n_steps: DEFAULT_STEPS,
            seed: DEFAULT_SEED,
            blend_lo_q: DEFAULT_BLEND_LO,
            blend_hi_q: DEFAULT_BLEND_HI,
        }
    }
}

impl McSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_paths < MIN_PATHS {
            return Err(Error::InsufficientSamples { got: self.n_paths, min: MIN_PATHS });
        }
        if self.n_steps < MIN_STEPS {
            return Err(Error::Domain(format!("n_steps = {} below {MIN_STEPS}", self.n_steps)));
        }
        if !(0.0 < self.blend_lo_q && self.blend_lo_q < self.blend_hi_q && self.blend_hi_q < 1.0) {
            return Err(Error::Domain(format!(
                "blend levels {} < {} must lie inside (0, 1)",
                self.blend_lo_q, self.blend_hi_q
            )));
        }
        Ok(())
    }
}

/// Monotone cubic model of `F_{S_1}` between `blend_lo` and `blend_hi`,
/// power laws outside. Within `[blend_lo, mix_lo]` and `[mix_hi, blend_hi]`
/// the cubic is mixed into the power law with a smooth weight in `log z`.
#[derive(Debug, Clone)]
pub struct SupremumDistribution {
    pub alpha: f64,
    pub c: f64,
    pub spec: McSpec,
    /// Sorted grid suprema of the simulated paths.
    pub samples: Vec<f64>,
    pub grid: Vec<f64>,
    pub cdf: Vec<f64>,
    pub pdf: Vec<f64>,
    pub blend_lo: f64,
    pub blend_hi: f64,
    /// `F ~ lo_const z^(alpha-1)` near 0.
    pub lo_const: f64,
    /// Relative gap between the empirical and asymptotic `F` (lower) and `1 - F` (upper) at the blend points.
    pub blend_gap_lo: f64,
    pub blend_gap_hi: f64,
    pub mix_lo: f64,
    pub mix_hi: f64,
}

/// `1 / ((c Gamma(-alpha))^(1 - 1/alpha) Gamma(alpha) Gamma(1/alpha))`.
pub fn lower_tail_const(alpha: f64, c: f64) -> Result<f64> {
    let k = GammaValue::of(-alpha)?;
    let log = (1.0 - 1.0 / alpha) * (c.ln() + k.log_abs) + GammaValue::of(alpha)?.log_abs + GammaValue::of(1.0 / alpha)?.log_abs;
    Ok((-log).exp())
}

/// Grid suprema of `n_paths` unit-horizon paths, sorted.
pub fn simulate_suprema(params: &ModelParams, spec: &McSpec) -> Vec<f64> {
    let sampler = StableSampler::new(params);
    let scale = sampler.step_scale(1.0 / spec.n_steps as f64);
    let mut out: Vec<f64> = (0..spec.n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut sups = [0.0];
            simulate_sup(&sampler, scale, spec.n_steps, &mut sups, &mut path_rng(spec.seed, i));
            sups[0]
        })
        .collect();
    out.sort_by(f64::total_cmp);
    out
}

pub fn estimate_distribution(params: &ModelParams, spec: &McSpec) -> Result<SupremumDistribution> {
    params.validate()?;
    spec.validate()?;
    let samples = simulate_suprema(&params.at_unit_horizon(), spec);
    SupremumDistribution::from_samples(params.alpha, params.c, *spec, samples)
}

/// Fritsch-Butland slopes, with the usual three-point end slopes clipped to `[0, 3 delta]`.
fn pchip_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
    let mut d = vec![0.0; n];
    for k in 1..n - 1 {
        if delta[k - 1] > 0.0 && delta[k] > 0.0 {
            let (w1, w2) = (2.0 * h[k] + h[k - 1], h[k] + 2.0 * h[k - 1]);
            d[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
        }
    }
    let end = |h0: f64, h1: f64, d0: f64, d1: f64| (((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1)).clamp(0.0, 3.0 * d0);
    d[0] = end(h[0], h[1], delta[0], delta[1]);
    d[n - 1] = end(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    d
}

/// Quintic step on `[0, 1]` and its derivative.
fn smooth_step(u: f64) -> (f64, f64) {
    let u = u.clamp(0.0, 1.0);
    (u * u * u * (10.0 - 15.0 * u + 6.0 * u * u), 30.0 * u * u * (1.0 - u) * (1.0 - u))
}

fn fit_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 3 {
        return None;
    }
    let n = points.len() as f64;
    let (mx, my) = points.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x / n, b + y / n));
    let (sxy, sxx) = points.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + (x - mx) * (y - my), b + (x - mx) * (x - mx)));
    (sxx > 0.0).then(|| sxy / sxx)
}

impl SupremumDistribution {
    /// Build the model from sorted suprema.
    pub fn from_samples(alpha: f64, c: f64, spec: McSpec, samples: Vec<f64>) -> Result<Self> {
        spec.validate()?;
        if samples.len() != spec.n_paths {
            return Err(Error::Format(format!("{} samples for n_paths = {}", samples.len(), spec.n_paths)));
        }
        if samples.windows(2).any(|w| w[0] > w[1]) || samples[0] < 0.0 {
            return Err(Error::Format("samples must be nonnegative and sorted".into()));
        }
        let n = samples.len();
        let lo_const = lower_tail_const(alpha, c)?;
        let quantile = |q: f64| samples[((q * n as f64) as usize).min(n - 1)];
        let (blend_lo, blend_hi) = (quantile(spec.blend_lo_q), quantile(spec.blend_hi_q));
        if !(blend_lo > 0.0) {
            return Err(Error::Format(format!(
                "the {} quantile of the grid suprema is 0; raise n_steps or blend_lo",
                spec.blend_lo_q
            )));
        }
        let asym_lo = lo_const * blend_lo.powf(alpha - 1.0);
        let asym_hi = 1.0 - c / (alpha * blend_hi.powf(alpha));
        let blend_gap_lo = (asym_lo - spec.blend_lo_q).abs() / spec.blend_lo_q;
        let blend_gap_hi = ((1.0 - asym_hi) - (1.0 - spec.blend_hi_q)).abs() / (1.0 - spec.blend_hi_q);

        let nodes = (n / 200).clamp(50, 400);
        let mut keep_x: Vec<f64> = Vec::with_capacity(nodes + 1);
        let mut keep_y: Vec<f64> = Vec::with_capacity(nodes + 1);
        for j in 0..=nodes {
            let q = spec.blend_lo_q + (spec.blend_hi_q - spec.blend_lo_q) * j as f64 / nodes as f64;
            let m = ((q * n as f64) as usize).min(n - 1);
            let (x, y) = (samples[m], (m as f64 + 0.5) / n as f64);
            // keep strictly increasing nodes
            if keep_x.last().is_none_or(|&lx| x > lx) {
                keep_x.push(x);
                keep_y.push(y);
            }
        }
        if keep_x.len() < 4 {
            return Err(Error::Format("too few distinct interpolation nodes".into()));
        }
        let mix_lo = keep_x.iter().copied().find(|&x| x >= MIX_RATIO * blend_lo).unwrap_or(blend_hi);
        let mix_hi = keep_x.iter().rev().copied().find(|&x| x <= blend_hi / MIX_RATIO).unwrap_or(blend_lo);
        if !(mix_lo < mix_hi) {
            return Err(Error::Format(format!(
                "blend range [{blend_lo}, {blend_hi}] too narrow for the tail hand-over windows"
            )));
        }
        let pdf = pchip_slopes(&keep_x, &keep_y);
        let d = SupremumDistribution {
            alpha,
            c,
            spec,
            samples,
            grid: keep_x,
            cdf: keep_y,
            pdf,
            blend_lo,
            blend_hi,
            lo_const,
            blend_gap_lo,
            blend_gap_hi,
            mix_lo,
            mix_hi,
        };
        for (a, b) in [(blend_lo, mix_lo), (mix_hi, blend_hi)] {
            for k in 0..=MIX_CHECK_POINTS {
                let z = a * (b / a).powf(k as f64 / MIX_CHECK_POINTS as f64);
                if d.pdf(z) < 0.0 {
                    return Err(Error::Format(format!(
                        "tail hand-over is not monotone at z = {z}; adjust blend levels (gaps {blend_gap_lo:.3}, {blend_gap_hi:.3})"
                    )));
                }
            }
        }
        Ok(d)
    }
    fn piece(&self, z: f64) -> usize {
        self.grid.partition_point(|&g| g <= z).clamp(1, self.grid.len() - 1) - 1
    }

    fn hermite(&self, k: usize, z: f64) -> (f64, f64) {
        let (x0, x1) = (self.grid[k], self.grid[k + 1]);
        let h = x1 - x0;
        let t = (z - x0) / h;
        let (y0, y1, d0, d1) = (self.cdf[k], self.cdf[k + 1], self.pdf[k] * h, self.pdf[k + 1] * h);
        let (t2, t3) = (t * t, t * t * t);
        let v = (2.0 * t3 - 3.0 * t2 + 1.0) * y0 + (t3 - 2.0 * t2 + t) * d0 + (-2.0 * t3 + 3.0 * t2) * y1 + (t3 - t2) * d1;
        let dv = (6.0 * t2 - 6.0 * t) * y0 + (3.0 * t2 - 4.0 * t + 1.0) * d0 + (6.0 * t - 6.0 * t2) * y1 + (3.0 * t2 - 2.0 * t) * d1;
        (v, dv / h)
    }

    /// `(F, f)` on `[blend_lo, blend_hi]`, mixing into the tails near both ends.
    fn inner(&self, z: f64) -> (f64, f64) {
        let (e, de) = self.hermite(self.piece(z), z);
        if z < self.mix_lo {
            let span = (self.mix_lo / self.blend_lo).ln();
            let (w, dw) = smooth_step((z / self.blend_lo).ln() / span);
            let a = self.lo_const * z.powf(self.alpha - 1.0);
            let da = (self.alpha - 1.0) * a / z;
            (a + w * (e - a), da + w * (de - da) + dw / (z * span) * (e - a))
        } else if z > self.mix_hi {
            let (s, ds) = self.upper_mix(z, e, de);
            (1.0 - s, -ds)
        } else {
            (e, de)
        }
    }

    /// Survival and its derivative in the upper hand-over window.
    fn upper_mix(&self, z: f64, e: f64, de: f64) -> (f64, f64) {
        let span = (self.blend_hi / self.mix_hi).ln();
        let (w, dw) = smooth_step((z / self.mix_hi).ln() / span);
        let (se, dse) = (1.0 - e, -de);
        let sa = self.c / (self.alpha * z.powf(self.alpha));
        let dsa = -self.alpha * sa / z;
        (se + w * (sa - se), dse + w * (dsa - dse) + dw / (z * span) * (sa - se))
    }

    /// `F_{S_1}(z)`.
    pub fn cdf(&self, z: f64) -> f64 {
        if z <= 0.0 {
            0.0
        } else if z < self.blend_lo {
            (self.lo_const * z.powf(self.alpha - 1.0)).min(1.0)
        } else if z > self.blend_hi {
            1.0 - self.c / (self.alpha * z.powf(self.alpha))
        } else {
            self.inner(z).0.clamp(0.0, 1.0)
        }
    }

    /// `1 - F_{S_1}(z)` without cancellation in the upper tail.
    pub fn survival(&self, z: f64) -> f64 {
        if z > self.blend_hi {
            self.c / (self.alpha * z.powf(self.alpha))
        } else if z > self.mix_hi {
            let (e, de) = self.hermite(self.piece(z), z);
            self.upper_mix(z, e, de).0.clamp(0.0, 1.0)
        } else {
            1.0 - self.cdf(z)
        }
    }

    /// `f_{S_1}(z)`; infinite at 0.
    pub fn pdf(&self, z: f64) -> f64 {
        if z < 0.0 {
            0.0
        } else if z < self.blend_lo {
            (self.alpha - 1.0) * self.lo_const * z.powf(self.alpha - 2.0)
        } else if z > self.blend_hi {
            self.c * z.powf(-1.0 - self.alpha)
        } else {
            self.inner(z).1
        }
    }

    /// `z^(2-alpha) f(z)`, finite at 0.
    pub fn pdf_scaled(&self, z: f64) -> f64 {
        if z < self.blend_lo {
            (self.alpha - 1.0) * self.lo_const
        } else {
            z.powf(2.0 - self.alpha) * self.pdf(z)
        }
    }

    /// Empirical quantile of the simulated suprema.
    pub fn quantile(&self, q: f64) -> f64 {
        let n = self.samples.len();
        self.samples[((q.clamp(0.0, 1.0) * n as f64) as usize).min(n - 1)]
    }

    /// `int_z^inf p x^(p-1) (1 - F(x)) dx`.
    fn upper_integral(&self, p: f64, z: f64) -> f64 {
        let (lo, hi, a) = (self.blend_lo, self.blend_hi, self.alpha);
        let mut total = 0.0;
        if z < lo {
            let e = p + a - 1.0;
            total += (lo.powf(p) - z.powf(p)) - self.lo_const * p / e * (lo.powf(e) - z.powf(e));
        }
        if z < hi {
            let start = z.max(lo);
            let k0 = self.piece(start);
            let f = |x: f64| p * x.powf(p - 1.0) * self.survival(x);
            total += legendre(f, start, self.grid[k0 + 1], PIECE_NODES);
            for k in k0 + 1..self.grid.len() - 1 {
                total += legendre(f, self.grid[k], self.grid[k + 1], PIECE_NODES);
            }
        }
        total + self.c * p / (a * (a - p)) * z.max(hi).powf(p - a)
    }

    /// `G(z) = z^p + int_(z^p)^inf (1 - F(w^(1/p))) dw`.
    pub fn gain(&self, p: f64, z: f64) -> Result<f64> {
        self.check_p(p)?;
        if !(z >= 0.0) {
            return Err(Error::Domain(format!("z = {z} must be nonnegative")));
        }
        let v = z.powf(p) + self.upper_integral(p, z);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::QuadratureFailure(format!("G({z}) = {v} for p = {p}, blend [{}, {}]", self.blend_lo, self.blend_hi)))
        }
    }

    /// `(G'(z), G''(z))`.
    pub fn gain_derivs(&self, p: f64, z: f64) -> Result<(f64, f64)> {
        self.check_p(p)?;
        if !(z > 0.0) {
            return Err(Error::Domain(format!("z = {z} must be positive")));
        }
        let f = self.cdf(z);
        let g1 = p * z.powf(p - 1.0) * f;
        let g2 = p * (p - 1.0) * z.powf(p - 2.0) * f + p * z.powf(p - 1.0) * self.pdf(z);
        Ok((g1, g2))
    }

    fn check_p(&self, p: f64) -> Result<()> {
        if !(p > 1.0 && p < self.alpha) {
            return Err(Error::Domain(format!("p = {p} must lie in (1, alpha = {})", self.alpha)));
        }
        Ok(())
    }

    /// Sample mean of `(z v S_1)^p` and its standard error.
    pub fn sample_mean_pow(&self, p: f64, z: f64) -> (f64, f64) {
        let n = self.samples.len() as f64;
        let (s, s2) = self.samples.iter().fold((0.0, 0.0), |(a, b), &x| {
            let v = x.max(z).powf(p);
            (a + v, b + v * v)
        });
        let mean = s / n;
        (mean, ((s2 / n - mean * mean).max(0.0) / (n - 1.0)).sqrt())
    }

    /// Least-squares slope of `log(1 - F)` against `log z` over the
    /// empirical decade of survival probabilities `[100/n, 1000/n]`.
    pub fn upper_tail_slope(&self) -> Option<f64> {
        let n = self.samples.len();
        let pts: Vec<(f64, f64)> = (100..=1000.min(n - 1))
            .map(|r| (self.samples[n - r].ln(), (r as f64 / n as f64).ln()))
            .collect();
        fit_slope(&pts)
    }

    /// Least-squares slope of `log F` against `log z` for `z` in [`LOWER_SLOPE_WINDOW`].
    pub fn lower_tail_slope(&self) -> Option<f64> {
        let n = self.samples.len() as f64;
        let (a, b) = LOWER_SLOPE_WINDOW;
        let pts: Vec<(f64, f64)> = self
            .samples
            .iter()
            .enumerate()
            .filter(|(_, &x)| x >= a && x <= b)
            .map(|(m, &x)| (x.ln(), ((m as f64 + 0.5) / n).ln()))
            .collect();
        fit_slope(&pts)
    }

    pub fn header(&self) -> CacheHeader {
        CacheHeader { format_version: FORMAT_VERSION, alpha: self.alpha, c: self.c, spec: self.spec }
    }

    /// Header line in JSON, then one sample per line.
    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        let tmp = path.with_extension("tmp");
        {
            let mut w = BufWriter::new(fs::File::create(&tmp)?);
            writeln!(w, "{}", serde_json::to_string(&self.header())?)?;
            writeln!(w, "sup")?;
            for s in &self.samples {
                writeln!(w, "{s}")?;
            }
            w.flush()?;
        }
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut lines = BufReader::new(fs::File::open(path)?).lines();
        let head = lines.next().ok_or_else(|| Error::Format("empty cache file".into()))??;
        let header: CacheHeader = serde_json::from_str(&head)?;
        if header.format_version != FORMAT_VERSION {
            return Err(Error::Format(format!(
                "cache format {} but this build reads {FORMAT_VERSION}",
                header.format_version
            )));
        }
        match lines.next() {
            Some(Ok(l)) if l == "sup" => {}
            _ => return Err(Error::Format("missing column header".into())),
        }
        let mut samples = Vec::with_capacity(header.spec.n_paths);
        for line in lines {
            let line = line?;
            samples.push(line.trim().parse::<f64>().map_err(|e| Error::Format(format!("bad sample {line:?}: {e}")))?);
        }
        Self::from_samples(header.alpha, header.c, header.spec, samples)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CacheHeader {
    pub format_version: u32,
    pub alpha: f64,
    pub c: f64,
    pub spec: McSpec,
}

/// Content hash of everything that determines an estimate.
pub fn cache_key(alpha: f64, c: f64, spec: &McSpec) -> String {
    let text = format!(
        "v{FORMAT_VERSION}|{:016x}|{:016x}|{}|{}|{}|{:016x}|{:016x}",
        alpha.to_bits(),
        c.to_bits(),
        spec.n_paths,
        spec.n_steps,
        spec.seed,
        spec.blend_lo_q.to_bits(),
        spec.blend_hi_q.to_bits()
    );
    let digest = Sha256::digest(text.as_bytes());
    digest.iter().take(16).map(|b| format!("{b:02x}")).collect()
}

/// Load the estimate from `dir` if present, otherwise simulate and store it.
pub fn load_or_estimate(params: &ModelParams, spec: &McSpec, dir: Option<&Path>) -> Result<SupremumDistribution> {
    let Some(dir) = dir else {
        return estimate_distribution(params, spec);
    };
    let path = dir.join(format!("sup-{}.csv", cache_key(params.alpha, params.c, spec)));
    if path.exists() {
        if let Ok(d) = SupremumDistribution::load(&path) {
            if d.header() == (CacheHeader { format_version: FORMAT_VERSION, alpha: params.alpha, c: params.c, spec: *spec }) {
                return Ok(d);
            }
        }
    }
    let d = estimate_distribution(params, spec)?;
    d.save(&path)?;
    Ok(d)
}
