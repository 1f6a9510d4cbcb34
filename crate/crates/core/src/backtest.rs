//! Monte Carlo evaluation of stopping rules on simulated paths, paired
//! across rules, and the dual check of `V_1` through `H` along `Z`.

use rayon::prelude::*;
use serde::Serialize;

use crate::boundary::h_function;
use crate::distribution::SupremumDistribution;
use crate::error::{Error, Result};
use crate::params::ModelParams;
use crate::series::{a1_constant, eval_v1, SeriesSolution};
use crate::stable::{path_rng, simulate_sup, time_change, PathSample, StableSampler};

pub const MIN_PATHS: usize = 10_000;

const IDENTITY_TOL: f64 = 1e-5;
const S_FIRST: f64 = 1e-3;
const S_NODES: usize = 600;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum StoppingRule {
    /// Stop once `S - X >= z_star (T - t)^(1/alpha)`; `beta_star` gives the closed-form reference.
    OptimalBoundary { z_star: f64, beta_star: Option<f64> },
    StopAtZero,
    StopAtT,
    /// Stop once `S - X >= z`.
    FixedThreshold { z: f64 },
}

impl StoppingRule {
    pub fn name(&self) -> String {
        match self {
            StoppingRule::OptimalBoundary { .. } => "OPTIMAL_BOUNDARY".into(),
            StoppingRule::StopAtZero => "STOP_AT_ZERO".into(),
            StoppingRule::StopAtT => "STOP_AT_T".into(),
            StoppingRule::FixedThreshold { z } => format!("FIXED_THRESHOLD({z})"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            StoppingRule::OptimalBoundary { z_star, .. } if !(z_star > 0.0 && z_star.is_finite()) => {
                Err(Error::Domain(format!("boundary rule needs z_star > 0, got {z_star}")))
            }
            StoppingRule::FixedThreshold { z } if !(z >= 0.0 && z.is_finite()) => {
                Err(Error::Domain(format!("threshold must be nonnegative, got {z}")))
            }
            _ => Ok(()),
        }
    }

    /// Whether the rule stops at grid time `t` with drawdown `dd`.
    fn triggers(&self, dd: f64, t: f64, horizon: f64, inv_alpha: f64) -> bool {
        match *self {
            StoppingRule::OptimalBoundary { z_star, .. } => dd >= z_star * (horizon - t).max(0.0).powf(inv_alpha),
            StoppingRule::StopAtZero => true,
            StoppingRule::StopAtT => false,
            StoppingRule::FixedThreshold { z } => dd >= z,
        }
    }

    fn reference(&self, params: &ModelParams) -> Option<f64> {
        let scale = params.horizon.powf(params.p / params.alpha) * a1_constant(params);
        match *self {
            StoppingRule::StopAtT => Some(scale),
            StoppingRule::OptimalBoundary { beta_star: Some(b), .. } => Some(b * scale),
            _ => None,
        }
    }
}

/// First grid index where `rule` triggers (the last index if it never
/// does) and the loss `(S_T - X_stop)^p` with the full-path supremum.
pub fn apply_rule(rule: &StoppingRule, params: &ModelParams, path: &PathSample) -> (usize, f64) {
    let last = path.len() - 1;
    let inv_alpha = 1.0 / params.alpha;
    let stop = (0..last)
        .find(|&i| rule.triggers(path.s[i] - path.x[i], path.times[i], params.horizon, inv_alpha))
        .unwrap_or(last);
    (stop, (path.s[last] - path.x[stop]).powf(params.p))
}

#[derive(Debug, Clone, Serialize)]
pub struct BacktestReport {
    pub rule: StoppingRule,
    pub rule_name: String,
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
    pub loss_mean: f64,
    pub loss_stderr: f64,
    pub mean_stop_time: f64,
    pub fraction_stopped_before_t: f64,
    pub closed_form_reference: Option<f64>,
}

/// Mean and standard error of `b - a` for each listed pair of rule indices.
#[derive(Debug, Clone, Serialize)]
pub struct PairedDifference {
    pub rule: String,
    pub against: String,
    pub mean: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Comparison {
    pub params: ModelParams,
    pub reports: Vec<BacktestReport>,
    pub differences: Vec<PairedDifference>,
}

/// Per-path outcome for each rule: `(loss, stop time)`.
fn simulate_outcomes(params: &ModelParams, rules: &[StoppingRule], n_paths: usize, n_steps: usize, seed: u64) -> Vec<Vec<(f64, f64)>> {
    let sampler = StableSampler::new(params);
    let dt = params.horizon / n_steps as f64;
    let scale = sampler.step_scale(dt);
    let inv_alpha = 1.0 / params.alpha;
    // drawdown level at which each rule stops, per grid time
    let levels: Vec<Vec<f64>> = rules
        .iter()
        .map(|r| {
            (0..n_steps)
                .map(|k| match r {
                    StoppingRule::StopAtT => f64::INFINITY,
                    _ if r.triggers(0.0, k as f64 * dt, params.horizon, inv_alpha) => 0.0,
                    StoppingRule::OptimalBoundary { z_star, .. } => z_star * (params.horizon - k as f64 * dt).powf(inv_alpha),
                    StoppingRule::FixedThreshold { z } => *z,
                    StoppingRule::StopAtZero => 0.0,
                })
                .collect()
        })
        .collect();
    (0..n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(seed, i);
            let mut stop_x: Vec<Option<(f64, f64)>> = vec![None; rules.len()];
            let mut pending = rules.len();
            let (mut x, mut s) = (0.0f64, 0.0f64);
            for k in 0..n_steps {
                if pending > 0 {
                    for (lv, slot) in levels.iter().zip(stop_x.iter_mut()) {
                        if slot.is_none() && s - x >= lv[k] {
                            *slot = Some((x, k as f64 * dt));
                            pending -= 1;
                        }
                    }
                }
                x += scale * sampler.standard(&mut rng);
                s = s.max(x);
            }
            stop_x
                .iter()
                .map(|slot| {
                    let (xs, ts) = slot.unwrap_or((x, params.horizon));
                    ((s - xs).powf(params.p), ts)
                })
                .collect()
        })
        .collect()
}

/// Compensated sum in path order, independent of how the paths were scheduled.
fn mean_stderr(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut n, mut s, mut c, mut s2, mut c2) = (0usize, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let add = |sum: &mut f64, comp: &mut f64, v: f64| {
        let t = *sum + v;
        if sum.abs() >= v.abs() {
            *comp += (*sum - t) + v;
        } else {
            *comp += (v - t) + *sum;
        }
        *sum = t;
    };
    for v in values {
        n += 1;
        add(&mut s, &mut c, v);
        add(&mut s2, &mut c2, v * v);
    }
    let nf = n as f64;
    let mean = (s + c) / nf;
    let var = ((s2 + c2) / nf - mean * mean).max(0.0) * nf / (nf - 1.0);
    (mean, (var / nf).sqrt())
}

fn check_run(params: &ModelParams, rules: &[StoppingRule], n_paths: usize, n_steps: usize) -> Result<()> {
    params.validate()?;
    if n_paths < MIN_PATHS {
        return Err(Error::InsufficientSamples { got: n_paths, min: MIN_PATHS });
    }
    if n_steps < 1 {
        return Err(Error::Domain("n_steps must be positive".into()));
    }
    rules.iter().try_for_each(|r| r.validate())
}

/// All `rules` on the same `n_paths` paths, with paired differences of
/// every rule against the first.
pub fn compare(params: &ModelParams, rules: &[StoppingRule], n_paths: usize, n_steps: usize, seed: u64) -> Result<Comparison> {
    check_run(params, rules, n_paths, n_steps)?;
    if rules.is_empty() {
        return Err(Error::Domain("no rules to compare".into()));
    }
    let out = simulate_outcomes(params, rules, n_paths, n_steps, seed);
    let reports = rules
        .iter()
        .enumerate()
        .map(|(r, rule)| {
            let (loss_mean, loss_stderr) = mean_stderr(out.iter().map(|o| o[r].0));
            let (mean_stop_time, _) = mean_stderr(out.iter().map(|o| o[r].1));
            let early = out.iter().filter(|o| o[r].1 < params.horizon).count();
            BacktestReport {
                rule: *rule,
                rule_name: rule.name(),
                n_paths,
                n_steps,
                seed,
                loss_mean,
                loss_stderr,
                mean_stop_time,
                fraction_stopped_before_t: early as f64 / n_paths as f64,
                closed_form_reference: rule.reference(params),
            }
        })
        .collect();
    let differences = (1..rules.len())
        .map(|r| {
            let (mean, stderr) = mean_stderr(out.iter().map(|o| o[r].0 - o[0].0));
            PairedDifference { rule: rules[r].name(), against: rules[0].name(), mean, stderr }
        })
        .collect();
    Ok(Comparison { params: *params, reports, differences })
}

pub fn run_backtest(params: &ModelParams, rule: &StoppingRule, n_paths: usize, n_steps: usize, seed: u64) -> Result<BacktestReport> {
    Ok(compare(params, std::slice::from_ref(rule), n_paths, n_steps, seed)?.reports.remove(0))
}

/// `E (S_T - X_T)^p` estimated on the grid of `n_steps` and on its
/// `levels - 1` successive halvings, all from the same paths.
#[derive(Debug, Clone, Serialize)]
pub struct DiscretizationLadder {
    /// `(n_steps, mean, stderr)` from the finest grid down.
    pub rungs: Vec<(usize, f64, f64)>,
    /// `(mean, stderr)` of the paired difference between consecutive rungs.
    pub gaps: Vec<(f64, f64)>,
    pub reference: f64,
}

pub fn stop_at_t_ladder(params: &ModelParams, n_paths: usize, n_steps: usize, levels: usize, seed: u64) -> Result<DiscretizationLadder> {
    check_run(params, &[], n_paths, n_steps)?;
    if levels == 0 || !n_steps.is_multiple_of(1 << (levels - 1)) {
        return Err(Error::Domain(format!("n_steps = {n_steps} must be divisible by 2^{}", levels.max(1) - 1)));
    }
    let sampler = StableSampler::new(params);
    let scale = sampler.step_scale(params.horizon / n_steps as f64);
    let losses: Vec<Vec<f64>> = (0..n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut sups = vec![0.0; levels];
            let x = simulate_sup(&sampler, scale, n_steps, &mut sups, &mut path_rng(seed, i));
            sups.iter().map(|s| (s - x).powf(params.p)).collect()
        })
        .collect();
    let rungs = (0..levels)
        .map(|l| {
            let (m, se) = mean_stderr(losses.iter().map(|v| v[l]));
            (n_steps >> l, m, se)
        })
        .collect();
    let gaps = (1..levels).map(|l| mean_stderr(losses.iter().map(|v| v[l - 1] - v[l]))).collect();
    let reference = params.horizon.powf(params.p / params.alpha) * a1_constant(params);
    Ok(DiscretizationLadder { rungs, gaps, reference })
}

/// `H` tabulated on a log grid, linear in `log z` between nodes, with the
/// limits at 0 and infinity outside.
struct HTable {
    log_lo: f64,
    step: f64,
    values: Vec<f64>,
    at_zero: f64,
    tail_coef: f64,
    tail_exp: f64,
}

impl HTable {
    fn new(params: &ModelParams, dist: &SupremumDistribution, lo: f64, hi: f64, n: usize) -> Result<Self> {
        let (log_lo, log_hi) = (lo.ln(), hi.ln());
        let step = (log_hi - log_lo) / (n - 1) as f64;
        let values = (0..n)
            .into_par_iter()
            .map(|k| h_function(params, dist, (log_lo + k as f64 * step).exp()))
            .collect::<Result<Vec<_>>>()?;
        let tail_exp = params.p - params.alpha;
        Ok(HTable {
            log_lo,
            step,
            at_zero: -params.p * dist.gain(params.p, 0.0)?,
            tail_coef: values[n - 1] / hi.powf(tail_exp),
            tail_exp,
            values,
        })
    }

    fn eval(&self, z: f64) -> f64 {
        if z <= 0.0 {
            return self.at_zero;
        }
        let u = (z.ln() - self.log_lo) / self.step;
        if u <= 0.0 {
            return self.values[0];
        }
        let k = u.floor() as usize;
        if k + 1 >= self.values.len() {
            return self.tail_coef * z.powf(self.tail_exp);
        }
        let w = u - k as f64;
        (1.0 - w) * self.values[k] + w * self.values[k + 1]
    }

    fn sup_abs(&self) -> f64 {
        self.values.iter().fold(self.at_zero.abs(), |m, v| m.max(v.abs()))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentityCheck {
    pub z: f64,
    pub v1: f64,
    pub rhs: f64,
    pub residual: f64,
    pub stderr: f64,
    pub s_max: f64,
}

/// Monte Carlo of `G(z) + E int_0^inf e^(-p s) H(Z_s^z) ds` against `V_1(z)`,
/// with `Z_s^z = e^s (z v S_t(s) - X_t(s))` and `t(s) = 1 - e^(-alpha s)`.
/// The `s` integral uses the trapezoid rule on a geometric grid from
/// `S_FIRST`, cut where `e^(-p s) sup|H| / p < tol`. Paths advance in
/// steps of `(1 - t) / n_fine`.
#[allow(clippy::too_many_arguments)]
pub fn verify_identity_v1(
    params: &ModelParams,
    dist: &SupremumDistribution,
    series: &SeriesSolution,
    z: f64,
    n_paths: usize,
    n_fine: usize,
    seed: u64,
) -> Result<IdentityCheck> {
    let params = params.at_unit_horizon();
    params.validate()?;
    if n_paths < 100 || n_fine < 10 {
        return Err(Error::Domain("need at least 100 paths and 10 fine steps".into()));
    }
    let (alpha, p) = (params.alpha, params.p);
    let table = HTable::new(&params, dist, 1e-4, 1e4, 161)?;
    let s_max = ((table.sup_abs() / (p * IDENTITY_TOL)).ln() / p).max(1.0);
    let ratio = (s_max / S_FIRST).powf(1.0 / S_NODES as f64);
    let s_nodes: Vec<f64> = std::iter::once(0.0).chain((0..=S_NODES).map(|k| S_FIRST * ratio.powi(k as i32))).collect();
    let t_nodes: Vec<f64> = s_nodes.iter().map(|&s| time_change(alpha, s)).collect();
    let sampler = StableSampler::new(&params);
    let fine = 1.0 / n_fine as f64;
    let gz = dist.gain(p, z)?;
    let integrals: Vec<f64> = (0..n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(seed, i);
            let (mut t, mut x, mut s) = (0.0f64, 0.0f64, 0.0f64);
            let mut total = 0.0;
            let mut prev = None;
            for (k, &tk) in t_nodes.iter().enumerate() {
                // steps shrink with 1 - t so the resolution is uniform in s
                while t < tk {
                    let dt = (tk - t).min((1.0 - t) * fine);
                    x += sampler.step_scale(dt) * sampler.standard(&mut rng);
                    s = s.max(x);
                    t += dt;
                }
                let sk = s_nodes[k];
                let zk = sk.exp() * (z.max(s) - x);
                let f = (-p * sk).exp() * table.eval(zk);
                if let Some((sp, fp)) = prev {
                    total += 0.5 * (sk - sp) * (fp + f);
                }
                prev = Some((sk, f));
            }
            total
        })
        .collect();
    let (mean, stderr) = mean_stderr(integrals.into_iter());
    let v1 = eval_v1(series, z)?.value;
    let rhs = gz + mean;
    Ok(IdentityCheck { z, v1, rhs, residual: rhs - v1, stderr, s_max })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stable::simulate_path;

    fn params() -> ModelParams {
        ModelParams::unit(1.7, 1.0, 1.2).unwrap()
    }

    #[test]
    fn trivial_rules_on_a_path() {
        let pr = params();
        let path = simulate_path(&pr, 500, 4, &mut path_rng(4, 0));
        let last = path.len() - 1;
        let st = path.s[last];
        let (i, loss) = apply_rule(&StoppingRule::StopAtZero, &pr, &path);
        assert_eq!((i, loss), (0, st.powf(pr.p)));
        let (i, loss) = apply_rule(&StoppingRule::StopAtT, &pr, &path);
        assert_eq!((i, loss), (last, (st - path.x[last]).powf(pr.p)));
        let degenerate = StoppingRule::OptimalBoundary { z_star: 0.0, beta_star: None };
        assert_eq!(apply_rule(&degenerate, &pr, &path), (0, st.powf(pr.p)));
        assert!(degenerate.validate().is_err());
    }

    #[test]
    fn streaming_matches_stored_paths() {
        let pr = params();
        let rules = [StoppingRule::StopAtT, StoppingRule::OptimalBoundary { z_star: 0.8, beta_star: None }, StoppingRule::FixedThreshold { z: 0.5 }];
        let out = simulate_outcomes(&pr, &rules, 20, 300, 11);
        for (i, o) in out.iter().enumerate() {
            let path = simulate_path(&pr, 300, 11, &mut path_rng(11, i as u64));
            for (r, rule) in rules.iter().enumerate() {
                let (stop, loss) = apply_rule(rule, &pr, &path);
                assert_eq!(o[r].0, loss, "rule {r} path {i}");
                assert_eq!(o[r].1, if stop == path.len() - 1 { pr.horizon } else { path.times[stop] });
            }
        }
    }

    #[test]
    fn too_few_paths() {
        assert!(matches!(
            run_backtest(&params(), &StoppingRule::StopAtT, 10, 100, 1),
            Err(Error::InsufficientSamples { .. })
        ));
    }

    #[test]
    fn compensated_mean() {
        let (m, se) = mean_stderr([1.0, 2.0, 3.0, 4.0].into_iter());
        assert_eq!(m, 2.5);
        assert!((se - (1.25f64 * 4.0 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
    }
}
