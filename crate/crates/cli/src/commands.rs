use std::path::Path;

use serde::Serialize;
use supstop_core::backtest::{compare as compare_rules, run_backtest, BacktestReport, StoppingRule};
use supstop_core::boundary::{h_function, optimal_value, solve_boundary, BoundarySolution};
use supstop_core::distribution::{load_or_estimate, SupremumDistribution};
use supstop_core::fracops::{caputo_ly, ito_ly, rl_ly, TestFunction};
use supstop_core::regime::{alpha_star_cached, classify as classify_params, frontier as frontier_points, Regime, RegimeReport};
use supstop_core::series::{build_series, build_series_auto, eval_v1, SeriesSolution, DEFAULT_TOL};
use supstop_core::{Error, ModelParams};

use crate::config::RunConfig;
use crate::output::{json, num, opt, Csv};
use crate::{CliError, RuleKind};

/// Largest radius the series is certified on for `solve` and `backtest`.
const SERIES_CAP: f64 = 100.0;

pub fn classify(cfg: &RunConfig) -> Result<String, CliError> {
    let params = cfg.params()?;
    json("classify", None, Some(params), classify_params(&params)?)
}

pub fn frontier(n: usize) -> Result<String, CliError> {
    if n == 0 {
        return Err(CliError::Usage("--n must be positive".into()));
    }
    let mut csv = Csv::new("frontier", None, None, &["alpha", "p_star"]);
    csv.comment(&format!("alpha_star={}", num(alpha_star_cached()?)));
    for (alpha, p) in frontier_points(n)? {
        csv.row([num(alpha), num(p)]);
    }
    Ok(csv.finish())
}

struct Solved {
    params: ModelParams,
    dist: SupremumDistribution,
    series: SeriesSolution,
    solution: BoundarySolution,
}

/// classify, then the cached distribution, the series and the boundary.
fn solve_pipeline(cfg: &RunConfig) -> Result<Solved, CliError> {
    let params = cfg.params()?;
    let report = classify_params(&params)?;
    if report.regime == Regime::NoLargeZStopping {
        return Err(Error::Regime(format!(
            "no-boundary regime: ell({}, {}) = {:.6} < 0, stopping is never optimal when S - X is large",
            params.alpha, params.p, report.ell_value
        ))
        .into());
    }
    let dist = load_or_estimate(&params, &cfg.mc, cfg.cache_dir.as_deref())?;
    let series = build_series_auto(&params, SERIES_CAP)?;
    let solution = solve_boundary(&params, &dist, &series, cfg.tol)?;
    Ok(Solved { params, dist, series, solution })
}

#[derive(Serialize)]
struct SolveOutput<'a> {
    mc: supstop_core::distribution::McSpec,
    optimal_value: f64,
    solution: &'a BoundarySolution,
}

pub fn solve(cfg: &RunConfig, curve: Option<&Path>, points: usize) -> Result<String, CliError> {
    let s = solve_pipeline(cfg)?;
    if let Some(path) = curve {
        let mut csv = Csv::new("solve", Some(cfg.mc.seed), Some(&s.params), &["z", "gain", "beta_v1", "h"]);
        let top = (2.0 * s.solution.z_star).min(s.series.z_max);
        for k in 0..points.max(2) {
            let z = top * k as f64 / (points.max(2) - 1) as f64;
            let v1 = eval_v1(&s.series, z)?.value;
            // H at the origin is its limit -p G(0)
            let h = if z > 0.0 { h_function(&s.params, &s.dist, z)? } else { -s.params.p * s.dist.gain(s.params.p, 0.0)? };
            csv.row([
                num(z),
                num(s.dist.gain(s.params.p, z)?),
                num(s.solution.beta_star * v1),
                num(h),
            ]);
        }
        crate::output::emit(&csv.finish(), Some(path))?;
    }
    let out = SolveOutput { mc: cfg.mc, optimal_value: optimal_value(&s.params, &s.solution), solution: &s.solution };
    json("solve", Some(cfg.mc.seed), Some(s.params), out)
}

pub fn series_dump(cfg: &RunConfig, z_max: f64) -> Result<String, CliError> {
    let params = cfg.params()?;
    let series = build_series(&params, z_max, DEFAULT_TOL)?;
    let mut csv = Csv::new("series dump", None, Some(&params), &["n", "exponent", "coefficient", "log_abs", "sign"]);
    csv.comment(&format!("z_max={} n_terms={} tail_bound={}", num(series.z_max), series.n_terms, num(series.tail_bound)));
    for n in 0..series.n_terms {
        csv.row([
            n.to_string(),
            num(params.alpha * n as f64),
            num(series.coeffs[n]),
            num(series.log_abs[n]),
            num(series.signs[n]),
        ]);
    }
    Ok(csv.finish())
}

pub fn fracop_eval(cfg: &RunConfig, function: &str, from: f64, to: f64, points: usize) -> Result<String, CliError> {
    let alpha = cfg.alpha()?;
    let functions: Vec<TestFunction> = if function == "all" {
        TestFunction::ALL.to_vec()
    } else {
        vec![TestFunction::from_name(function).ok_or_else(|| CliError::Usage(format!("unknown test function {function:?}")))?]
    };
    if !(from > 0.0 && to >= from) || points == 0 {
        return Err(CliError::Usage("need 0 < from <= to and points > 0".into()));
    }
    let mut csv = Csv::new("fracop eval", None, None, &["function", "y", "ito", "rl", "caputo"]);
    csv.comment(&format!("alpha={alpha} c={}", cfg.c));
    for f in functions {
        for k in 0..points {
            let y = if points == 1 { from } else { from + (to - from) * k as f64 / (points - 1) as f64 };
            csv.row([
                f.name().to_string(),
                num(y),
                num(ito_ly(&f, y, alpha, cfg.c)?),
                num(rl_ly(&f, y, alpha, cfg.c)?),
                num(caputo_ly(&f, y, alpha, cfg.c)?),
            ]);
        }
    }
    Ok(csv.finish())
}

#[derive(Serialize)]
struct BacktestOutput {
    mc: Option<supstop_core::distribution::McSpec>,
    report: BacktestReport,
}

pub fn backtest(cfg: &RunConfig, kind: RuleKind, z: Option<f64>) -> Result<String, CliError> {
    let params = cfg.params()?;
    let (rule, mc) = match kind {
        RuleKind::Optimal => {
            let s = solve_pipeline(cfg)?;
            (StoppingRule::OptimalBoundary { z_star: s.solution.z_star, beta_star: Some(s.solution.beta_star) }, Some(cfg.mc))
        }
        RuleKind::StopAtZero => (StoppingRule::StopAtZero, None),
        RuleKind::StopAtT => (StoppingRule::StopAtT, None),
        RuleKind::Fixed => {
            let z = z.ok_or_else(|| CliError::Usage("--rule fixed needs --z".into()))?;
            (StoppingRule::FixedThreshold { z }, None)
        }
    };
    let report = run_backtest(&params, &rule, cfg.paths, cfg.steps, cfg.seed)?;
    json("backtest", Some(cfg.seed), Some(params), BacktestOutput { mc, report })
}

pub fn compare(cfg: &RunConfig, thresholds: &[f64]) -> Result<String, CliError> {
    let params = cfg.params()?;
    let report: RegimeReport = classify_params(&params)?;
    let mut rules = Vec::new();
    let mut notes = vec![format!("regime={}", report.regime.as_str())];
    if report.regime == Regime::BoundaryExists {
        let s = solve_pipeline(cfg)?;
        notes.push(format!("z_star={} beta_star={} mc_seed={}", num(s.solution.z_star), num(s.solution.beta_star), cfg.mc.seed));
        rules.push(StoppingRule::OptimalBoundary { z_star: s.solution.z_star, beta_star: Some(s.solution.beta_star) });
    }
    rules.push(StoppingRule::StopAtZero);
    rules.push(StoppingRule::StopAtT);
    rules.extend(thresholds.iter().map(|&z| StoppingRule::FixedThreshold { z }));
    let cmp = compare_rules(&params, &rules, cfg.paths, cfg.steps, cfg.seed)?;
    let mut csv = Csv::new(
        "compare",
        Some(cfg.seed),
        Some(&params),
        &[
            "rule",
            "loss_mean",
            "loss_stderr",
            "mean_stop_time",
            "fraction_stopped_before_t",
            "closed_form_reference",
            "diff_vs_first",
            "diff_stderr",
        ],
    );
    for n in &notes {
        csv.comment(n);
    }
    csv.comment(&format!("paths={} steps={}", cfg.paths, cfg.steps));
    for (k, r) in cmp.reports.iter().enumerate() {
        let (d, se) = if k == 0 { (0.0, 0.0) } else { (cmp.differences[k - 1].mean, cmp.differences[k - 1].stderr) };
        csv.row([
            r.rule_name.clone(),
            num(r.loss_mean),
            num(r.loss_stderr),
            num(r.mean_stop_time),
            num(r.fraction_stopped_before_t),
            opt(r.closed_form_reference),
            num(d),
            num(se),
        ]);
    }
    Ok(csv.finish())
}

pub fn selftest() -> Result<String, CliError> {
    let (text, ok) = crate::selftest::run();
    if ok {
        Ok(text)
    } else {
        Err(CliError::Failed(format!("selftest failed\n{text}")))
    }
}
