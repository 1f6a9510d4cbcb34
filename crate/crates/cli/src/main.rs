//! `supstop`: command-line front end for `supstop-core`.

// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod output;
mod selftest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{FileConfig, Overrides, RunConfig};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(supstop_core::Error),
    /// Selftest or similar check that ran but did not pass.
    Failed(String),
}

impl From<supstop_core::Error> for CliError {
    fn from(e: supstop_core::Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(e) if e.is_domain() => 2,
            CliError::Core(_) | CliError::Failed(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Failed(m) => write!(f, "{m}"),
        }
    }
}

const AFTER_HELP: &str = "\
Exit codes: 0 success, 1 usage error, 2 domain or regime error, 3 numerical failure.

CSV outputs start with `#` lines carrying format_version, build id, seed and parameters.
  frontier:     alpha,p_star
  solve:        z,gain,beta_v1,h            (--curve FILE)
  series dump:  n,exponent,coefficient,log_abs,sign
  fracop eval:  function,y,ito,rl,caputo
  compare:      rule,loss_mean,loss_stderr,mean_stop_time,fraction_stopped_before_t,
                closed_form_reference,diff_vs_first,diff_stderr

The distribution cache lives in --cache-dir, else $SUPSTOP_CACHE_DIR, else the
system temp directory; --no-cache rebuilds without reading or writing it.";

#[derive(Debug, Parser)]
#[command(name = "supstop", version = output::BUILD_ID, about = "Optimal prediction of the ultimate supremum of a spectrally positive stable process", after_help = AFTER_HELP)]
struct Cli {
    /// JSON config file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Write the main output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Default, Args)]
struct ModelArgs {
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    p: Option<f64>,
    /// Jump intensity (default 1).
    #[arg(long)]
    c: Option<f64>,
    /// Horizon (default 1).
    #[arg(long = "T")]
    horizon: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
struct McArgs {
    /// Paths for the supremum distribution.
    #[arg(long)]
    mc_paths: Option<usize>,
    /// Steps per path for the supremum distribution.
    #[arg(long)]
    mc_steps: Option<usize>,
    /// Seed for the supremum distribution.
    #[arg(long)]
    mc_seed: Option<u64>,
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    #[arg(long)]
    no_cache: bool,
    /// Boundary solver tolerance.
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
struct BacktestArgs {
    /// Backtest paths.
    #[arg(long)]
    paths: Option<usize>,
    /// Backtest grid steps.
    #[arg(long)]
    steps: Option<usize>,
    /// Seed for the backtest paths.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum RuleKind {
    Optimal,
    StopAtZero,
    StopAtT,
    Fixed,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Regime of (alpha, p): sign of ell, p_star(alpha), alpha_star.
    Classify {
        #[command(flatten)]
        model: ModelArgs,
    },
    /// CSV of (alpha, p_star(alpha)) on a uniform alpha grid above alpha_star.
    Frontier {
        #[arg(long, default_value_t = 50)]
        n: usize,
    },
    /// Free boundary z_star and beta_star by smooth fit.
    Solve {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        mc: McArgs,
        /// CSV of (z, G, beta V1, H) for plotting.
        #[arg(long)]
        curve: Option<PathBuf>,
        #[arg(long, default_value_t = 200)]
        curve_points: usize,
    },
    /// Series coefficients.
    Series {
        #[command(subcommand)]
        action: SeriesAction,
    },
    /// Generator forms on built-in test functions.
    Fracop {
        #[command(subcommand)]
        action: FracopAction,
    },
    /// One stopping rule on simulated paths.
    Backtest {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        mc: McArgs,
        #[command(flatten)]
        bt: BacktestArgs,
        #[arg(long, value_enum)]
        rule: RuleKind,
        /// Threshold for `--rule fixed`.
        #[arg(long)]
        z: Option<f64>,
    },
    /// All rules on the same paths, as a CSV table.
    Compare {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        mc: McArgs,
        #[command(flatten)]
        bt: BacktestArgs,
        /// Extra fixed thresholds, comma separated.
        #[arg(long, value_delimiter = ',')]
        thresholds: Vec<f64>,
    },
    /// Quick invariant checks.
    Selftest,
}

#[derive(Debug, Subcommand)]
enum SeriesAction {
    Dump {
        #[command(flatten)]
        model: ModelArgs,
        /// Radius to certify the series on.
        #[arg(long, default_value_t = 10.0)]
        z_max: f64,
    },
}

#[derive(Debug, Subcommand)]
enum FracopAction {
    Eval {
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        c: Option<f64>,
        /// Test function: const, square, cos, gauss, square-exp, bump or all.
        #[arg(long, default_value = "all")]
        function: String,
        #[arg(long, default_value_t = 0.25)]
        from: f64,
        #[arg(long, default_value_t = 4.0)]
        to: f64,
        #[arg(long, default_value_t = 5)]
        points: usize,
    },
}

fn overrides(model: &ModelArgs, mc: &McArgs, bt: &BacktestArgs) -> Overrides {
    Overrides {
        alpha: model.alpha,
        c: model.c,
        p: model.p,
        horizon: model.horizon,
        mc_paths: mc.mc_paths,
        mc_steps: mc.mc_steps,
        mc_seed: mc.mc_seed,
        tol: mc.tol,
        paths: bt.paths,
        steps: bt.steps,
        seed: bt.seed,
        cache_dir: mc.cache_dir.clone(),
        no_cache: mc.no_cache,
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot size worker pool: {e}")))?;
    }
    let file = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let none = (ModelArgs::default(), McArgs::default(), BacktestArgs::default());
    let cfg = |model: &ModelArgs, mc: &McArgs, bt: &BacktestArgs| RunConfig::merge(file.clone(), overrides(model, mc, bt));
    let out = cli.out.as_deref();
    let text = match &cli.command {
        Command::Classify { model } => commands::classify(&cfg(model, &none.1, &none.2)?)?,
        Command::Frontier { n } => commands::frontier(*n)?,
        Command::Solve { model, mc, curve, curve_points } => {
            commands::solve(&cfg(model, mc, &none.2)?, curve.as_deref(), *curve_points)?
        }
        Command::Series { action: SeriesAction::Dump { model, z_max } } => commands::series_dump(&cfg(model, &none.1, &none.2)?, *z_max)?,
        Command::Fracop { action: FracopAction::Eval { alpha, c, function, from, to, points } } => {
            let model = ModelArgs { alpha: *alpha, c: *c, ..ModelArgs::default() };
            commands::fracop_eval(&cfg(&model, &none.1, &none.2)?, function, *from, *to, *points)?
        }
        Command::Backtest { model, mc, bt, rule, z } => commands::backtest(&cfg(model, mc, bt)?, *rule, *z)?,
        Command::Compare { model, mc, bt, thresholds } => commands::compare(&cfg(model, mc, bt)?, thresholds)?,
        Command::Selftest => commands::selftest()?,
    };
    output::emit(&text, out)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("supstop: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
