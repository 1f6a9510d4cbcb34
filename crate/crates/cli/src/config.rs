use std::path::{Path, PathBuf};

use serde::Deserialize;
use supstop_core::distribution::{McSpec, DEFAULT_PATHS, DEFAULT_SEED, DEFAULT_STEPS};
use supstop_core::ModelParams;

use crate::CliError;

pub const CACHE_ENV: &str = "SUPSTOP_CACHE_DIR";
pub const DEFAULT_BACKTEST_SEED: u64 = 1;

/// Everything a run needs. Filled from the JSON config, then overridden by flags.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub alpha: Option<f64>,
    pub c: Option<f64>,
    pub p: Option<f64>,
    #[serde(alias = "T")]
    pub horizon: Option<f64>,
    pub mc_paths: Option<usize>,
    pub mc_steps: Option<usize>,
    pub mc_seed: Option<u64>,
    pub tol: Option<f64>,
    pub paths: Option<usize>,
    pub steps: Option<usize>,
    pub seed: Option<u64>,
    pub cache_dir: Option<PathBuf>,
    pub no_cache: Option<bool>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("bad config {}: {e}", path.display())))
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub alpha: Option<f64>,
    pub c: f64,
    pub p: Option<f64>,
    pub horizon: f64,
    pub mc: McSpec,
    pub tol: f64,
    pub paths: usize,
    pub steps: usize,
    /// Seed of the backtest paths; the distribution has its own in `mc`.
    pub seed: u64,
    pub cache_dir: Option<PathBuf>,
}

/// Flag values; `None` leaves the config file value in place.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub alpha: Option<f64>,
    pub c: Option<f64>,
    pub p: Option<f64>,
    pub horizon: Option<f64>,
    pub mc_paths: Option<usize>,
    pub mc_steps: Option<usize>,
    pub mc_seed: Option<u64>,
    pub tol: Option<f64>,
    pub paths: Option<usize>,
    pub steps: Option<usize>,
    pub seed: Option<u64>,
    pub cache_dir: Option<PathBuf>,
    pub no_cache: bool,
}

impl RunConfig {
    pub fn merge(file: FileConfig, flags: Overrides) -> Result<Self, CliError> {
        let mc = McSpec {
            n_paths: flags.mc_paths.or(file.mc_paths).unwrap_or(DEFAULT_PATHS),
            n_steps: flags.mc_steps.or(file.mc_steps).unwrap_or(DEFAULT_STEPS),
            seed: flags.mc_seed.or(file.mc_seed).unwrap_or(DEFAULT_SEED),
            ..McSpec::default()
        };
        let no_cache = flags.no_cache || file.no_cache.unwrap_or(false);
        let cache_dir = if no_cache {
            None
        } else {
            flags
                .cache_dir
                .or(file.cache_dir)
                .or_else(|| std::env::var_os(CACHE_ENV).map(PathBuf::from))
                .or_else(|| Some(std::env::temp_dir().join("supstop-cache")))
        };
        let cfg = RunConfig {
            alpha: flags.alpha.or(file.alpha),
            c: flags.c.or(file.c).unwrap_or(1.0),
            p: flags.p.or(file.p),
            horizon: flags.horizon.or(file.horizon).unwrap_or(1.0),
            mc,
            tol: flags.tol.or(file.tol).unwrap_or(1e-10),
            paths: flags.paths.or(file.paths).unwrap_or(100_000),
            steps: flags.steps.or(file.steps).unwrap_or(2_000),
            seed: flags.seed.or(file.seed).unwrap_or(DEFAULT_BACKTEST_SEED),
            cache_dir,
        };
        if !(cfg.tol > 0.0) {
            return Err(CliError::Usage(format!("tol = {} must be positive", cfg.tol)));
        }
        Ok(cfg)
    }

    pub fn alpha(&self) -> Result<f64, CliError> {
        self.alpha.ok_or_else(|| CliError::Usage("--alpha is required".into()))
    }

    pub fn params(&self) -> Result<ModelParams, CliError> {
        let p = self.p.ok_or_else(|| CliError::Usage("--p is required".into()))?;
        Ok(ModelParams::new(self.alpha()?, self.c, p, self.horizon)?)
    }
}
