use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::gamma;

/// A problem instance: stability index, jump intensity, error exponent and horizon.
///
/// The Lévy measure is `c / x^(1+alpha) dx` on `(0, inf)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub alpha: f64,
    pub c: f64,
    pub p: f64,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
}

fn default_horizon() -> f64 {
    1.0
}

impl ModelParams {
    pub fn new(alpha: f64, c: f64, p: f64, horizon: f64) -> Result<Self> {
        let params = ModelParams { alpha, c, p, horizon };
        params.validate()?;
        Ok(params)
    }

    /// Unit horizon.
    pub fn unit(alpha: f64, c: f64, p: f64) -> Result<Self> {
        Self::new(alpha, c, p, 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        let ModelParams { alpha, c, p, horizon } = *self;
        if !(alpha > 1.0 && alpha < 2.0) {
            return Err(Error::InvalidParams(format!("alpha = {alpha} must lie in (1, 2)")));
        }
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidParams(format!("c = {c} must be positive")));
        }
        if !(p > 1.0 && p < alpha) {
            return Err(Error::InvalidParams(format!("p = {p} must lie in (1, alpha = {alpha})")));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidParams(format!("horizon = {horizon} must be positive")));
        }
        Ok(())
    }

    /// `c * Gamma(-alpha)`, strictly positive on `alpha in (1, 2)`.
    pub fn scale_const(&self) -> f64 {
        self.c * gamma(-self.alpha).expect("alpha in (1,2) is not a pole")
    }

    /// Same parameters with the horizon reset to one.
    pub fn at_unit_horizon(&self) -> Self {
        ModelParams { horizon: 1.0, ..*self }
    }
}
