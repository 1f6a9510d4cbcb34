//! Optimal prediction of the ultimate supremum of a spectrally positive
//! `alpha`-stable Lévy process: series value function, free boundary by
//! smooth fit, regime classification and Monte Carlo backtests.

// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod backtest;
pub mod boundary;
pub mod distribution;
pub mod error;
pub mod fracops;
pub mod params;
pub mod quadrature;
pub mod regime;
pub mod series;
pub mod special;
pub mod stable;

pub use error::{Error, Result};
pub use params::ModelParams;
