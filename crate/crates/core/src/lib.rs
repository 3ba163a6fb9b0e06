//! Explaining black-box corrections of time-series models by the parameter
//! change they induce in an interpretable base model.
//!
//! The pipeline fits a base model `f_theta` (step 1), learns a residual
//! correction (step 2), subtracts the predicted correction on the most recent
//! `r` samples and refits (step 3). The parameter difference
//! `theta0 - theta_r` explains the correction, and integrated gradients
//! attribute the surrogate correction `f_theta0 - f_theta_r` to individual
//! parameters.
//!
//! ```
//! use bapc_core::correction::CorrectionSpec;
//! use bapc_core::engine::{bapc, BapcConfig};
//! use bapc_core::models::Family;
//! use bapc_core::series::{TimeSeries, WindowConfig};
//!
//! let mut values = vec![0.0; 10];
//! values.extend(vec![2.0; 10]);
//! let series = TimeSeries::new(values).unwrap();
//! let config = BapcConfig::new(Family::Constant, CorrectionSpec::nn1(), WindowConfig::new(20, 10).unwrap());
//! let result = bapc(&series, &config).unwrap();
//! assert!((result.delta_theta[0] - 0.5).abs() < 1e-12);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN.

pub mod attribution;
pub mod correction;
pub mod engine;
pub mod error;
pub mod io;
pub mod lime;
pub mod models;
pub mod numerics;
pub mod runner;
pub mod series;
pub mod synthetic;

pub use error::{BapcError, Result};
