//! Volatility-model estimation and histogram entropies for financial return
//! series.
//!
//! - [`series`]: price ingestion and log-returns
//! - [`volmodel`]: GARCH(1,1), IGARCH(1,1) and FIGARCH(1,d,1) variance recursions and likelihoods
//! - [`estimate`]: constrained maximum likelihood with standard errors
//! - [`simulate`]: seeded path simulation and squared-return autocorrelations
//! - [`entropy`]: equidistant-cell histograms with Shannon, Rényi and Tsallis entropies

// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod entropy;
pub mod error;
pub mod estimate;
pub mod optim;
pub mod series;
pub mod simulate;
pub mod volmodel;

pub use error::{Error, Result};
pub use estimate::{fit, FitConfig, FitResult};
pub use series::{ColumnMapping, PricePoint, ReturnSeries};
pub use volmodel::{Innovation, ModelFamily, ParamVector};
