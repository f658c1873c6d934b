//! File formats, Monte Carlo campaigns and plot data around the `kbh-core`
//! estimators.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod campaign;
pub mod config;
pub mod dataset;
pub mod error;
pub mod identify;
pub mod plotdata;
pub mod stats;
pub mod table;

pub use campaign::{run_campaign, write_campaign, CampaignResult, RunRow};
pub use config::CampaignConfig;
pub use dataset::{truth_path, DatasetFile, TruthFile};
pub use error::{HarnessError, Result};
pub use identify::{estimate, write_estimate, Estimate, Estimator, IdentifyOptions};
pub use plotdata::plotdata;
