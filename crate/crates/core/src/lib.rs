//! Depth estimation for 4D light fields.
//!
//! Census/SGM stereo between the extreme views gives a coarse prior in the
//! center view; the prior narrows a kernel-density line fit through all
//! views. Disparities are full-baseline inside the pipeline and per view
//! step in outputs.

pub mod bench;
pub mod census;
pub mod config;
pub mod error;
pub mod estimator;
pub mod filter;
pub mod fusion;
pub mod io;
pub mod linefit;
pub mod metrics;
mod par;
pub mod pipeline;
pub mod sgm;
pub mod timing;
pub mod types;

pub use census::{CensusPattern, PatternRegistry};
pub use config::{ConfidenceRule, PipelineConfig};
pub use error::{Error, Result};
pub use estimator::{DepthEstimator, Estimate, EstimatorRegistry};
pub use linefit::HypothesisGrid;
pub use metrics::EvalReport;
pub use timing::StageTiming;
pub use types::{Axis, ColorImage, DepthMap, DisparityRange, GrayImage, LightField, Mask, ViewIndex, INVALID_DEPTH};
