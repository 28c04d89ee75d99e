//! Two lower-limb exoskeletons coupled through a virtual spring-damper,
//! simulated at the control rate, plus the gait, EMG and effort analysis
//! used to evaluate dyadic training.

// `!(x > 0.0)` style checks are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod config;
pub mod controller;
pub mod coupling;
pub mod dataset;
pub mod error;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod plant;
pub mod signals;

pub use error::{Error, Result};
