//! Selective inference for GLM coefficients after Lasso selection.
//!
//! The GLM is linearized at its MLE into centered pseudo-data on which the MLE
//! is a least-squares fit. The Lasso runs on the pseudo-data, and for every
//! selected coefficient the set of responses along the contrast direction that
//! lead to the same selection is enumerated exactly by following the Lasso
//! path in one parameter. Inference then uses a Gaussian truncated to that set.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod cli;
pub mod error;
pub mod glm;
pub mod infer;
pub mod lasso;
mod linalg;
pub mod path;
pub mod report;
pub mod rng;
pub mod sim;
pub mod special;
pub mod truncnorm;

pub use error::{Error, Result};
pub use nalgebra;
