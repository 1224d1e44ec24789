//! Differentially private learning of Gaussian mixtures.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod geometry;
pub mod lemmas;
pub mod linalg;
pub mod mech;
pub mod model;
pub mod nets;
pub mod pipeline;
pub mod quad;
pub mod rng;
pub mod select;
pub mod tvdist;
pub mod univariate;

pub use error::{Error, Result};
pub use model::{Dataset, GaussianParams, Mixture, PrivacyBudget};
