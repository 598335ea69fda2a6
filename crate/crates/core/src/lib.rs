//! Semi-supervised functional logistic discrimination.
//!
//! Discrete curves are smoothed onto a shared Gaussian basis
//! ([`smoother`]), turned into a multi-class logistic design through the
//! basis cross-product matrix ([`logit`]), fit on labeled plus unlabeled
//! curves by an EM loop around penalized Fisher scoring, and the
//! regularization parameter is chosen by GIC or GBIC ([`selection`]).
//! [`simgen`] and [`harness`] drive the Monte Carlo experiments and the CLI.

pub mod basis;
pub mod error;
pub mod grid;
pub mod harness;
pub mod linalg;
pub mod logit;
pub mod selection;
pub mod simgen;
pub mod smoother;

pub use error::{Error, Result};
