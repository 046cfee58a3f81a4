//! Coupled training of a deployment model `f(X)` and a rich-view model
//! `g(X, W)` from labeled and unlabeled samples.
//!
//! The penalized objective
//!
//! ```text
//! L(f, g; λ) = (1/N) [ Σ_L (Y − f(X))² + Σ_U (g(Z) − f(X))² + λ Σ_L (Y − g(Z))² ]
//! ```
//!
//! interpolates between labeled-only least squares (λ → 0) and Two-Stage
//! pseudo-labeling (λ → ∞). This crate provides exact linear solvers,
//! a generic alternating loop over pluggable fitters, greedy alternating
//! forward selection over dictionaries, cross-validation for λ and
//! synthetic generators.

// `!(x > 0.0)` is used on purpose so that NaN fails validation too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod afs;
pub mod coupled_loop;
pub mod datagen;
pub mod dataset;
pub mod error;
pub mod eval_cv;
pub mod linalg;
pub mod linear_coupled;
pub mod star_space;

pub use error::{Error, Result};
