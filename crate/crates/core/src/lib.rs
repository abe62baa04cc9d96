//! Core algorithms for measuring physician fatigue from clinical note text.
//!
//! The crate is `no_std` (with `alloc`) and carries no IO. It covers:
//!
//! - [`corpus`]: note records, shift reconstruction, rolling workload labels,
//!   the complaint-balanced patient-level dataset split and balance checks.
//! - [`textfeat`]: tokenization, lexicon fractions, Flesch-Kincaid grade and the
//!   fixed 27-feature note vector plus standardization.
//! - [`predictability`]: an interpolated absolute-discounting n-gram model used
//!   for note log-perplexity and for greedy/sampled generation.
//! - [`mlcore`]: L2-regularized logistic regression, grouped cross-validation,
//!   AUC and bootstrap intervals, fatigue scoring and the pairwise LLM baseline.
//! - [`econometrics`]: OLS with categorical fixed effects and the validation,
//!   yield, disparity and correlation regression suites.
//! - [`synthlab`]: a simulator of the workload → fatigue → notes/decisions DAG,
//!   including the exact shrinkage identity and attenuation experiments.
//!
//! File formats, the CLI and network access live in the companion `fatlens`
//! crate.

#![cfg_attr(not(test), no_std)]
// When std is linked anywhere in the build, its inherent float methods
// shadow `num_traits::Float` and those imports look unused.
#![allow(unused_imports)]

extern crate alloc;

pub mod corpus;
pub mod econometrics;
mod error;
pub mod linalg;
pub mod mlcore;
pub mod predictability;
pub mod stats;
pub mod synthlab;
pub mod textfeat;
pub mod time;

pub use error::{Error, Result};
