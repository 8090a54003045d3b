//! A finite-volume laboratory for multi-scale analysis of random lattice
//! operators `H = εΓ_φ + V` with sub-exponentially decaying hopping.
//!
//! The crate is organised around the objects of the analysis:
//!
//! - [`weight`]: the log-power weight, its quasi-metric constant and hopping kernels;
//! - [`lattice`]: sup-norm boxes, out-shells and the dangerous-cube cover;
//! - [`disorder`] and [`operator`]: single-site laws and dense finite-volume operators;
//! - [`greens`]: resolvents, resonance tests and good/bad cube classification;
//! - [`msa`]: the scale ladder, probability estimates and the coupling checker;
//! - [`localization`]: eigenfunction decay fits and the Poisson identity;
//! - [`experiment`]: configuration files and the runners behind the `msalab` binary.

pub mod disorder;
pub mod error;
pub mod experiment;
pub mod greens;
pub mod lattice;
pub mod localization;
pub mod msa;
pub mod operator;
pub mod stats;
pub mod weight;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/weights.md")]
    mod weights {}
    #[doc = include_str!("../../../book/src/lattice.md")]
    mod lattice {}
    #[doc = include_str!("../../../book/src/operators.md")]
    mod operators {}
    #[doc = include_str!("../../../book/src/greens.md")]
    mod greens {}
    #[doc = include_str!("../../../book/src/msa.md")]
    mod msa {}
    #[doc = include_str!("../../../book/src/localization.md")]
    mod localization {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
