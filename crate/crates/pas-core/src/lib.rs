//! Pairwise-match association scores over categorical data matrices.
//!
//! A data matrix is compared row against row; every pair of rows gets a count of
//! matching markers. Scores describe how the distribution of those counts depends
//! on the pairwise state of one focal column (or of a dependent variable and one
//! independent column), and permutation of the focal column or the dependent
//! variable turns each score into a P value.
//!
//! The crate is `no_std` with `alloc`; file IO and threading live in the `pas` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod dvscores;
pub mod error;
pub mod exec;
pub mod experiments;
pub mod inference;
pub mod matrix;
pub mod numeric;
pub mod pairwise;
pub mod rng;
pub mod scan;
pub mod scores;
pub mod simulate;
pub mod spec;
pub mod stats;
pub mod theory;

pub use error::Error;
pub use exec::{Runner, Sequential};
pub use matrix::{Arity, DataMatrix, FrequencyScheme};
pub use pairwise::{ConditionalSets, HybridSets, PairwiseSummary, SetMode, HybridMode};
pub use rng::RngStream;
pub use spec::ScoreSpec;
