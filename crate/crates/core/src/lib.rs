//! Remedian streaming-median sketches, their exact and asymptotic laws, and
//! Monte-Carlo verification.
//!
//! A remedian with `k` rows of odd width `b` consumes `b^k` values in
//! `O(kb)` memory and emits the median of row medians. [`RemedianSketch`] is
//! the streaming structure, [`analytics`] holds the closed forms, and
//! [`simulation`] checks one against the other.

pub mod analytics;
pub mod distributions;
pub mod error;
pub mod multi;
pub mod quadrature;
pub mod simulation;
pub mod sketch;
pub mod special;

pub use distributions::{Distribution, MomentBundle};
pub use error::{Error, Result};
pub use multi::{MultiQuantileEstimator, MultiQuery};
pub use sketch::{rank_of, remedian_of, IteratedRemedian, QueryResult, RemedianSketch};
