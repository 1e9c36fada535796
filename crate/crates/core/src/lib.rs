//! Tabular entropy-regularized policy gradient, Q-learning and their
//! combination, with exact oracles for everything the agents estimate.
//!
//! The guide in `book/` walks through the modules with runnable examples.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod agents;
pub mod envs;
pub mod error;
pub mod fixed_point;
pub mod harness;
pub mod mdp;
pub mod tables;

pub use error::{Error, Result};

/// The guide's chapters, compiled so their snippets run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/mdps.md")]
    mod mdps {}
    #[doc = include_str!("../../../book/src/fixed-points.md")]
    mod fixed_points {}
    #[doc = include_str!("../../../book/src/pgql.md")]
    mod pgql {}
    #[doc = include_str!("../../../book/src/agents.md")]
    mod agents {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
