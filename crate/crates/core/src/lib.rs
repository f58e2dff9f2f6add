//! Finite-time safety of polynomial stochastic systems: barrier
//! certificates by sum-of-squares programming, closed-form failure bounds,
//! controller synthesis and a Monte Carlo oracle.

// `!(x > 0.0)` style guards are used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod cli;
pub mod engine;
pub mod model;
pub mod montecarlo;
pub mod poly;
pub mod presets;
pub mod sosprog;
