//! Reversible Markov chains that are strongly mixing yet violate the central
//! limit theorem: building blocks, their superpositions, parameter schedules,
//! exact mixing coefficients and Monte Carlo verification harnesses.

pub mod block;
pub mod diagnostics;
pub mod limit;
pub mod rates;
pub mod report;
pub mod rng;
pub mod schedule;
pub mod scalar;
pub mod superposed;
pub mod tangent;

pub use block::{construct_block, BlockParams, Kernel3};
pub use scalar::{LogNum, Real, Weight};

pub type Block = BlockParams<f64>;
pub type Kernel = Kernel3<f64>;
pub type Dist = limit::DiscreteDist<f64>;
