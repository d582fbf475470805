//! Numerical building blocks shared by the models and solvers.

pub mod quadrature;
pub mod rng;
pub mod stats;
pub mod sumtree;

pub use sumtree::SumTree;
