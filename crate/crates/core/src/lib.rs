//! Simulation and numerical verification of equilibrium perturbations in
//! asymmetric particle systems.
//!
//! Two microscopic models are provided: the d-dimensional generalized
//! exclusion process ([`gep`]) and the one-dimensional anharmonic chain with
//! conservative noise ([`chain`]). Their small perturbations around a
//! constant equilibrium are compared against the macroscopic Burgers
//! profiles built in [`pde`], through the pairings and entropy tools in
//! [`observables`]. [`lattice`] holds the torus geometry, the averaging
//! kernels and the constructive flow.

pub mod chain;
pub mod gep;
pub mod lattice;
pub mod numerics;
pub mod observables;
pub mod pde;
pub mod profile;

pub use lattice::Torus;
