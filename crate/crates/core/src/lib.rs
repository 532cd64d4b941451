//! Quasiperiodic lattice Schrödinger operators `H(omega) = g v(T^n omega) + Delta`
//! whose hull `v` is a stationary Gaussian process on the torus.
//!
//! Modules follow the data flow: [`lattice`] and [`torus`] hold the geometry,
//! [`hull`] samples potentials, [`interp`] bounds the conditional variance of the
//! hull, [`operator`] restricts `H` to boxes and computes Green's functions, and
//! [`msa`] runs the multiscale checks on top of them.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod hull;
pub mod interp;
pub mod lattice;
pub mod msa;
pub mod operator;
pub mod stats;
pub mod torus;

pub use error::{Error, Result};
