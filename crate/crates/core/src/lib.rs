//! Pseudo-spectral solver for the 2D incompressible Navier–Stokes equations on a
//! periodic box, with continuous data assimilation (nudging) from coarse nodal
//! velocity observations, and an experiment harness for convergence sweeps.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod forcing;
pub mod harness;
pub mod observables;
pub mod spectral;

pub use error::{Error, Result};
