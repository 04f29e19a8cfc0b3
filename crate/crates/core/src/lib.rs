//! Space-time least-squares ("error functional") solver for scalar 1-D
//! conservation laws `u_t + f(u)_x = 0`.
//!
//! A candidate field `u` on a bilinear space-time mesh is scored by the
//! energy of its defect `v`, which vanishes exactly for weak solutions. The
//! [`descent`] module minimizes that energy; [`entropy`], [`young`] and
//! [`riemann`] supply the diagnostics and reference solutions.

pub mod cli;
pub mod defect;
pub mod descent;
pub mod entropy;
pub mod error;
pub mod flux;
pub mod mesh_fem;
pub mod riemann;
pub mod young;

pub use error::{Error, Result};
