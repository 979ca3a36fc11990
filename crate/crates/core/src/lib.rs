//! Periodic homogenization of Schrödinger equations with rapidly oscillating
//! coefficients and a large `1/eps` potential oscillating in space and time.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cell;
pub mod descriptors;
pub mod effective;
pub mod error;
pub mod fine;
pub mod grid;
pub mod harness;
pub mod homogenized;
pub mod io;
pub mod linalg;
pub mod spectral;
mod stepping;
pub mod twoscale;
pub mod wave;

pub use error::{HomogError, Result};
pub use grid::PeriodicGrid;
