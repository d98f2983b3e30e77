//! Loop-group construction of deformations of reflective submanifolds.

pub mod birkhoff;
pub mod cartan_align;
pub mod cli;
pub mod construct;
pub mod error;
pub mod flows;
pub mod geometry;
pub mod grid;
pub mod lie;
pub mod linalg;
pub mod loops;
pub mod obstruction;
pub mod stencil;

pub use error::{Error, Result};
