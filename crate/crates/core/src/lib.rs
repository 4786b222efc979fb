#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod assembly;
pub mod constants;
pub mod eigen;
pub mod extension;
pub mod error;
pub mod grid;
pub mod kernel;
pub mod lab;
pub mod nehari;
pub mod profile;
pub mod quad;
pub mod solver;
pub mod special;

pub use assembly::{assemble_forms, FormMatrices};
pub use constants::{ConstantsTable, Params};
pub use error::{Error, Result};
pub use grid::{RadialFn, RadialGrid};
pub use kernel::AngularKernel;
