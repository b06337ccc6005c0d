//! Acousto-electric conductivity tomography on the unit disk.

pub mod adjoint;
pub mod error;
pub mod fem;
pub mod forward;
pub mod mesh;
pub mod optimizer;
pub mod phantom;
pub mod pipeline;

pub use error::{Error, Result};
