//! Fidelity of recovery of quantum states, computed by certified semidefinite programs.

pub mod channels;
pub mod entropy;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod recovery;
pub mod sdp;
pub mod states;

pub use error::{Error, Result};
