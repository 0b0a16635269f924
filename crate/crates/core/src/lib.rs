//! Characterization of two-qubit gates modeled as completely-positive maps.

pub mod channels;
pub mod error;
pub mod exec;
pub mod gatemetrics;
pub mod io;
pub mod linalg;
pub mod measures;
pub mod optim;
pub mod plane;
pub mod proctomo;
pub mod state;
pub mod statetomo;

pub use error::{Error, Result};
