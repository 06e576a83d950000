pub mod admm;
pub mod atomic;
pub mod cli;
pub mod config;
pub mod error;
pub mod eval;
pub mod gbcs;
pub mod linalg;
pub mod method;
pub mod scene3d;
pub mod signal;
pub mod spectrum;

pub use error::{Result, TomoError};
