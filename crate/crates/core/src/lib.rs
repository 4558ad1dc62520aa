//! GP-based online model learning and adaptive attitude takeover control for
//! a combined (servicer + captured target) spacecraft.

pub mod controller;
pub mod dynamics;
pub mod error;
pub mod gp;
pub mod linalg;
pub mod sim;

pub use error::{Error, Result};
