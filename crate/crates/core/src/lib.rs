pub mod bcs;
pub mod channels;
pub mod circuit;
pub mod error;
pub mod fitting;
pub mod linalg;
pub mod mitigation;
pub mod observable;
pub mod rc;
pub mod rng;
pub mod runner;
pub mod sim;

pub use error::{Error, Result};
