pub mod cpofdm;
mod dft;
pub mod error;
pub mod fcfb;
pub mod metrics;
pub mod numerology;
pub mod scenario;
pub mod specwin;

pub use error::{Error, Result};
