//! Post-processing and evaluation of synthetic tabular data: missing-mode
//! patching, an HEOM-kNN proximity filter, and fidelity, utility and privacy
//! metrics.

pub mod cli;
pub mod datasets;
pub mod encoder;
pub mod error;
pub mod fidelity;
pub mod filter;
pub mod generators;
pub mod modepatch;
pub mod neighbors;
pub mod privacy;
pub mod seed;
pub mod stats;
pub mod tabular;
pub mod utility;

pub use error::{Error, Result};
