//! Near-critical Ising interfaces and their massive-SLE3 description:
//! lattice domains, Ising/FK samplers, interface extraction, Loewner
//! numerics, harmonic kernels, correlation series and RN weights.

pub mod conformal;
pub mod correlation;
pub mod domain;
pub mod error;
pub mod field;
pub mod fk;
pub mod graph;
pub mod harmonic;
pub mod interface;
pub mod ising;
pub mod loewner;
pub mod quad;
pub mod rn;
pub mod rng;
pub mod snapshot;
pub mod sparse;
pub mod stats;
pub mod union_find;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
