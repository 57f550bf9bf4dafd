//! Semi-supervised restricted Boltzmann machines.
//!
//! A categorical label unit is coupled to the hidden layer alongside the
//! visible layer, so one model both generates samples of a requested
//! category and classifies samples by sampling the label.

pub mod data;
pub mod error;
pub mod eval;
pub mod exact;
pub mod model;
pub mod numerics;
pub mod rng;
pub mod sampler;
pub mod stats;
pub mod store;
pub mod trainer;

pub use error::{Error, Result};
pub use model::{ChainState, Layout, ModelParams};
pub use sampler::{ChainPool, ClampMode, Readout};
