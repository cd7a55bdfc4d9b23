pub mod cli;
pub mod diagrams;
pub mod error;
pub mod model;
pub mod observables;
pub mod quad;
pub mod rg_ode;
pub mod rng;
pub mod sampler;
pub mod special;
pub mod stats;
pub mod superprocess;
pub mod tauberian;

pub use error::{Error, Result};
