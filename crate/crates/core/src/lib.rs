pub mod data;
pub mod dgp;
pub mod dist;
pub mod error;
pub mod eval;
pub mod indicators;
pub mod linalg;
pub mod model;
pub mod pool;
pub mod sampler;
pub mod shrinkage;
pub mod spectral;
pub mod state_space;
pub mod store;
pub mod sv;
pub mod var;

pub use error::{Error, Result};
