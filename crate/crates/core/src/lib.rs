//! Renormalization analysis of the self-similar operator `d/dm d/dx`.

pub mod error;
pub mod halfline;
pub mod model;
pub mod propagator;
pub mod renorm_map;
pub mod scalar;
pub mod spectral;
pub mod string_oracle;

pub use error::{Error, Result};
