pub mod data;
pub mod error;
pub mod eval;
pub mod gaussian;
pub mod info;
pub mod nn;
pub mod objective;
pub mod presets;
pub mod train;

pub use error::{Error, Result};
pub use objective::Objective;
