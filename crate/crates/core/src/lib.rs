pub mod cli;
pub mod error;
pub mod fields;
pub mod mc;
pub mod quad;
pub mod sphere;
pub mod special;
pub mod spectrum;
pub mod symbols;
pub mod timechange;
pub mod verify;

pub use error::{Error, Result};
