pub mod error;
pub mod lds;
pub mod market;
pub mod coupling;
pub mod driver;
pub mod cli;

pub use error::{Error, Result};
