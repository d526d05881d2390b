pub mod cli;
pub mod decode;
pub mod error;
pub mod eval;
pub mod io;
pub mod model;
pub mod npad;
pub mod numeric;
pub mod training;

pub use error::{Error, Result};
