pub mod align;
pub mod corrections;
pub mod correlate;
pub mod error;
pub(crate) mod fft;
pub mod imgcore;
pub mod quantify;
pub mod registry;
pub mod regularize;
pub mod segment;
pub mod synthlab;

pub use error::{Error, Result};
