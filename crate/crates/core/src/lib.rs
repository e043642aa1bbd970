pub mod chain;
pub mod cli;
pub mod domains;
pub mod error;
pub mod kernels;
pub mod leveldeform;
pub mod numcore;
pub mod positivity;
pub mod spherical;

pub use error::{Error, Result};
