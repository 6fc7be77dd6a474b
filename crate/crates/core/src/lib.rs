pub mod error;
pub mod format;
pub mod game;
pub mod generate;
pub mod metrics;
pub mod model;
pub mod oracle;
pub mod solver;
pub mod utility;

pub use error::{Error, Result};
