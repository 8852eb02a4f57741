pub mod baselines;
pub mod dataio;
pub mod error;
mod linalg;
pub mod lstm;
pub mod outliers;
pub mod pipeline;
pub mod preprocess;
pub mod relations;
pub mod report;

pub use error::{Error, Result};
