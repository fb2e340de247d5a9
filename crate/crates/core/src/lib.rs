pub mod context;
pub mod datasets;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod learners;
pub mod neural;
pub mod par;
pub mod plot;
pub mod stream;
pub mod tree;

pub use error::{Error, Result};
