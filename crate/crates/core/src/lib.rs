pub mod error;
pub mod bench;
pub mod dataset;
pub mod geom;
pub mod kernel;
pub mod learners;
pub mod linalg;
pub mod simgen;
pub mod tune;
pub mod vecchia;

pub use error::{Error, Result};
