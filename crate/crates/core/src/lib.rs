pub mod align;
pub mod cli;
pub mod corpus;
pub mod error;
pub mod nn;
pub mod rng;
pub mod scene;
pub mod synthesis;
pub mod topview;
pub mod trainer;

pub use error::{Error, Result};
