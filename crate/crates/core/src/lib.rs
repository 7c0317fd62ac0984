pub mod corpus;
pub mod error;
pub mod fusion;
pub mod layers;
pub mod model;
pub mod params;
pub mod tensor;
pub mod trainer;

pub use error::{Error, Result};
pub use tensor::{Tape, Tensor, Var};
