pub mod cases;
pub mod cli;
pub mod coupling;
pub mod error;
pub mod flow;
pub mod io;
pub mod linsolve;
pub mod material;
pub mod mech;
pub mod mesh;
pub mod par;
pub mod tensor;
pub mod verify;

pub use error::{Error, Result};
