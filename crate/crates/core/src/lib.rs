pub mod cli;
pub mod critical;
pub mod error;
pub mod flow;
pub mod geometry;
pub mod interp;
pub mod ode;
pub mod quad;
pub mod roots;
pub mod report;
pub mod soliton;
pub mod validation;

pub use error::{Error, Result};
