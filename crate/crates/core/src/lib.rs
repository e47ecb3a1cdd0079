pub mod cauchy;
pub mod cli;
pub mod config;
pub mod error;
pub mod extremal;
pub mod grid;
pub mod io;
pub mod linalg;
pub mod operator;
pub mod solver;
pub mod structure;
pub mod variation;

pub use error::{Error, Result};
pub use grid::{C64, DiscGrid, DiscMap, HolderConfig};
