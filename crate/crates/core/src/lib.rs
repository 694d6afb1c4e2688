pub mod error;
pub mod exec;
pub mod grid;
pub mod heom;
pub mod linalg;
pub mod model;

pub use error::{Error, Result};
pub mod bathnoise;
pub mod ensemble;
pub mod grape;
pub mod nmr;
pub mod analysis;
pub mod dynamics;
pub mod workbench;
