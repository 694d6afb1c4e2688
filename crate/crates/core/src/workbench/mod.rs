//! Scenario files, command orchestration, figure recipes and output files.

pub mod commands;
pub mod output;
pub mod reproduce;
pub mod scenario;

pub use commands::{Overrides, Summary};
pub use output::{resolve_out_dir, RunManifest, OUT_ENV};
pub use reproduce::{bundled, reproduce, Check, FigureId, Report};
pub use scenario::Scenario;
