//! Scenario files, on-disk containers and the command drivers.

pub mod commands;
pub mod container;
pub mod pgm;
pub mod scenario;

pub use commands::{cmd_forward, cmd_image, cmd_invert, cmd_validate, InversionSummary, RunOptions};
pub use container::ArrayFormat;
pub use scenario::Scenario;
