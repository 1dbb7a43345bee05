//! Fritchman channel-error modeling toolkit.

pub mod channel;
pub mod error;
pub mod estimation;
pub mod model;
pub mod stats;

pub use error::{Error, Result};
pub use model::{ErrorSequence, FritchmanModel, StationaryReport, Violation};
