//! Constraint-guided composition of fixed geometric pieces.

pub mod env;
pub mod error;
pub mod geometry;
pub mod guidance;
pub mod metrics;
pub mod models;
pub mod raster;
pub mod rect;
pub mod search;
pub mod svg;
pub mod tangram;
pub mod train;

pub use error::{Error, Result};
