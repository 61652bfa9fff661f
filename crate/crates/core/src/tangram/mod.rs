//! Tangram assembly: seven fixed pieces placed by anchor alignment.

mod env;
mod pieces;
mod table;

pub use env::*;
pub use pieces::*;
pub use table::*;
