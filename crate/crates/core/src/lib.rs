//! Soft outputs for union-find and matching decoders, postselection
//! statistics, and a belief-propagation outer decoder that consumes them.

pub mod bp;
pub mod codes;
pub mod error;
pub mod gf2;
pub mod graph;
pub mod mwpm;
pub mod noise;
pub mod soft;
pub mod stats;
pub mod ufd;

pub use error::{Error, Result};
