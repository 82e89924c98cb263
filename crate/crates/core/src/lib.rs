// SPDX-License-Identifier: MIT OR Apache-2.0

pub mod bench;
pub mod card;
pub mod cli;
pub mod diag;
pub mod error;
pub mod gate;
pub mod model;
pub mod numerics;
pub mod steer;
pub mod taskgen;

pub use error::{Result, RudderError};

/// Engine identifier written into every artifact.
pub const ENGINE_VERSION: &str = concat!("rudder ", env!("CARGO_PKG_VERSION"));
