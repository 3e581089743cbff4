//! Spectral initialization for rotation averaging and pose-graph
//! optimization, with explicit a priori error bounds.
//!
//! The crate is `no_std` with `alloc` when the default `std` feature is off.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod error;
pub mod linalg;

pub use error::{Error, Result};
pub mod graph;
pub mod metrics;
pub mod datamatrix;
pub mod spectral;
pub mod bounds;
pub mod synth;
