//! Same-different visual reasoning benchmark core.
//!
//! Everything in this crate is pure computation over owned buffers: contour
//! synthesis and congruence checks, binary rasterization, the four
//! same-different rule engines, a small reverse-mode tensor engine, the
//! block-grammar CNN family and its SGD training loop. File formats, the
//! CLI and parallel dataset generation live in the `svrt` companion crate.
#![no_std]
#![deny(unsafe_op_in_unsafe_fn)]
// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod contour;
pub mod error;
pub mod evalx;
pub mod gradcheck;
pub mod models;
pub mod problems;
pub mod raster;
pub mod seed;
pub mod tensor;
pub mod training;

pub use error::{Error, Result};
