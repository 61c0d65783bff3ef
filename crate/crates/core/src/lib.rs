//! Allocation-only core of a challenger/solver self-play engine.
//!
//! Everything here is a pure function of its inputs plus caller-supplied
//! random streams, so it builds without `std`. IO, text-generation backends,
//! the run loop and the CLI live in the `coevo` crate.
#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod config;
pub mod curriculum;
pub mod diversity;
mod error;
pub mod grpo;
mod math;
pub mod prompts;
pub mod rewards;
pub mod rng;
pub mod schedule;
pub mod simworld;
pub mod verification;

pub use error::{Error, Result};
