//! Run loop, text-generation backends, file formats and command-line
//! front end for the challenger/solver self-play engine. The pure
//! algorithms live in [`coevo_core`], re-exported here as [`core`].

pub use coevo_core as core;

pub mod backend;
pub mod cli;
pub mod error;
pub mod io;
pub mod judge;
pub mod orchestrator;

pub use error::{Error, Result};
