//! Code clone detection over token sequences.

pub mod cli;
pub mod config;
pub mod corpus;
pub mod embeddings;
pub mod error;
pub mod eval;
mod io;
pub mod lexer;
pub mod model;
pub mod pipeline;
pub mod scorer;
pub mod trainer;

pub use config::{resolve_config, Config};
pub use error::{Error, Result};
