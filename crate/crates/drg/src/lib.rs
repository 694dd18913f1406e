//! File formats, corpus loading and the command line around [`drg_core`].
//!
//! - [`text`]: corpora (one sentence per line, one file per attribute),
//!   marker lexicon TSV and split dumps.
//! - [`container`]: binary files for generators, language models,
//!   classifiers and retrieval indexes.
//! - [`config`]: the TOML run configuration.
//! - [`report`]: evaluation reports.
//! - [`cli`]: the `drg` command.

pub mod cli;
pub mod config;
pub mod container;
pub mod error;
pub mod report;
pub mod text;

pub use drg_core as core;
pub use error::{Error, Result};
