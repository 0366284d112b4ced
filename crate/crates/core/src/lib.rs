//! Static analysis for inconsistent security enforcement between client-side
//! service helpers and the system-service IPC methods they wrap.

pub mod callgraph;
pub mod cli;
pub mod config;
pub mod corpusgen;
pub mod dataflow;
pub mod detectors;
pub mod error;
pub mod inconsistency;
pub mod ir;
pub mod mining;
pub mod service;

pub use config::SeedConfig;
pub use error::{Error, Result};
