use std::path::PathBuf;

use thiserror::Error;

use crate::ir::{IrError, MethodRef};

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Ir(#[from] IrError),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("unknown method `{0}`")]
    UnknownMethod(MethodRef),
    #[error("`{method}` has no parameter `{name}`")]
    UnknownParameter { method: MethodRef, name: String },
    #[error("argument index {index} out of range for `{target}`")]
    ArgumentOutOfRange { target: MethodRef, index: usize },
    #[error("malformed call chain: {0}")]
    InvalidChain(String),
    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
