use std::io;

use thiserror::Error;

use crate::types::NodeId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("configuration error: {0}")]
    Config(String),

    /// The line produced no tokens once delimiters were removed.
    #[error("line contains no tokens")]
    EmptySequence,

    #[error("model parse error at record {record}{}: {message}", node_context(.node))]
    Parse {
        record: usize,
        node: Option<u64>,
        message: String,
    },

    #[error("corrupt model: {0}")]
    CorruptModel(String),

    #[error("incompatible models: {0}")]
    IncompatibleModel(String),

    #[error("node {0} not found")]
    NodeNotFound(NodeId),

    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

fn node_context(node: &Option<u64>) -> String {
    match node {
        Some(id) => format!(" (node {id})"),
        None => String::new(),
    }
}
