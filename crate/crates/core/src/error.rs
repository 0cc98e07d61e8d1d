use thiserror::Error;

/// Errors produced by the NCAC library.
#[derive(Debug, Error)]
pub enum Error {
    /// A network, mechanism or parameter block is malformed.
    #[error("configuration error: {0}")]
    Config(String),

    /// Input data disagrees with the shape or range the operation expects.
    #[error("input error: {0}")]
    Input(String),

    /// The request would enumerate more states than the configured cap allows.
    #[error("capacity error: {nodes} nodes exceeds the cap of {cap} (2^{nodes} = {states} states per repertoire)")]
    Capacity { nodes: usize, cap: usize, states: u128 },

    /// Training or optimization blew up.
    #[error("divergence: {0}")]
    Divergence(String),

    /// A loss evaluation returned NaN or infinity even after retrying.
    #[error("non-finite loss: {0}")]
    NonFinite(String),
}

impl Error {
    pub(crate) fn capacity(nodes: usize, cap: usize) -> Self {
        Error::Capacity {
            nodes,
            cap,
            states: 1u128 << nodes.min(127),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
