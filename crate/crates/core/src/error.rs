use std::path::PathBuf;

use crate::io::image::ImageFormatError;
use crate::io::weights::WeightFormatError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// A syntax or validation failure in the architecture DSL.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

impl ParseError {
    pub(crate) fn new(line: usize, message: impl Into<String>) -> Self {
        Self {
            line,
            message: message.into(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("architecture: {0}")]
    Parse(#[from] ParseError),

    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Spatial output dimension dropped below 1.
    #[error("layer `{layer}`: output dimension underflow ({detail})")]
    Underflow { layer: String, detail: String },

    #[error("layer `{layer}`: {message}")]
    Layer { layer: String, message: String },

    #[error("unknown layer `{0}`")]
    UnknownLayer(String),

    #[error("invalid selection: {0}")]
    Selection(String),

    #[error("perplexity {perplexity} is infeasible for {points} points (need at least {required} points)")]
    InfeasiblePerplexity {
        perplexity: f64,
        points: usize,
        required: usize,
    },

    /// A data-dependent precondition failed (empty dataset, k too large, ...).
    #[error("{0}")]
    Precondition(String),

    #[error("weight file: {0}")]
    WeightFormat(#[from] WeightFormatError),

    #[error("image: {0}")]
    ImageFormat(#[from] ImageFormatError),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn layer(layer: &str, message: impl Into<String>) -> Self {
        Error::Layer {
            layer: layer.to_string(),
            message: message.into(),
        }
    }
}
