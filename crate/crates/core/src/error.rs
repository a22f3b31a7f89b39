use thiserror::Error;

/// Errors produced by the codec, the container format and the optimizer.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("configuration error: {0}")]
    Configuration(String),

    /// `offset` counts bytes from the start of `region`.
    #[error("corrupt stream: {reason} ({region} byte offset {offset})")]
    CorruptStream { region: StreamRegion, offset: usize, reason: String },

    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    #[error("format capacity exceeded: {0}")]
    FormatCapacity(String),

    #[error("image error: {0}")]
    Image(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// Part of an `.aqmp` file a corrupt-stream offset refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamRegion {
    /// Raw file bytes.
    File,
    /// The inflated node stream.
    Payload,
    /// Index into a quadtree's node sequence.
    Node,
}

impl std::fmt::Display for StreamRegion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            StreamRegion::File => f.write_str("file"),
            StreamRegion::Payload => f.write_str("payload"),
            StreamRegion::Node => f.write_str("node"),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
