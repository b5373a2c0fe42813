use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("autodiff: {0}")]
    Autodiff(String),

    #[error("missing gradient for parameter `{0}`")]
    MissingGradient(String),

    #[error("transfer: {0}")]
    Transfer(String),

    #[error("dataset: {0}")]
    Dataset(String),

    #[error(transparent)]
    Weights(#[from] WeightsError),

    #[error(transparent)]
    Image(#[from] ImageError),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Failures decoding or encoding a CMTW weight file.
#[derive(Debug, Error)]
pub enum WeightsError {
    #[error("bad magic bytes {0:?}, expected \"CMTW\"")]
    BadMagic([u8; 4]),
    #[error("unsupported weight file version {0}")]
    UnsupportedVersion(u32),
    #[error("weight file truncated while reading {0}")]
    Truncated(&'static str),
    #[error("duplicate tensor name `{0}`")]
    DuplicateName(String),
    #[error("tensor name is empty")]
    EmptyName,
    #[error("tensor name is not valid UTF-8")]
    InvalidName,
    #[error("tensor `{0}` has an invalid shape")]
    InvalidShape(String),
    #[error("{0} trailing bytes after the last tensor")]
    TrailingBytes(usize),
}

/// Failures decoding a binary PGM/PPM image.
#[derive(Debug, Error)]
pub enum ImageError {
    #[error("bad magic {0:?}, expected P5 or P6")]
    BadMagic(String),
    #[error("unsupported maxval {0}, only 255 is accepted")]
    UnsupportedMaxval(u32),
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("truncated payload: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
}

pub(crate) fn shape_err(msg: impl Into<String>) -> Error {
    Error::Shape(msg.into())
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
