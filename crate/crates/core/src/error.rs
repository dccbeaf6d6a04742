use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("crop square of side {side} centred at ({cx}, {cy}) exceeds {width}x{height} image")]
    OutOfBounds {
        cx: i64,
        cy: i64,
        side: usize,
        width: usize,
        height: usize,
    },
    #[error("invalid band count {bands}: must be in 1..={max}")]
    InvalidBands { bands: usize, max: usize },
    #[error("invalid pachymetry reading: {0}")]
    InvalidReading(String),
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error("k = {k} exceeds the {available} available items")]
    KTooLarge { k: usize, available: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("symbol {symbol} out of range for alphabet of size {alphabet}")]
    SymbolOutOfRange { symbol: usize, alphabet: usize },
    #[error("invalid window: height {window} stride {stride} on map of height {map_height}")]
    InvalidWindow {
        window: usize,
        stride: usize,
        map_height: usize,
    },
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("training split has no samples of class {0}")]
    MissingClass(crate::Label),
    #[error("unsupported schema version {found} (expected {expected})")]
    SchemaVersionMismatch { found: u32, expected: u32 },
    #[error("model checksum mismatch")]
    ChecksumMismatch,
    #[error("parse error: {0}")]
    Parse(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures caused by the filesystem rather than by the data.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io(_))
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        if e.is_io() {
            Error::Io(e.into())
        } else {
            Error::Parse(e.to_string())
        }
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        if e.is_io_error() {
            match e.into_kind() {
                csv::ErrorKind::Io(io) => Error::Io(io),
                _ => unreachable!(),
            }
        } else {
            Error::Parse(e.to_string())
        }
    }
}
