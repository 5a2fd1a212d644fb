use std::fmt;

/// Why a candidate 26-byte window could not be a scale record.
///
/// Carving scans every byte offset of a flash dump, so rejection is the
/// overwhelmingly common path; this type is `Copy` to keep it cheap.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RejectReason {
    /// The stored year/month/day bytes do not form a calendar date.
    InvalidDate { yy: u8, mm: u8, dd: u8 },
    /// The stored hour/minute/second bytes do not form a time of day.
    InvalidTime { hh: u8, mm: u8, ss: u8 },
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RejectReason::InvalidDate { yy, mm, dd } => {
                write!(f, "stored date bytes [{yy}, {mm}, {dd}] are not a calendar date")
            }
            RejectReason::InvalidTime { hh, mm, ss } => {
                write!(f, "stored time bytes [{hh}, {mm}, {ss}] are not a time of day")
            }
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("malformed record: expected {expected} bytes, got {got}")]
    MalformedRecord { expected: usize, got: usize },

    #[error("record rejected: {0}")]
    DecodeRejected(RejectReason),

    #[error("{field} out of range: {detail}")]
    FieldOutOfRange { field: &'static str, detail: String },

    #[error("dump length mismatch: before is {before} bytes, after is {after} bytes")]
    LengthMismatch { before: usize, after: usize },

    #[error("required table {table:?} missing from {path}")]
    MissingTable { path: String, table: String },

    #[error("schema mismatch in {context}: {detail}")]
    SchemaMismatch { context: String, detail: String },

    #[error("malformed row {row} in {context}: {detail}")]
    MalformedRow { context: String, row: usize, detail: String },

    #[error("invalid script: {0}")]
    InvalidScript(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("sqlite: {0}")]
    Sqlite(#[from] rusqlite::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("xml: {0}")]
    Xml(#[from] quick_xml::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code the CLI maps this error to.
    ///
    /// 2 = input unreadable, 3 = input readable but structurally invalid,
    /// 4 = internal invariant violated. Usage errors (1) never reach here;
    /// argument parsing happens before any `Error` is constructed.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io(_) => 2,
            Error::MalformedRecord { .. }
            | Error::DecodeRejected(_)
            | Error::FieldOutOfRange { .. }
            | Error::LengthMismatch { .. }
            | Error::MissingTable { .. }
            | Error::SchemaMismatch { .. }
            | Error::MalformedRow { .. }
            | Error::InvalidScript(_)
            | Error::InvalidInput(_)
            | Error::Sqlite(_)
            | Error::Json(_)
            | Error::Csv(_)
            | Error::Xml(_) => 3,
        }
    }
}
