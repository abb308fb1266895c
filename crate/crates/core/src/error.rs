use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("index {index} out of range 1..={len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("reflecting unit set of {rows}x{cols} does not fit a {layout_rows}x{layout_cols} surface")]
    RusOutOfBounds {
        rows: usize,
        cols: usize,
        layout_rows: usize,
        layout_cols: usize,
    },
    #[error("points coincide; direction is undefined")]
    CoincidentPoints,
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("matrix pencil rank collapse: no singular value above threshold")]
    RankCollapse,
    #[error("anchors do not form a rectangle: {0}")]
    NotARectangle(String),
    #[error("no admissible root for the refined distances")]
    NoAdmissibleRoot,
    #[error("localization failed: {0}")]
    Localization(String),
    #[error("fisher information is singular (condition number {condition:.3e}): {cause}")]
    SingularFim { condition: f64, cause: &'static str },
    #[error("config key `{key}`: {message}")]
    Config { key: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
