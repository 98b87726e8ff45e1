use thiserror::Error;

/// Errors produced anywhere in the identification pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("template file does not start with the LFRT magic bytes")]
    MagicMismatch,
    #[error("unsupported template format version {found} (expected {expected})")]
    VersionMismatch { found: u16, expected: u16 },
    #[error("template payload truncated while reading {context}")]
    TruncatedPayload { context: &'static str },
    #[error("malformed template payload: {0}")]
    MalformedPayload(String),

    #[error("no orientation block inside the region of interest")]
    EmptyRoi,
    #[error("patch type {0} required by the descriptor subset is missing")]
    MissingPatchType(u8),
    #[error("descriptors cover different patch type sets")]
    PatchSetMismatch,

    #[error("minutiae share the same location")]
    CoincidentMinutiae,
    #[error("minutiae triplet is degenerate (collinear or coincident)")]
    DegenerateTriplet,
    #[error("compatibility matrix has no non-zero entry")]
    ZeroMatrix,
    #[error("compatibility tensor has no stored entry")]
    ZeroTensor,
    #[error("template has no minutiae")]
    EmptyTemplate,
    #[error("no correspondences to align")]
    EmptyCorrespondences,

    #[error("could not place {requested} minutiae with the separation constraint (placed {placed})")]
    PlacementFailure { requested: usize, placed: usize },

    #[error("duplicate subject id {0:?}")]
    DuplicateSubject(String),
    #[error("reference database is empty")]
    EmptyDb,
    #[error("no ground truth for query {0:?}")]
    MissingTruth(String),
    #[error("candidate lists belong to different queries ({0:?} vs {1:?})")]
    QueryMismatch(String, String),

    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors that indicate damaged or inconsistent stored data rather
    /// than bad user input.
    pub fn is_integrity(&self) -> bool {
        matches!(
            self,
            Error::MagicMismatch
                | Error::VersionMismatch { .. }
                | Error::TruncatedPayload { .. }
                | Error::MalformedPayload(_)
                | Error::DuplicateSubject(_)
                | Error::MissingTruth(_)
                | Error::PatchSetMismatch
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
