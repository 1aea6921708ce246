use thiserror::Error;

use crate::matrix::Scale;

#[derive(Debug, Error)]
pub enum MatrixError {
    #[error("empty input")]
    Empty,
    #[error("io error: {0}")]
    Io(String),
    #[error("header must name exactly annotator_id, item_id, label (found: {0})")]
    Header(String),
    #[error("malformed row at line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("duplicate cell for item {item}, annotator {annotator}")]
    DuplicateCell { item: String, annotator: String },
    #[error("label {label:?} is not parseable under the {scale} scale")]
    UnparseableLabel { label: String, scale: Scale },
    #[error("unknown scale {0:?} (expected nominal, ordinal or interval)")]
    UnknownScale(String),
    #[error("label {0:?} is not in the alphabet")]
    LabelOutOfAlphabet(String),
    #[error("duplicate label {0:?} in alphabet")]
    DuplicateLabel(String),
    #[error("alphabet is empty")]
    EmptyAlphabet,
    #[error("interval scale requires numeric labels")]
    NonNumericInterval,
    #[error("matrix has no items")]
    NoItems,
    #[error("matrix needs at least 2 annotators, found {0}")]
    TooFewAnnotators(usize),
    #[error("no item has two or more labels")]
    NoPairableItem,
    #[error("expected {expected} cells, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("duplicate {what} identifier {id:?}")]
    DuplicateId { what: &'static str, id: String },
    #[error("cell index out of range (item {item}, annotator {annotator}, label {label})")]
    CellIndex { item: usize, annotator: usize, label: usize },
    #[error("unknown annotator {0:?}")]
    UnknownAnnotator(String),
    #[error("invalid group assignment: {0}")]
    InvalidGroups(String),
    #[error("invalid filter parameters: {0}")]
    InvalidFilter(String),
    #[error("dataset infeasible for the substitution protocol: {0}")]
    Infeasible(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AlphaError {
    #[error("no pairable values: every item has fewer than two labels")]
    NoPairableValues,
    #[error("no variation: all pairable labels are identical, alpha is undefined")]
    NoVariation,
}

#[derive(Debug, Error)]
pub enum SubstitutionError {
    #[error("unknown annotator {0:?}")]
    UnknownAnnotator(String),
    #[error("candidate has no label for item {item:?} (required by annotator {annotator:?})")]
    MissingLabel { annotator: String, item: String },
    #[error("candidate label {label:?} for item {item:?} is outside the alphabet")]
    OutOfAlphabet { item: String, label: String },
    #[error("substitution group is empty")]
    EmptyGroup,
    #[error("candidate file must contain exactly one annotator, found {0}")]
    CandidateAnnotators(usize),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

#[derive(Debug, Error)]
pub enum BootstrapError {
    #[error("invalid schedule parameters: {0}")]
    InvalidSchedule(String),
    #[error("schedule was built for {schedule} items, matrix has {matrix}")]
    SizeMismatch { schedule: usize, matrix: usize },
    #[error("alpha undefined in all {0} bootstrap iterations")]
    AllUndefined(usize),
    #[error("group {group:?}: {source}")]
    Group {
        group: String,
        #[source]
        source: Box<BootstrapError>,
    },
    #[error("groups do not share the base item set")]
    ItemMismatch,
}

#[derive(Debug, Error)]
pub enum EquivalenceError {
    #[error("fraction must be in (0, 1], got {0}")]
    Fraction(f64),
    #[error("significance level must be in (0, 1), got {0}")]
    SigLevel(f64),
    #[error("TOST needs at least 2 values per sample (got {substituted} and {human})")]
    TooFewValues { substituted: usize, human: usize },
    #[error("margin must be non-negative and finite")]
    Margin,
    #[error("group {group}: {source}")]
    Group {
        group: char,
        #[source]
        source: Box<crate::Error>,
    },
}

#[derive(Debug, Error)]
pub enum DesignError {
    #[error("invalid planning parameter: {0}")]
    Parameter(String),
    #[error("curve needs at least 4 points with strictly increasing x (got {0} points)")]
    CurveTooShort(usize),
    #[error("curve x values must be strictly increasing")]
    CurveOrder,
    #[error("group size {size} exceeds the {available} available annotators")]
    SizeTooLarge { size: usize, available: usize },
    #[error(transparent)]
    Alpha(#[from] AlphaError),
    #[error(transparent)]
    Substitution(#[from] SubstitutionError),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

/// Crate-level error used by the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error(transparent)]
    Alpha(#[from] AlphaError),
    #[error(transparent)]
    Substitution(#[from] SubstitutionError),
    #[error(transparent)]
    Bootstrap(#[from] BootstrapError),
    #[error(transparent)]
    Equivalence(#[from] EquivalenceError),
    #[error(transparent)]
    Design(#[from] DesignError),
    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    pub fn at(stage: &'static str) -> impl FnOnce(Error) -> Error {
        move |e| Error::Stage {
            stage,
            source: Box::new(e),
        }
    }

    /// True for errors caused by the data rather than the configuration.
    pub fn is_data_error(&self) -> bool {
        match self {
            Error::Stage { source, .. } => source.is_data_error(),
            Error::Config(_) => false,
            Error::Equivalence(EquivalenceError::Fraction(_) | EquivalenceError::SigLevel(_)) => false,
            Error::Bootstrap(BootstrapError::InvalidSchedule(_)) => false,
            Error::Design(DesignError::Parameter(_)) => false,
            _ => true,
        }
    }
}
