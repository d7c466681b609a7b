use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An input violated an operation's precondition (wrong colorspace, wrong channel count).
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    /// The input is valid but numerically degenerate (empty mask, zero mean, collinear pixels).
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("no hand found: {0}")]
    NoHand(String),
    #[error("cannot orient hand: {0}")]
    Orientation(String),
    #[error("size error: {0}")]
    Size(String),
    #[error("contour error: {0}")]
    Contour(String),
    #[error("sequence too short: {0}")]
    SequenceTooShort(String),
    #[error("insufficient key frame candidates: found {0}, need 2")]
    InsufficientCandidates(usize),
    #[error("no motion detected{}", match .state { Some(s) => format!(" in state {s}"), None => String::new() })]
    NoMotion { state: Option<usize> },
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("transport error: {0}")]
    Transport(#[source] io::Error),
    #[error("database error: {0}")]
    Database(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    /// An error raised inside a named pipeline stage.
    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// True for the "nothing to recognize" family: no hand, no motion.
    pub fn is_no_signal(&self) -> bool {
        match self {
            Error::Stage { source, .. } => source.is_no_signal(),
            other => matches!(other, Error::NoHand(_) | Error::NoMotion { .. }),
        }
    }

    pub fn in_stage(stage: &'static str) -> impl FnOnce(Error) -> Error {
        move |e| match e {
            already @ Error::Stage { .. } => already,
            other => Error::Stage { stage, source: Box::new(other) },
        }
    }

    /// The innermost error, looking through stage wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }
}
