//! Error type shared by all registration stages.

use alloc::boxed::Box;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

/// Errors raised by cloud construction, solvers and the pipeline.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Empty cloud, non-finite coordinate or invalid weight vector.
    InvalidCloud(&'static str),
    /// All points of the reference coincide; no bounding-box scale exists.
    DegenerateCloud,
    /// Every template point coincides with the rotation center.
    DegenerateCenter,
    /// Fewer than three correspondences, or a collinear source set that
    /// leaves the best-fit rotation underdetermined.
    DegenerateCorrespondences,
    /// Requested sample size is outside `1..=cloud_len`.
    SampleSize { requested: usize, available: usize },
    /// A configuration invariant does not hold.
    Config(&'static str),
    /// An error from an inner pipeline stage, labelled with the stage name.
    Stage {
        stage: &'static str,
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn in_stage(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidCloud(what) => write!(f, "invalid cloud: {what}"),
            Error::DegenerateCloud => write!(f, "degenerate cloud"),
            Error::DegenerateCenter => write!(f, "degenerate center"),
            Error::DegenerateCorrespondences => write!(f, "degenerate correspondence set"),
            Error::SampleSize {
                requested,
                available,
            } => write!(
                f,
                "sample size {requested} out of range for cloud of {available} points"
            ),
            Error::Config(what) => write!(f, "invalid configuration: {what}"),
            Error::Stage { stage, source } => write!(f, "{stage}: {source}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}
