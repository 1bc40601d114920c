//! Error type shared across the crate.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

/// Errors produced by dataset construction, spatial queries, estimation, and
/// sampling.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A point with identical coordinates is already present; the dataset is
    /// left unchanged.
    DuplicatePoint { coords: Vec<f64> },
    /// A coordinate falls outside the design-space bounding box.
    OutOfBounds { coords: Vec<f64> },
    /// Mixed coordinate dimensions.
    DimensionMismatch { expected: usize, got: usize },
    /// A query asked for more neighbors (or fit support) than there are
    /// points.
    NotEnoughPoints { needed: usize, available: usize },
    /// No point carries positive kernel weight at the query location.
    EmptyNeighborhood,
    /// The local design matrix has rank below p + 1 even after the ridge
    /// retry.
    RankDeficient,
    /// All points are collinear (or fewer than three); no triangulation
    /// exists.
    DegenerateTriangulation,
    /// The operation is only implemented for the stated dimension.
    UnsupportedDimension { dim: usize },
    /// A stage pmf with no candidates.
    EmptyPmf,
    /// Every grid cell has already been sampled.
    NoUnsampledCells,
    /// A region lies (partly) outside the grid.
    RegionOutOfBounds,
    /// Invalid configuration value.
    InvalidParameter(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DuplicatePoint { coords } => {
                write!(f, "duplicate design point at {coords:?}")
            }
            Error::OutOfBounds { coords } => {
                write!(f, "point {coords:?} lies outside the design bounds")
            }
            Error::DimensionMismatch { expected, got } => {
                write!(f, "expected dimension {expected}, got {got}")
            }
            Error::NotEnoughPoints { needed, available } => write!(
                f,
                "need {needed} points but only {available} are available; \
                 reduce k or add design points"
            ),
            Error::EmptyNeighborhood => write!(f, "empty neighborhood: zero total kernel weight"),
            Error::RankDeficient => write!(f, "local design matrix is rank deficient"),
            Error::DegenerateTriangulation => write!(f, "degenerate triangulation"),
            Error::UnsupportedDimension { dim } => {
                write!(f, "operation not supported in dimension {dim}")
            }
            Error::EmptyPmf => write!(f, "stage pmf has no candidates"),
            Error::NoUnsampledCells => write!(f, "no unsampled grid cells remain"),
            Error::RegionOutOfBounds => write!(f, "region extends outside the grid"),
            Error::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
