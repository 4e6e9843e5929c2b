use std::io;
use std::path::PathBuf;

use thiserror::Error;

use crate::vlm::VlmError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    /// A file does not follow its on-disk format.
    #[error("{format}: {reason}")]
    Format { format: &'static str, reason: String },

    /// A schema or invariant violation, naming the offending field.
    #[error("invalid {field}: {reason}")]
    InvalidField { field: String, reason: String },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParam { name: &'static str, reason: String },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("rotation is not orthonormal (max deviation {deviation:.3e}, det {det:.6})")]
    NonOrthonormal { deviation: f64, det: f64 },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("plane normal has zero length")]
    ZeroNormal,

    #[error("point cloud has no pixel coordinates")]
    MissingPixels,

    #[error("cannot parse region reply: {0}")]
    ReplyParse(String),

    #[error("grid index {index} outside 1..={max}")]
    IndexOutOfRange { index: i64, max: usize },

    #[error("{region} region is empty after clipping to the object mask")]
    RegionEmpty { region: &'static str },

    #[error("no feasible grasp: {0}")]
    NoFeasibleGrasp(String),

    #[error("degenerate scoring: {0}")]
    DegenerateScoring(String),

    #[error("robot base is directly above or below the shoulder; task plane is undefined")]
    DegeneratePlane,

    #[error("joint {joint} angle {degrees}° outside [{min}°, {max}°]")]
    AngleOutOfRange { joint: u8, degrees: f64, min: f64, max: f64 },

    #[error("no grid cell places the wrist within {max_reach} m of the robot base")]
    NoFeasiblePoint { max_reach: f64 },

    #[error("unknown object kind {0:?}")]
    UnknownObjectKind(String),

    #[error(transparent)]
    Vlm(#[from] VlmError),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn format(format: &'static str, reason: impl Into<String>) -> Self {
        Error::Format {
            format,
            reason: reason.into(),
        }
    }

    pub fn field(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidField {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParam {
            name,
            reason: reason.into(),
        }
    }

    /// Stable identifier printed by the CLI alongside the message.
    pub fn name(&self) -> &'static str {
        match self {
            Error::Io { .. } => "Io",
            Error::Format { .. } => "Format",
            Error::InvalidField { .. } => "InvalidField",
            Error::InvalidParam { .. } => "InvalidParam",
            Error::DimensionMismatch(_) => "DimensionMismatch",
            Error::NonOrthonormal { .. } => "NonOrthonormal",
            Error::Empty(_) => "Empty",
            Error::ZeroNormal => "ZeroNormal",
            Error::MissingPixels => "MissingPixels",
            Error::ReplyParse(_) => "ReplyParse",
            Error::IndexOutOfRange { .. } => "IndexOutOfRange",
            Error::RegionEmpty { .. } => "RegionEmpty",
            Error::NoFeasibleGrasp(_) => "NoFeasibleGrasp",
            Error::DegenerateScoring(_) => "DegenerateScoring",
            Error::DegeneratePlane => "DegeneratePlane",
            Error::AngleOutOfRange { .. } => "AngleOutOfRange",
            Error::NoFeasiblePoint { .. } => "NoFeasiblePoint",
            Error::UnknownObjectKind(_) => "UnknownObjectKind",
            Error::Vlm(e) => e.name(),
        }
    }

    /// True for failures of the vision-language service (transport, HTTP, cache).
    pub fn is_external(&self) -> bool {
        matches!(self, Error::Vlm(_))
    }
}
