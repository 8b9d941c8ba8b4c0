use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Clone, Debug, PartialEq)]
pub enum Error {
    /// Malformed geometric input (zero-length direction, non-orthonormal basis, ...).
    InvalidInput(&'static str),
    /// A tuning parameter is out of its admissible range.
    InvalidParameter(&'static str),
    /// Exact enumeration was asked for a problem that is too large.
    SizeLimit { size: usize, limit: usize },
    /// Not enough correspondences to attempt registration.
    TooFewMatches { found: usize, required: usize },
    /// Matches exist but do not constrain all six degrees of freedom.
    DegenerateConfiguration(&'static str),
    /// A distance function needs per-object data the scan does not carry.
    MissingMetadata(&'static str),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidInput(what) => write!(f, "invalid input: {what}"),
            Error::InvalidParameter(what) => write!(f, "invalid parameter: {what}"),
            Error::SizeLimit { size, limit } => {
                write!(f, "problem size {size} exceeds the limit of {limit}")
            }
            Error::TooFewMatches { found, required } => {
                write!(f, "found {found} matches, at least {required} required")
            }
            Error::DegenerateConfiguration(what) => write!(f, "degenerate configuration: {what}"),
            Error::MissingMetadata(what) => write!(f, "missing metadata: {what}"),
        }
    }
}

impl core::error::Error for Error {}
