use std::fmt;
use std::io;

pub type Result<T> = std::result::Result<T, Error>;

/// Checksum-vector axis: `X` indexes the row checksum `a` (one entry per
/// column of cells), `Y` indexes the column checksum `b` (one entry per row).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

/// Why a detected error could not be repaired in place.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Uncorrectable {
    /// The two checksum axes flag different numbers of indices.
    CountMismatch { xs: usize, ys: usize },
    /// No pairing of flagged indices yields mutually consistent
    /// reconstructions.
    NoConsistentPairing,
    /// A checksum involved in the reconstruction overflowed, so the repaired
    /// value would be non-finite.
    NonfiniteReconstruction,
}

#[derive(Debug)]
pub enum Error {
    DimensionMismatch { expected: (usize, usize), found: (usize, usize) },
    LengthMismatch { left: usize, right: usize },
    BitOutOfRange { bit: u32, width: u32 },
    /// Interpolation needs a boundary-correction term that was not recorded.
    MissingLedger { axis: Axis, offset: i32 },
    Uncorrectable(Uncorrectable),
    /// The same block failed detection twice after a rollback.
    PersistentError { iteration: u64 },
    InvalidParams(String),
    UnknownKernel(String),
    Io(io::Error),
    Format(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimensionMismatch { expected, found } => write!(
                f,
                "dimension mismatch: expected {}x{}, found {}x{}",
                expected.0, expected.1, found.0, found.1
            ),
            Error::LengthMismatch { left, right } => {
                write!(f, "length mismatch: {left} vs {right}")
            }
            Error::BitOutOfRange { bit, width } => {
                write!(f, "bit position {bit} out of range for a {width}-bit element")
            }
            Error::MissingLedger { axis, offset } => write!(
                f,
                "boundary ledger entry missing for {}-offset {offset}",
                match axis {
                    Axis::X => "x",
                    Axis::Y => "y",
                }
            ),
            Error::Uncorrectable(reason) => match reason {
                Uncorrectable::CountMismatch { xs, ys } => write!(
                    f,
                    "uncorrectable: {xs} flagged row-checksum entries vs {ys} column entries"
                ),
                Uncorrectable::NoConsistentPairing => {
                    write!(f, "uncorrectable: no consistent error pairing found")
                }
                Uncorrectable::NonfiniteReconstruction => {
                    write!(f, "uncorrectable: reconstruction would be non-finite")
                }
            },
            Error::PersistentError { iteration } => write!(
                f,
                "persistent error: block ending at iteration {iteration} failed detection after rollback"
            ),
            Error::InvalidParams(msg) => write!(f, "invalid parameters: {msg}"),
            Error::UnknownKernel(name) => write!(f, "unknown kernel: {name}"),
            Error::Io(e) => write!(f, "io error: {e}"),
            Error::Format(msg) => write!(f, "format error: {msg}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(e) => Some(e),
            _ => None,
        }
    }
}

impl From<io::Error> for Error {
    fn from(e: io::Error) -> Self {
        Error::Io(e)
    }
}
