use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A lane violated one of its structural invariants.
    InvalidLane(&'static str),
    InvalidCurve(&'static str),
    InvalidCamera(&'static str),
    InvalidConfig(&'static str),
    /// The curve denominator vanishes at this row.
    SingularRow { v: f64 },
    /// Camera-frame depth at or below the projection guard.
    BehindCamera { depth: f64 },
    NoGroundIntersection,
    Underdetermined { points: usize, params: usize },
    /// Fewer than two visible points.
    DegenerateLane { visible: usize },
    ZeroLengthSegment,
    /// A Gaussian scale fell under the conditioning floor.
    NumericallySingular { value: f64 },
    NoFeasibleAssignment,
    AnchorMismatch { expected: usize, found: usize },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidLane(why) => write!(f, "invalid lane: {why}"),
            Error::InvalidCurve(why) => write!(f, "invalid curve: {why}"),
            Error::InvalidCamera(why) => write!(f, "invalid camera: {why}"),
            Error::InvalidConfig(why) => write!(f, "invalid configuration: {why}"),
            Error::SingularRow { v } => write!(f, "curve is singular at row v = {v}"),
            Error::BehindCamera { depth } => {
                write!(f, "point is behind the camera (depth {depth} m)")
            }
            Error::NoGroundIntersection => f.write_str("pixel ray does not hit the ground plane"),
            Error::Underdetermined { points, params } => write!(
                f,
                "underdetermined fit: {points} observations for {params} parameters"
            ),
            Error::DegenerateLane { visible } => {
                write!(f, "lane has {visible} visible point(s), need at least 2")
            }
            Error::ZeroLengthSegment => f.write_str("segment endpoints coincide"),
            Error::NumericallySingular { value } => {
                write!(f, "gaussian scale {value} is below the 1e-6 m floor")
            }
            Error::NoFeasibleAssignment => {
                f.write_str("every complete assignment uses a forbidden pair")
            }
            Error::AnchorMismatch { expected, found } => {
                write!(f, "anchor mismatch: expected {expected} points, found {found}")
            }
        }
    }
}

impl core::error::Error for Error {}
