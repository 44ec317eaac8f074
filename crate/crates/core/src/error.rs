use thiserror::Error;

use crate::triangle::Triangle;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("coupling J(0) is undefined (self-coupling)")]
    SelfCoupling,

    #[error("tail sum must start at n >= 2, got {0}")]
    TailStart(u64),

    #[error("triangles {0} and {1} partially overlap")]
    PartialOverlap(Triangle, Triangle),

    #[error("configuration violates dist(T,T') >= min(|T|,|T'|) for {0} and {1}")]
    Incompatible(Triangle, Triangle),

    #[error("added and context configurations share triangle {0}")]
    SharedTriangle(Triangle),

    #[error("triangle {0} lies outside window [{1}, {2}]")]
    OutsideWindow(Triangle, i64, i64),

    #[error("target is not a contour of the configuration")]
    NotAContour,

    #[error("configuration decomposes into {0} contours, expected exactly one")]
    NotSingleContour(usize),

    #[error("square process stuck with {0} squares and no arrows")]
    StuckProcess(usize),

    #[error("internal consistency failure: {0}")]
    Internal(String),

    #[error(
        "exact arithmetic needs alpha = 0 and a window of at most {max} sites, got alpha = {alpha}, {sites} sites"
    )]
    ExactModeUnsupported { alpha: f64, sites: usize, max: usize },

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
