use thiserror::Error;

/// Errors raised by the geometry pipeline and its front ends.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("rank error: Gram determinant {gram_det:e} below threshold")]
    Rank { gram_det: f64 },

    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("unknown identifier `{name}` at line {line}, column {column}")]
    UnknownIdentifier {
        name: String,
        line: usize,
        column: usize,
    },

    #[error("arity error: {0}")]
    Arity(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("unknown gallery entry `{0}`")]
    UnknownGallery(String),

    #[error("near-flat point: 1 - K = {one_minus_k:e}")]
    NearFlat { one_minus_k: f64 },

    #[error("singular point of the polar map: r = {r:e}")]
    SingularPoint { r: f64 },

    #[error("u computations disagree: direct {direct}, via normal curvature {bridge}")]
    ConventionMismatch { direct: f64, bridge: f64 },

    #[error("stencil error: {0}")]
    Stencil(String),

    #[error("flow reached a singular point at arc length {s}")]
    SingularEncounter { s: f64 },

    #[error("flow speed {speed} deviates from 1 at arc length {s}")]
    Step { s: f64, speed: f64 },

    #[error("projection pole collides with the mesh after {retries} rotations")]
    PoleCollision { retries: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
