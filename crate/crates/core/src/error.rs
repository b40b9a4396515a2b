use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid spring system: {0}")]
    InvalidSystem(String),

    #[error("singular stiffness matrix: dynamic nodes {nodes:?} are not tied to any anchor")]
    Singular { nodes: Vec<usize> },

    #[error("solver produced non-finite values at iteration {iteration}")]
    NonFinite { iteration: usize },

    #[error("uninformative response: {0}")]
    Uninformative(String),

    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        expected: (usize, usize, usize),
        found: (usize, usize, usize),
    },

    #[error("initialization failed: {0}")]
    Init(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
