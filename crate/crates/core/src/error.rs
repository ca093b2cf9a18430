use thiserror::Error;

use crate::dsl::ParseError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid spec: {0}")]
    InvalidSpec(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("port not found: {0}")]
    PortNotFound(String),

    #[error("port already used: {0}")]
    PortAlreadyUsed(String),

    #[error("singular algebraic loop (reciprocal condition number {rcond:.3e})")]
    SingularLoop { rcond: f64 },

    #[error("dangling port: {0}")]
    DanglingPort(String),

    #[error("matrix is not Hurwitz (stability margin {margin:.3e})")]
    NotHurwitz { margin: f64 },

    #[error("invalid integration grid: {0}")]
    InvalidStep(String),

    #[error("invalid initial condition: {0}")]
    InvalidInitial(String),

    #[error("invalid drive: {0}")]
    InvalidDrive(String),

    #[error("observer was not built with a verification output")]
    NotVerifiable,

    #[error("linear solve failed: {0}")]
    Singular(String),

    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
