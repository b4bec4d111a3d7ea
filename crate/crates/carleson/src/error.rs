use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid arc length {0}: must lie in (0, 1]")]
    ArcLength(f64),
    #[error("tree depth {0} exceeds the guard of {max}", max = crate::geometry::MAX_DEPTH)]
    DepthGuard(u32),
    #[error("syntax error at line {line}, column {col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("weight is not integrable: {0}")]
    Integrability(String),
    #[error("quadrature did not converge (achieved relative error {achieved:.3e})")]
    Quadrature { achieved: f64 },
    #[error("root finding failed on a segment declared monotone near r = {0}")]
    RootFinding(f64),
    #[error("level {lambda} is below the root average {root_average}")]
    LevelBelowAverage { lambda: f64, root_average: f64 },
    #[error("invalid schema: {0}")]
    Schema(String),
    #[error("unknown builtin weight `{0}`")]
    UnknownBuiltin(String),
    #[error("unknown condition `{0}`")]
    UnknownCondition(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
