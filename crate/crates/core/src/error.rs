use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("form is degenerate at {0:?}: contact condition fails")]
    Degenerate(Vec<f64>),
    #[error("point {0:?} lies outside the chart domain")]
    Domain(Vec<f64>),
    #[error("degree error: {0}")]
    Degree(String),
    #[error("singular linear system")]
    Singular,
    #[error("unknown model `{0}`")]
    UnknownModel(String),
    #[error("unknown action `{0}` for model `{1}`")]
    UnknownAction(String, String),
    #[error("action `{0}` does not preserve the contact form (residual {1:.3e})")]
    NotContact(String, f64),
    #[error("frame is not an admissible CR frame: {0}")]
    BadFrame(String),
    #[error("rank deficient system ({0} of {1})")]
    RankDeficient(usize, usize),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
