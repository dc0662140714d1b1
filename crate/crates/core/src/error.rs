use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A quantity left its admissible range (non-positive temperature, ...).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("slip coefficients are not admissible: {0}")]
    Inadmissible(String),

    #[error("config error at line {line}: {msg}")]
    Config { line: usize, msg: String },

    /// An iterative solve did not reach its tolerance.
    #[error("{what} stagnated after {iterations} iterations (relative residual {residual:.3e})")]
    Stagnation {
        what: &'static str,
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    #[error("fixed-point iteration diverged: {0}")]
    Divergence(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::InvalidParams(_) => 2,
            _ => 1,
        }
    }
}
