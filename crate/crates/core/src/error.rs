use thiserror::Error;

/// Errors raised by the numerical library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("unsupported scale: {0}")]
    UnsupportedScale(String),

    /// A quadrature, truncation or extrapolation target was missed.
    #[error("accuracy error in {what}: achieved {achieved:.3e}, requested {requested:.3e}")]
    Accuracy {
        what: String,
        achieved: f64,
        requested: f64,
    },

    #[error("direction has no positive-energy crest: B(v,v) = {0:.3e}")]
    NoScale(f64),

    #[error("only the trivial solution exists: {0}")]
    TrivialOnly(String),

    #[error("no convergence after {iterations} iterations (last residual {residual:.3e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    #[error("malformed data: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
