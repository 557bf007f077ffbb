use thiserror::Error;

/// Errors raised by the benchmark library.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A contour rule or iterative method failed its own certification.
    #[error("not converged: {0}")]
    NotConverged(String),

    #[error("no zero of det M near {0}")]
    NoZero(String),

    #[error("diverged: {0}")]
    Diverged(String),

    #[error("iterate left the admissible region: {0}")]
    LeftAdmissibleRegion(String),

    #[error("rank-deficient Jacobian (condition number {0:.3e})")]
    RankDeficient(f64),

    #[error("degenerate null-vector parametrization at {0}")]
    DegenerateParametrization(String),

    /// The shift coincides with an eigenvalue of the pencil.
    #[error("singular shift")]
    SingularShift,

    /// Eigensolver did not certify the requested pairs; best residuals attached.
    #[error("eigensolver not converged (best residuals {residuals:?})")]
    EigNotConverged { residuals: Vec<f64> },

    #[error("ambiguous eigenvalue pairing: {0}")]
    PairingAmbiguity(String),

    #[error("singular Gram matrix in alignment space")]
    SingularGram,

    #[error("size overflow: {0}")]
    SizeOverflow(String),

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
