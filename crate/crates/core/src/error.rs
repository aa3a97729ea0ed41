use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(
        "eps_local = {eps} is outside the proven regime of the subsampling amplification bound \
         (requires eps_local <= 1); pass --allow-extrapolation to apply the formula anyway"
    )]
    OutOfRegime { eps: f64 },

    #[error(
        "Hoeffding delta' = 2*exp(-2*beta^2*N) = {delta_prime:.6} >= 1 for beta = {beta}, N = {num_clients}; \
         need N >= {min_clients} for this beta"
    )]
    DegenerateHoeffding {
        delta_prime: f64,
        beta: f64,
        num_clients: usize,
        min_clients: u64,
    },

    #[error("degenerate subsampling ratio q = {0}: the moments bound needs 0 < q < 1")]
    DegenerateRatio(f64),

    #[error("no feasible total epsilon below the search ceiling {ceiling}")]
    SearchFailure { ceiling: f64 },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("split fraction {fraction} leaves an empty block for dimension {dim}")]
    InvalidFraction { fraction: f64, dim: usize },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("cannot partition {samples} samples across {clients} clients")]
    TooManyClients { clients: usize, samples: usize },

    #[error("degenerate configuration: {0}")]
    DegenerateConfig(String),

    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by bad inputs rather than by the environment.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Io(_))
    }
}
