use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid circuit: {0}")]
    InvalidCircuit(String),

    #[error("capacitance matrix is singular along null direction {direction:?}")]
    SingularCapacitance { direction: Vec<f64> },

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error(
        "basis dimension {dimension} exceeds the limit {limit}; lower n_max (currently {n_max})"
    )]
    DimensionTooLarge {
        dimension: usize,
        limit: usize,
        n_max: usize,
    },

    #[error("eigensolver did not converge after {iterations} restarts (best residuals {residuals:?})")]
    NotConverged {
        iterations: usize,
        residuals: Vec<f64>,
    },

    #[error("qubit gap {delta:e} GHz is too close to degeneracy")]
    DegenerateQubit { delta: f64 },

    #[error(
        "full hybridization of the low and high energy subspaces: smallest overlap singular value \
         {min_singular:.3e} below threshold {threshold}"
    )]
    Hybridization {
        min_singular: f64,
        threshold: f64,
        subspace_gap: Option<f64>,
    },

    #[error("matrix square root undefined: eigenvalue {0} lies on the branch cut")]
    SquareRootBranch(String),

    #[error("operator is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),

    #[error("config error at line {line}: {message}")]
    ConfigParse { line: usize, message: String },

    #[error("invalid config field `{field}`: {message}")]
    ConfigField { field: String, message: String },

    #[error("insufficient points for scaling fit: {0}")]
    InsufficientPoints(String),

    #[error("malformed sweep table at record {record}: {message}")]
    CsvFormat { record: usize, message: String },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
