use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("geometric diffraction: sine factor {factor:e} vanishes at delta = {delta}, eta = {eta}")]
    GeometricDiffraction { delta: f64, eta: f64, factor: f64 },

    #[error("no singularity prediction for {0} orbits")]
    UnsupportedOrbit(String),

    #[error("ill-conditioned billiard step: {0}")]
    Tolerance(String),

    #[error("search grid of {requested} shots exceeds the cap of {cap}")]
    BudgetExceeded { requested: usize, cap: usize },

    #[error("degenerate element {index} with area {area:e}")]
    DegenerateElement { index: usize, area: f64 },

    #[error("eigenvalue {index} did not converge")]
    ConvergenceFailure { index: usize },

    #[error("singular pivot in sparse factorization at column {column}")]
    SingularPivot { column: usize },

    #[error("spectra do not match: {0}")]
    Mismatch(String),

    #[error("heat trace truncation too large at t = {rejected:?}")]
    Tail { rejected: Vec<f64> },

    #[error("design matrix condition number {0:e} exceeds the limit")]
    IllConditioned(f64),

    #[error("outside the trusted spectral range: {0}")]
    Range(String),

    #[error("degenerate power-law fit: {0}")]
    DegenerateFit(String),

    #[error("no solution: {0}")]
    NoSolution(String),

    #[error("infeasible invariants: {0}")]
    Infeasible(String),

    #[error("ambiguous reconstruction case: {0}")]
    Ambiguous(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Wraps an error with the name of the pipeline stage that produced it.
    pub fn at_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Innermost error, skipping any stage labels.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }
}

pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| e.at_stage(stage))
    }
}
