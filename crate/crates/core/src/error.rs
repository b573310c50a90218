use thiserror::Error;

/// Errors produced across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("mode layouts differ: {0}")]
    LayoutMismatch(String),

    #[error("matrix is not symmetric (max asymmetry {0:.3e})")]
    NotSymmetric(f64),

    #[error("matrix is not positive definite (min eigenvalue {0:.3e})")]
    NotPositiveDefinite(f64),

    #[error("covariance-shape matrix violates the purity condition: |det M - 1| = {0:.3e}")]
    ImpureState(f64),

    #[error("non-finite value in {what}: {value}")]
    NonFinite { what: &'static str, value: f64 },

    #[error("non-finite state during integration at t = {t:.6e}, x = {state:?}")]
    NonFiniteState { t: f64, state: Vec<f64> },

    #[error("integration failed at encoding parameter {omega:.6e}: {source}")]
    TrajectoryFailed {
        omega: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid step size {0}")]
    InvalidStep(f64),

    #[error("invalid stage: {0}")]
    InvalidStage(String),

    #[error("{flagged} of {total} trajectories were non-finite or escaped (limit {limit})")]
    TooManyEscapes {
        flagged: usize,
        total: usize,
        limit: usize,
    },

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("negative variance {0:.3e} passed where a variance is required")]
    NegativeVariance(f64),

    #[error("operator is not Hermitian (max deviation {0:.3e})")]
    NotHermitian(f64),

    #[error("state norm drifted by {0:.3e} (limit {1:.1e})")]
    NormDrift(f64, f64),

    #[error("Fock truncation tail population {found:.3e} exceeds {limit:.1e} on mode {mode}")]
    TruncationTail { mode: usize, found: f64, limit: f64 },

    #[error("finite-difference step {0:.3e} is below the roundoff floor")]
    StepBelowRoundoff(f64),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("scenario failed at grid point {grid:.6}: {source}")]
    GridPoint {
        grid: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Attach the encoding-parameter value at which a trajectory failed.
    pub fn at_omega(self, omega: f64) -> Error {
        Error::TrajectoryFailed {
            omega,
            source: Box::new(self),
        }
    }

    /// Attach the scenario grid value at which a run failed.
    pub fn at_grid_point(self, grid: f64) -> Error {
        Error::GridPoint {
            grid,
            source: Box::new(self),
        }
    }
}
