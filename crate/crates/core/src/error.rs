use thiserror::Error;

/// Errors produced by the laboratory.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("epsilon must be positive and finite, got {0}")]
    InvalidEpsilon(f64),

    #[error("quadrature on [{a}, {b}] did not converge: estimated error {error:e} after {panels} panels")]
    Quadrature {
        a: f64,
        b: f64,
        error: f64,
        panels: usize,
    },

    #[error("degenerate critical point: H''({at}) = {value}")]
    DegenerateCurvature { at: f64, value: f64 },

    #[error("shape mismatch for {what}: expected {expected}, found {found}")]
    ShapeMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("mass matrix is not positive definite: {0}")]
    MassNotPositive(String),

    #[error("linear solver stagnated at relative residual {residual:e} after {iterations} iterations")]
    SolverStagnation { residual: f64, iterations: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("time step {step}: {source}")]
    Step { step: usize, source: Box<Error> },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_eps(eps: f64) -> Result<()> {
    if eps.is_finite() && eps > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidEpsilon(eps))
    }
}
