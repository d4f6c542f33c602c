use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unknown identity `{0}`")]
    UnknownIdentity(String),

    #[error("no sign change on [{a}, {b}]")]
    Bracketing { a: f64, b: f64 },

    #[error("step size underflow at x = {x}")]
    StepUnderflow { x: f64 },

    #[error("quadrature did not converge on [{a}, {b}] (error estimate {estimate:e})")]
    Quadrature { a: f64, b: f64, estimate: f64 },

    #[error("theta = {0} is degenerate for this operation")]
    DegenerateTheta(String),

    #[error("spectral data not admissible: {0}")]
    Inadmissible(String),

    #[error("lambda is within {distance:e} of the spectrum")]
    NearSpectrum { distance: f64 },

    #[error("root search failed for index {index}: {reason}")]
    RootSearch { index: i64, reason: String },

    #[error("singular linear system (condition estimate {cond:e})")]
    Singular { cond: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("at x = {x}: {source}")]
    AtNode {
        x: f64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn at_stage(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
