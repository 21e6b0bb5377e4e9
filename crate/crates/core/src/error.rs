use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid schedule configuration: {0}")]
    ScheduleConfig(String),

    #[error("step {t} out of range [1, {max}]")]
    StepRange { t: usize, max: usize },

    #[error("shape mismatch: expected {expected}, got {got} ({what})")]
    Shape {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("noise stream: {0}")]
    NoiseStream(String),

    #[error("step order: target step {to} must be below current step {from}")]
    StepOrder { from: usize, to: usize },

    #[error("invalid checkpoint: {0}")]
    Checkpoint(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("cannot normalize a zero vector")]
    Normalization,

    #[error("need at least 2 contexts for negative selection, got {0}")]
    InsufficientContexts(usize),

    #[error("impostor pairs need at least 2 identities, got {0}")]
    ImpostorPairs(usize),

    #[error("degenerate score distribution: {0}")]
    DegenerateDistribution(String),

    #[error("skewed error ratio undefined: best group accuracy is 100%")]
    SerUndefined,

    #[error("training diverged at epoch {epoch}, step {step}: loss {loss}")]
    TrainingDivergence { epoch: usize, step: usize, loss: f64 },
}

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Shape { what, expected, got })
    }
}
