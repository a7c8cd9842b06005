use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid chain: {0}")]
    InvalidChain(String),

    #[error("marginal of state {state} at step {step} is zero")]
    ZeroMarginal { step: usize, state: usize },

    #[error("horizon too short: {0}")]
    HorizonTooShort(String),

    #[error("Assumption 2.1 fails at step {step}: backward Dobrushin coefficient {pi} is not < 1")]
    NotContracting { step: usize, pi: f64 },

    #[error("Assumption 2.2 fails at step {step}: backward kernel has a zero entry")]
    NotElliptic { step: usize },

    #[error("invalid observable: {0}")]
    InvalidObservable(String),

    #[error("observable is two-sided; reduce it to a one-sided observable first")]
    TwoSided,

    #[error("normalization collapsed at step {step} (|normalizer| = {value:e}); use a smaller |z|")]
    NormalizationCollapse { step: usize, value: f64 },

    #[error("ambiguous frequency grid: non-decaying frequencies {0:?} are not commensurate; refine the grid")]
    AmbiguousGrid(Vec<f64>),

    #[error("atom budget exceeded: {needed} cells needed, budget {budget}")]
    AtomBudget { needed: usize, budget: usize },

    #[error("refused: {0}")]
    Refused(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("ill-conditioned: {0}")]
    IllConditioned(String),

    #[error("monte carlo precision insufficient: {0}")]
    InsufficientSamples(String),

    #[error("trajectory left the declared invariant ball at step {step}: |{value}| > {radius}")]
    InvariantViolation { step: usize, value: f64, radius: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
