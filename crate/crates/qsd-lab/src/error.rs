use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum QsdError {
    /// The mass kept in `S` by the conditioned evolution fell below the
    /// underflow floor; no further conditioning is meaningful.
    #[error("survival mass underflowed after {steps} steps")]
    SurvivalUnderflow { steps: usize },

    #[error("stochastic domination does not hold: {0}")]
    NotDominated(String),

    #[error("poset with {n} states exceeds the upper-set enumeration cap of {cap}")]
    PosetTooLarge { n: usize, cap: usize },

    #[error("instance too large for exact enumeration: {0}")]
    InstanceTooLarge(String),

    #[error("invalid rates: {0}")]
    InvalidRates(String),

    #[error(
        "nu(1) = {nu1} lies outside the family range (gamma = {gamma}); \
         recursion goes negative at x = {witness}"
    )]
    OutOfFamily { nu1: f64, gamma: f64, witness: usize },

    #[error("recursion produced a negative weight at x = {0}")]
    NegativeWeight(usize),

    #[error("hypothesis failed: {0}")]
    HypothesisFailed(String),

    #[error("kernel is not irreducible on S")]
    NotIrreducible,

    #[error("input distribution is not a qsd (residual {0:.3e})")]
    NotAQsd(f64),

    #[error("iteration did not converge within {0} steps")]
    NotConverged(usize),

    #[error("inconsistent per-class inputs: {0}")]
    InconsistentInputs(String),

    #[error("uniformization series did not converge within {0} terms")]
    SeriesNotConverged(usize),

    /// The coupled Gibbs sampler produced an unordered pair. This indicates a
    /// bug in the condition checkers, not a recoverable condition.
    #[error("order violation in coupled Gibbs update at site {site} (sweep {sweep})")]
    OrderViolation { site: usize, sweep: usize },

    #[error("operation requires a total order on the state space")]
    TotalOrderRequired,

    #[error("state spaces do not match ({left} vs {right} states)")]
    SpaceMismatch { left: usize, right: usize },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid chain specification: {0}")]
    InvalidChainSpec(String),
}

pub type Result<T> = std::result::Result<T, QsdError>;
