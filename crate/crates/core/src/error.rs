use thiserror::Error;

/// Errors raised by design construction, rounding and simulation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid group size bounds: {0}")]
    InvalidBounds(String),

    #[error("invalid design: {0}")]
    InvalidDesign(String),

    /// The response probability collapsed to 0 or 1 at this group size.
    #[error("degenerate model at group size {size}: response probability {pi}")]
    DegenerateModel { size: f64, pi: f64 },

    /// The requested parameter (or the full vector) is not estimable under the design.
    #[error("criterion undefined: {0}")]
    CriterionUndefined(String),

    #[error("no sign change of the {equation} equation on ({lower}, {upper})")]
    RootBracketing {
        equation: &'static str,
        lower: f64,
        upper: f64,
    },

    #[error("{count} sign changes of the {equation} equation; expected exactly one")]
    RootAmbiguity {
        equation: &'static str,
        count: usize,
    },

    #[error("invalid support: {0}")]
    InvalidSupport(String),

    #[error("cannot apportion {n} trials over {k} support points")]
    Infeasible { n: u64, k: usize },

    #[error("rounded group sizes collide at {size}")]
    SizeCollision { size: u64 },

    #[error("efficiency undefined: {0}")]
    EfficiencyUndefined(String),
}

pub type Result<T> = std::result::Result<T, Error>;
