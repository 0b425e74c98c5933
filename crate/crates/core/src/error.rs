use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("dimension mismatch: expected {expected}, found {found} ({context})")]
    DimensionMismatch {
        expected: usize,
        found: usize,
        context: &'static str,
    },

    #[error("requested order {requested} exceeds available order {available}")]
    OrderTooHigh { requested: usize, available: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("not a strictly positive source: min Re spec of the linearization is {min_re}")]
    NotPositiveSource { min_re: f64 },

    #[error("eigensolver failed to converge on a {dim}x{dim} matrix")]
    Eigensolver { dim: usize },

    #[error("singular value decomposition failed to converge on a {rows}x{cols} matrix")]
    Svd { rows: usize, cols: usize },

    #[error(
        "rank decision ambiguous: singular value {sigma:e} is within the ambiguity band of threshold {threshold:e} (gap {gap:e})"
    )]
    RankAmbiguous {
        sigma: f64,
        threshold: f64,
        gap: f64,
    },

    #[error("dual kernel element has a component of size {size:e} above the order bound {bound}")]
    DualOrderViolation { bound: usize, size: f64 },

    #[error("equation is not solvable: {} obstruction(s), largest |T(v)| = {largest:e}", count)]
    Unsolvable { count: usize, largest: f64 },

    #[error("slice system at degree {degree} is singular")]
    SingularSlice { degree: usize },

    #[error("resonant eigenvalue with a {dim}-dimensional kernel has no canonical pointwise solution")]
    ResonantKernel { dim: usize },

    #[error("trajectory left the declared region at t = {t}: {point:?}")]
    RegionExit { t: f64, point: Vec<f64> },

    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },

    #[error("integration exceeded the maximum of {0} steps")]
    TooManySteps(usize),

    #[error("integrand does not decay: fitted rate {rate}")]
    NonDecayingTail { rate: f64 },

    #[error("quantity underflowed before the regression window at t = {t}")]
    Underflow { t: f64 },

    #[error("hypothesis violated at t = {t}: |A(t) - A0| = {deviation:e} >= {limit:e}")]
    HypothesisViolated { t: f64, deviation: f64, limit: f64 },

    #[error("order budget exhausted: {0}")]
    OrderBudget(String),

    #[error("quadrature did not converge: difference {difference:e} with {nodes} nodes")]
    Quadrature { nodes: usize, difference: f64 },

    #[error("field mismatch: {0}")]
    Field(String),

    #[error("malformed json: {0}")]
    Json(String),
}

impl Error {
    /// Whether the error stems from malformed input rather than a numeric failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::ShapeMismatch(_)
                | Error::DimensionMismatch { .. }
                | Error::OrderTooHigh { .. }
                | Error::InvalidInput(_)
                | Error::NotPositiveSource { .. }
                | Error::Field(_)
                | Error::Json(_)
                | Error::OrderBudget(_)
        )
    }
}
