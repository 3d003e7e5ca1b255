use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    /// A user callback or derived quantity produced NaN or ±∞.
    #[error("non-finite evaluation at input {input:?}")]
    NonFiniteEvaluation { input: Vec<f64> },

    #[error("frame is numerically singular at q = {q:?} (condition number {condition:e})")]
    SingularFrame { q: Vec<f64>, condition: f64 },

    #[error("velocity Hessian of the reduced Lagrangian is singular (det = {det:e})")]
    SingularMassMatrix { det: f64 },

    /// The unactuated block ∂²l/∂y^α∂y^β cannot be inverted, so the
    /// unactuated accelerations cannot be solved for.
    #[error("unactuated Hessian block is singular (det = {det:e}, threshold {threshold:e})")]
    SingularHessianBlock { det: f64, threshold: f64 },

    /// det R_ab vanished: the first constraint submanifold is not symplectic
    /// and the extremal dynamics is not uniquely determined.
    #[error("regularity matrix is singular (det = {det:e}, threshold {threshold:e})")]
    RegularityFailure { det: f64, threshold: f64 },

    #[error("adaptive step size underflow at t = {t} (h = {h:e})")]
    StepSizeUnderflow { t: f64, h: f64 },

    #[error("shooting did not converge after {iterations} iterations (best residual {best_residual:e})")]
    NoConvergence { iterations: usize, best_residual: f64 },

    #[error("invalid system: {0}")]
    InvalidSystem(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

impl Error {
    pub(crate) fn non_finite<T: crate::Real>(input: &[T]) -> Self {
        Error::NonFiniteEvaluation { input: crate::scalar::primal(input) }
    }
}
