//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("derivative of order {order} is not defined for this datum at alpha = {alpha}")]
    DerivativeUnavailable { alpha: f64, order: u32 },

    #[error("boundary conditions violated: {detail}")]
    BcViolation { detail: String },

    #[error("more than {cap} maximizer candidates survive deduplication")]
    TooManyMaximizers { cap: usize },

    /// The slope maximum is flat through every order we can test. Data of
    /// this kind (slope attaining its maximum on a continuum) persists for
    /// all time but sits outside the finite-maximizer analysis.
    #[error("maximizer at alpha = {alpha} is flat through order {order}; infinite-order contact is not classified")]
    FlatMaximizer { alpha: f64, order: u32 },

    #[error("eta = {eta} is at or beyond the critical value eta_star = {eta_star}")]
    SingularEta { eta: f64, eta_star: f64 },

    #[error("quadrature budget exhausted: best estimate {estimate:e} with error {est_error:e} (target {tol:e})")]
    QuadratureBudgetExceeded {
        estimate: f64,
        est_error: f64,
        tol: f64,
    },

    #[error("special-function argument out of domain: {detail}")]
    DomainError { detail: String },

    #[error("t = {t} is at or beyond the blowup time t_star = {t_star}")]
    BeyondBlowup { t: f64, t_star: f64 },

    #[error("asymptotic window [{lo:e}, {hi:e}] is too shallow or malformed")]
    InsufficientAsymptoticDepth { lo: f64, hi: f64 },

    #[error("flow-map anchor is undetermined for periodic data without odd symmetry")]
    UnanchoredFlow,

    #[error("internal inconsistency: {detail}")]
    InternalInconsistency { detail: String },

    #[error("invalid argument: {detail}")]
    InvalidArgument { detail: String },
}
