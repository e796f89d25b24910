//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Truncation parameter too small for the requested operation.
    #[error("invalid truncation: {0}")]
    InvalidTruncation(String),

    /// Grid cannot hold the requested harmonics without aliasing.
    #[error("grid of {grid} points cannot represent harmonics up to {k_max} (need >= {need})")]
    Aliasing {
        grid: usize,
        k_max: usize,
        need: usize,
    },

    /// Eigenvalue doubling test failed to settle below the tolerance.
    #[error(
        "eigenvalues not converged after {doublings} doublings (m = {m}): worst delta {worst_delta:.3e} > tol {tol:.3e}"
    )]
    ConvergenceFailure {
        m: usize,
        doublings: usize,
        worst_delta: f64,
        tol: f64,
        /// Last two iterates of the contested eigenvalues, coarse then fine.
        lambdas_coarse: Vec<f64>,
        lambdas_fine: Vec<f64>,
    },

    /// The phase-normalization inner product is numerically zero; this
    /// signals insufficient truncation, not an actual degeneracy.
    #[error("phase normalization degenerate at column {n}: |<f_n | S f_(n-1)>| = {value:.3e} < {floor:.3e}")]
    PhaseDegeneracy { n: usize, value: f64, floor: f64 },

    /// Spectral data violating a structural guarantee (ordering, positivity).
    #[error("invalid spectrum: {0}")]
    InvalidSpectrum(String),

    /// Evaluation point too close to a pole of the generating function.
    #[error("lambda = {lambda} is within {dist:.3e} of pole -lambda_{n}")]
    PoleProximity { lambda: f64, n: usize, dist: f64 },

    /// Coordinates whose reconstruction polynomial has a root on or inside
    /// the closed unit disc.
    #[error("inconsistent coordinates: reconstruction pole |q| = {abs_q} not inside the unit disc")]
    InconsistentCoordinates { abs_q: f64 },

    /// Resolvent sampling too close to the boundary of the disc.
    #[error("ill-conditioned resolvent solve at |z| = {radius}: residual {residual:.3e}")]
    IllConditioned { radius: f64, residual: f64 },

    /// Parameter outside its documented domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Time step rejected by the conservation guard of the direct solver.
    #[error("step rejected at t = {t}: |u|^2 drift {drift:.3e} exceeds guard {guard:.3e}")]
    StepRejected { t: f64, drift: f64, guard: f64 },

    /// Angle variable requested where the action vanishes.
    #[error("angle undefined: gamma_{n} = {gamma:.3e} below floor")]
    UndefinedAngle { n: usize, gamma: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
