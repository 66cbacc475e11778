use thiserror::Error;

/// Errors surfaced by parameter validation, series construction and profile
/// evaluation. Each variant names the violated constraint so the CLI can
/// report the reason verbatim.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("gamma = {gamma} violates {constraint}: no smooth solution exists there")]
    GammaOutOfBand { gamma: f64, constraint: &'static str },

    #[error("n = {n} violates {constraint}: the sonic-point regularity analysis requires n even and >= 4")]
    InvalidN { n: i64, constraint: &'static str },

    #[error("gamma = {gamma} sits exactly on the singular band endpoint {endpoint}; denominators and determinants degenerate there")]
    SingularBandEndpoint { gamma: f64, endpoint: &'static str },

    #[error("coefficient matrix is singular at order M = {m}: gamma = {gamma} is within {dist:.3e} of the resonance gamma_M = 4/3 + 1/(2M) = {gamma_star}")]
    Resonance {
        m: usize,
        gamma: f64,
        gamma_star: f64,
        dist: f64,
    },

    #[error("coefficient sequences have mismatched lengths {left} and {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("order {requested} requested but only coefficients through {available} are available")]
    InsufficientOrder { requested: usize, available: usize },

    #[error("series evaluation at y = {y} refused: outside the estimated convergence radius nu = {nu}")]
    OutsideRadius { y: f64, nu: f64 },

    #[error("no handoff point found with series tail below rel_tol = {rel_tol}; increase the series order")]
    OrderTooLow { rel_tol: f64 },

    #[error("state at y = {y} has nonpositive rho = {rho} or omega = {omega}")]
    NonPositiveState { y: f64, rho: f64, omega: f64 },

    #[error("sonic proximity at y = {y}: |G| = {g_abs:.3e} is below the relative floor {floor:.3e}")]
    SonicProximity { y: f64, g_abs: f64, floor: f64 },

    #[error("G(y0) = {g} >= 0 at the handoff point y0 = {y0}; cannot start a supersonic integration")]
    NotSupersonicAtStart { y0: f64, g: f64 },

    #[error("trajectory too short for asymptotics: reached y = {reached}, need y >= {needed}")]
    TrajectoryTooShort { reached: f64, needed: f64 },

    #[error("y = {y} outside the computed profile range [{y_min}, {y_max}]; extend ymax to cover it")]
    OutOfProfileRange { y: f64, y_min: f64, y_max: f64 },

    #[error("far-field solution undefined: gamma = alpha = {gamma} excluded by the scaling constraints")]
    GammaEqualsAlpha { gamma: f64 },

    #[error("malformed profile file at line {line}: {message}")]
    MalformedProfile { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
