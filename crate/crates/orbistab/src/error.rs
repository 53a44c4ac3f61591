use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("syntax error at byte {pos}: {msg}")]
    Syntax { pos: usize, msg: String },

    #[error("unknown function `{name}` at byte {pos}")]
    UnknownFunction { name: String, pos: usize },

    #[error("unbound parameter `{name}`")]
    UnboundParameter { name: String },

    #[error("invalid system definition: {0}")]
    InvalidSystem(String),

    #[error("state outside field domain: {0}")]
    Domain(String),

    #[error("non-finite state encountered at t = {t}")]
    NonFiniteState { t: f64 },

    #[error("step size underflow at t = {t} (h = {h:.3e})")]
    StepUnderflow { t: f64, h: f64 },

    #[error("integration exceeded {max_steps} steps at t = {t}")]
    MaxStepsExceeded { t: f64, max_steps: usize },

    #[error("found {found} section crossings, requested {requested}")]
    FewerCrossings { found: usize, requested: usize },

    #[error("fiber projection hit a rank-deficient Jacobian near ({x}, {y}, {z})")]
    ProjectionSingular { x: f64, y: f64, z: f64 },

    #[error("fiber projection did not converge in {iterations} iterations (residual {residual:.3e})")]
    ProjectionDiverged { iterations: usize, residual: f64 },

    #[error("seed lies at an equilibrium of the field (|X| = {norm:.3e})")]
    EquilibriumSeed { norm: f64 },

    #[error("no closing return found: {0}")]
    NoPeriodicReturn(String),

    #[error("orbit closure failure: residual {residual:.3e} exceeds tolerance {tolerance:.3e}")]
    ClosureFailure { residual: f64, tolerance: f64 },

    #[error("orbit validation failed: {0}")]
    OrbitInvalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
