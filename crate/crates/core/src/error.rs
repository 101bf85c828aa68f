use thiserror::Error;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("syntax error at position {pos}: {msg}")]
    Syntax { pos: usize, msg: String },

    #[error("unknown identifier `{name}` at position {pos}")]
    UnknownIdentifier { name: String, pos: usize },

    #[error("missing required field `{0}`")]
    MissingField(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid problem: {0}")]
    Invalid(String),

    #[error("{what} evaluated to a non-finite value at x = {x}")]
    NonFinite { what: String, x: f64 },

    #[error("x = {0} lies outside the integration domain")]
    OutOfDomain(f64),

    #[error("step size underflow at x = {x}")]
    StepUnderflow { x: f64 },

    #[error("could not bracket eigenvalue k = {k}")]
    Bracket { k: usize },

    #[error(
        "degenerate jacobian along the homotopy at t = {t}, lambda = {lambda}, theta = {theta}"
    )]
    DegenerateJacobian { t: f64, lambda: f64, theta: f64 },

    #[error("nodal class changed at continuation step {step} (t = {t}): {detail}")]
    NodalClassChanged { step: usize, t: f64, detail: String },

    #[error("newton iteration diverged: {0}")]
    NewtonDivergence(String),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("iteration did not converge: {0}")]
    NoConvergence(String),

    #[error("precondition violated: {0}")]
    Precondition(String),
}

pub type Result<T> = std::result::Result<T, Error>;
