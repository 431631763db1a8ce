//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Configuration document does not match the schema.
    #[error("schema violation at `{path}`: {detail}")]
    Schema { path: String, detail: String },

    /// A validated quantity is outside its admissible range.
    #[error("invariant violation: `{field}` {bound}, got {value}")]
    Invariant {
        field: String,
        bound: String,
        value: f64,
    },

    /// Newton iteration did not reach the requested residual.
    #[error("power flow did not converge after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    /// Jacobian became numerically singular during a solve.
    #[error("singular Jacobian (condition estimate {cond:.3e})")]
    SingularJacobian { cond: f64 },

    /// Denominator of the bus-voltage elimination vanished.
    #[error("singular elimination denominator k11*k23 - k13*k21 = {value:.3e}")]
    SingularDenominator { value: f64 },

    /// Division by a rational function that is identically zero.
    #[error("division by the zero rational function")]
    DivisionByZero,

    /// A 2x2 rational matrix has an identically zero determinant.
    #[error("singular rational matrix (determinant numerator norm {det_norm:.3e})")]
    SingularMatrix { det_norm: f64 },

    /// One of the intermediate inverses of the interconnection failed.
    #[error("singular intermediate while assembling the interconnection: {which}")]
    SingularIntermediate { which: &'static str },

    /// The pencil (A, E) is singular or an eigenvalue sweep failed.
    #[error("singular descriptor pencil: {detail}")]
    SingularPencil { detail: String },

    /// Root finding was asked for a constant polynomial.
    #[error("cannot extract roots of a degree-zero polynomial")]
    DegreeZero,

    /// Root finding failed to meet the residual bound.
    #[error("root finding failed: {detail}")]
    RootsFailed { detail: String },

    /// Evaluation point is too close to a pole.
    #[error("evaluation point {point} is within 1e-12 of a pole")]
    PoleProximity { point: String },

    /// DC gain requested for a channel with a pole at the origin.
    #[error("transfer function has an integrator; dc gain undefined")]
    IntegratorAtDc,

    /// Simulation network matrix is singular.
    #[error("singular network: {detail}")]
    SingularNetwork { detail: String },

    /// Simulation state norm exploded.
    #[error("simulation diverged at t = {t:.6} s (state norm {norm:.3e})")]
    Divergence { t: f64, norm: f64 },

    /// Equilibrium initialisation did not converge.
    #[error("equilibrium initialisation did not converge (residual {residual:.3e})")]
    EquilibriumFailed { residual: f64 },

    /// Extraction window is not settled or overlaps the switch.
    #[error("unsettled extraction window: {detail}")]
    UnsettledWindow { detail: String },

    /// Malformed sweep specification.
    #[error("invalid sweep specification: {detail}")]
    InvalidSweep { detail: String },

    /// Invalid argument outside the above categories.
    #[error("invalid argument: {detail}")]
    InvalidArgument { detail: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
