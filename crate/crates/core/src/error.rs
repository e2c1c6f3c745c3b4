use thiserror::Error;

/// Which primary a collision or regularization refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Primary {
    Earth,
    Moon,
}

impl std::fmt::Display for Primary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Primary::Earth => write!(f, "earth"),
            Primary::Moon => write!(f, "moon"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("evaluation at the position of the {0}")]
    Collision(Primary),

    #[error("evaluation at the origin of Hill's problem")]
    HillCollision,

    #[error("involution {0} is not a symmetry of this problem")]
    UnsupportedInvolution(&'static str),

    #[error("root bracketing failed on [{lo}, {hi}]: {context}")]
    Bracketing { lo: f64, hi: f64, context: String },

    #[error("north pole of the sphere is excluded (collision point)")]
    NorthPole,

    #[error("step size underflow at t = {t}; distance to primary {distance:.3e} (switch to the regularized chart)")]
    StepUnderflow { t: f64, distance: f64 },

    #[error("too close to a primary at t = {t}: distance {distance:.3e}")]
    NearCollision { t: f64, distance: f64 },

    #[error("constraint drift {drift:.3e} exceeds limit {limit:.3e} at t = {t}")]
    ConstraintDrift { t: f64, drift: f64, limit: f64 },

    #[error("frame degeneracy at t = {t}: {reason}")]
    FrameDegenerate { t: f64, reason: String },

    #[error("degenerate crossing(s) at t = {times:?}")]
    DegenerateCrossing { times: Vec<f64> },

    #[error("degenerate endpoint: |det(Id - Psi(T))| = {det:.3e}")]
    DegenerateEndpoint { det: f64 },

    #[error("fiber root finding: {count} roots of sign {sign} at theta = {theta} (not starshaped)")]
    NotStarshaped { theta: f64, sign: i8, count: usize },

    #[error("cover construction invalid, clause {clause}: {detail}")]
    CoverContract { clause: &'static str, detail: String },

    #[error("sampling failure: {0}")]
    Sampling(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
