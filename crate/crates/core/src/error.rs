use thiserror::Error;

use crate::expr::ExprError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("unknown model family `{0}`")]
    UnknownFamily(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid rotation matrix: {0}")]
    InvalidRotation(String),
    #[error("invalid settings: {0}")]
    InvalidSettings(String),
    #[error("point {point:?} lies on a Dirac string of the gauge")]
    OnString { point: [f64; 3] },
    #[error("point {point:?} is at a degeneracy (|e| = {norm:e})")]
    AtDegeneracy { point: [f64; 3], norm: f64 },
    #[error("degeneracy inside the finite-difference stencil around {point:?}")]
    DegeneracyInStencil { point: [f64; 3] },
    #[error("loop touches a Dirac string (min (e_x^2+e_y^2)/e^2 = {proxy:e})")]
    LoopTouchesString { proxy: f64 },
    #[error(
        "flux_sphere precondition violated: degeneracy on the sphere of radius {radius} near {point:?}"
    )]
    DegeneracyOnSurface { radius: f64, point: [f64; 3] },
    #[error("tolerance not reached at maximum depth (estimate {estimate:e}, error {error:e})")]
    ToleranceNotReached { estimate: f64, error: f64 },
    #[error(
        "Z = e_x + i e_y vanishes on the loop (min |Z| = {min_abs_z:e}, max |Z| = {max_abs_z:e})"
    )]
    LoopCrossesZero { min_abs_z: f64, max_abs_z: f64 },
    #[error("winding number did not converge with {samples} samples")]
    WindingNotConverged { samples: usize },
    #[error("string piercing at {point:?} has e_z = {ez:e}; hemisphere is ambiguous")]
    AmbiguousHemisphere { point: [f64; 3], ez: f64 },
    #[error("{method} method: {source}")]
    Method {
        method: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Errors caused by bad input rather than by a numerical precondition.
    pub fn is_usage(&self) -> bool {
        match self {
            Error::Expr(e) => matches!(
                e,
                ExprError::Syntax { .. }
                    | ExprError::UnknownFunction { .. }
                    | ExprError::NonLiteral { .. }
                    | ExprError::UnboundParameter(_)
            ),
            Error::UnknownFamily(_)
            | Error::InvalidParameter(_)
            | Error::InvalidRotation(_)
            | Error::InvalidSettings(_) => true,
            Error::Method { source, .. } => source.is_usage(),
            _ => false,
        }
    }

    pub(crate) fn attributed(self, method: &'static str) -> Error {
        Error::Method {
            method,
            source: Box::new(self),
        }
    }
}
