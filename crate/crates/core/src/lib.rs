//! Geometric phases of two-level Hamiltonians `H(r) = s(r) + e(r)·σ` and the
//! monopole charge of their degeneracies.
//!
//! The charge enclosed by a sphere is computed two ways: as the flux of the
//! Berry curvature through the sphere ([`integrate`]) and as half the sum of
//! the winding numbers of `e_x + i e_y` around the Dirac strings piercing it
//! ([`strings`]). Both must agree and be half-integers.

// `!(x > 0.0)` style checks also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod expr;
pub mod integrate;
pub mod model;
pub mod spectral;
pub mod strings;

pub use error::{Error, Result};
pub use expr::{EvalPoint, ExprError, Expression, Params};
pub use integrate::{Orientation, ParametricLoop, QuadratureSettings};
pub use model::{
    make_builtin, Axis, Builtin, ContactClass, EFieldModel, Mat3, ModelSpec, RotationMatrix, Vec3,
};
pub use spectral::{Band, SpectralSettings};
pub use strings::{ChargeReport, HalfInteger, Hemisphere, ReportSettings, StringPiercing};
