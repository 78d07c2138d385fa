//! Field models `H(r) = s(r) + e(r)·σ`, the built-in families, SO(3) gauge
//! rotations of `e`, and contact classification.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::{Matrix3, Vector3};
use twofloat::TwoFloat;

use crate::error::{Error, Result};
use crate::expr::{BinaryOp, EvalPoint, Expression, Params};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Below this `x^2 + y^2` a built-in with an axis limit uses the limit
/// instead of its expressions (which contain `0/0` on the z axis).
const AXIS_RHO2: f64 = 1e-200;

/// Default |Λ| threshold separating generic from constrained contacts.
pub const DEFAULT_LAMBDA_THRESHOLD: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn unit(self) -> Vec3 {
        match self {
            Axis::X => Vec3::x(),
            Axis::Y => Vec3::y(),
            Axis::Z => Vec3::z(),
        }
    }
}

/// Proper rotation acting on the components of `e`.
#[derive(Debug, Clone, PartialEq)]
pub struct RotationMatrix(Mat3);

impl RotationMatrix {
    pub const TOLERANCE: f64 = 1e-12;

    pub fn new(m: Mat3) -> Result<Self> {
        let ortho = (m.transpose() * m - Mat3::identity()).abs().max();
        if !(ortho <= Self::TOLERANCE) {
            return Err(Error::InvalidRotation(format!("|R^T R - I| = {ortho:e}")));
        }
        let det = m.determinant();
        if !((det - 1.0).abs() <= Self::TOLERANCE) {
            return Err(Error::InvalidRotation(format!("det R = {det}")));
        }
        Ok(RotationMatrix(m))
    }

    pub fn identity() -> Self {
        RotationMatrix(Mat3::identity())
    }

    pub fn about_axis(axis: Vec3, angle: f64) -> Self {
        let axis = nalgebra::Unit::new_normalize(axis);
        RotationMatrix(*nalgebra::Rotation3::from_axis_angle(&axis, angle).matrix())
    }

    /// Exact rotation by π about a coordinate axis. About `X` this flips the
    /// sign of `e_y` and `e_z`, exchanging `D+` and `D-`.
    pub fn half_turn(axis: Axis) -> Self {
        let d = match axis {
            Axis::X => Vec3::new(1.0, -1.0, -1.0),
            Axis::Y => Vec3::new(-1.0, 1.0, -1.0),
            Axis::Z => Vec3::new(-1.0, -1.0, 1.0),
        };
        RotationMatrix(Mat3::from_diagonal(&d))
    }

    /// Rotation of the (normalized) quaternion `w + xi + yj + zk`. Normally
    /// distributed components give a uniformly distributed rotation.
    pub fn from_quaternion(w: f64, x: f64, y: f64, z: f64) -> Self {
        let q = nalgebra::UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(w, x, y, z));
        RotationMatrix(*q.to_rotation_matrix().matrix())
    }

    pub fn transpose(&self) -> Self {
        RotationMatrix(self.0.transpose())
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Builtin {
    Diabolical,
    QuadraticShift,
    PowerContact,
    ChebyshevContact,
}

impl Builtin {
    pub const ALL: [Builtin; 4] = [
        Builtin::Diabolical,
        Builtin::QuadraticShift,
        Builtin::PowerContact,
        Builtin::ChebyshevContact,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Builtin::Diabolical => "diabolical",
            Builtin::QuadraticShift => "quadratic_shift",
            Builtin::PowerContact => "power_contact",
            Builtin::ChebyshevContact => "chebyshev_contact",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Builtin::ALL
            .into_iter()
            .find(|b| b.name() == name)
            .ok_or_else(|| Error::UnknownFamily(name.to_string()))
    }

    pub fn field(self) -> &'static str {
        match self {
            Builtin::Diabolical => "e = (x, y, z)",
            Builtin::QuadraticShift => "e = (x^2 + z, y^2 + z, z)",
            Builtin::PowerContact => "e = ((x y)^n, (x^(2n) - y^(2n))/2, z)",
            Builtin::ChebyshevContact => {
                "e = (rho^n C_n(x/rho), rho^n C_n(cos(pi/2n) x/rho + sin(pi/2n) y/rho), z), rho = sqrt(x^2 + y^2)"
            }
        }
    }

    /// Names and meaning of the family parameters.
    pub fn parameter_docs(self) -> &'static [(&'static str, &'static str)] {
        match self {
            Builtin::Diabolical | Builtin::QuadraticShift => &[],
            Builtin::PowerContact => {
                &[("n", "integer >= 1; odd n gives charge -1, even n charge 0")]
            }
            Builtin::ChebyshevContact => &[("n", "integer >= 1; charge n/2")],
        }
    }

    /// Largest sphere radius on which the origin is the only degeneracy
    /// and the expected charge is known.
    pub fn safe_radius(self) -> f64 {
        match self {
            Builtin::ChebyshevContact => 0.5,
            _ => 1.0,
        }
    }

    pub fn needs_order(self) -> bool {
        matches!(self, Builtin::PowerContact | Builtin::ChebyshevContact)
    }
}

impl fmt::Display for Builtin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Exact field on the z axis for fields whose expressions are `0/0` there:
/// `e_x + i e_y = (x + i y)^n`, `e_z = z`, then rotated by `frame`.
#[derive(Debug, Clone, PartialEq)]
struct AxisLimit {
    order: u32,
    frame: Mat3,
}

impl AxisLimit {
    fn eval(&self, r: &Vec3) -> (Vec3, Mat3) {
        let w = num_complex::Complex64::new(r.x, r.y);
        let n = self.order as i32;
        let wn = w.powi(n);
        let dw = if n == 0 {
            num_complex::Complex64::new(0.0, 0.0)
        } else {
            w.powi(n - 1) * f64::from(n)
        };
        let base = Vec3::new(wn.re, wn.im, r.z);
        // d/dx w^n = n w^(n-1), d/dy w^n = i n w^(n-1)
        let jac = Mat3::new(dw.re, -dw.im, 0.0, dw.im, dw.re, 0.0, 0.0, 0.0, 1.0);
        (self.frame * base, self.frame * jac)
    }
}

/// Complete definition of `H(r)`: three components of `e`, the scalar shift
/// `s`, and parameter bindings.
#[derive(Debug, Clone, PartialEq)]
pub struct EFieldModel {
    pub label: String,
    pub ex: Expression,
    pub ey: Expression,
    pub ez: Expression,
    pub s: Expression,
    pub params: Params,
    axis_limit: Option<AxisLimit>,
}

impl EFieldModel {
    pub fn new(
        label: impl Into<String>,
        ex: Expression,
        ey: Expression,
        ez: Expression,
        s: Option<Expression>,
        params: Params,
    ) -> Result<Self> {
        let model = EFieldModel {
            label: label.into(),
            ex,
            ey,
            ez,
            s: s.unwrap_or(Expression::Const(0.0)),
            params,
            axis_limit: None,
        };
        model.check_bindings()?;
        Ok(model)
    }

    /// Model from expression source text.
    pub fn parse(
        label: impl Into<String>,
        ex: &str,
        ey: &str,
        ez: &str,
        s: Option<&str>,
        params: Params,
    ) -> Result<Self> {
        let s = s.map(Expression::parse).transpose()?;
        Self::new(
            label,
            Expression::parse(ex)?,
            Expression::parse(ey)?,
            Expression::parse(ez)?,
            s,
            params,
        )
    }

    pub fn builtin(family: Builtin, params: &Params) -> Result<Self> {
        let order = if family.needs_order() {
            Some(order_param(family, params)?)
        } else {
            None
        };
        let mut stored = params.clone();
        if let Some(n) = order {
            stored.insert("n".into(), f64::from(n));
        }
        let (label, ex, ey) = match (family, order) {
            (Builtin::Diabolical, _) => {
                ("diabolical".to_string(), "x".to_string(), "y".to_string())
            }
            (Builtin::QuadraticShift, _) => (
                "quadratic_shift".to_string(),
                "x^2 + z".to_string(),
                "y^2 + z".to_string(),
            ),
            (Builtin::PowerContact, Some(n)) => (
                format!("power_contact(n={n})"),
                format!("(x*y)^{n}"),
                format!("(x^{k} - y^{k})/2", k = 2 * n),
            ),
            (Builtin::ChebyshevContact, Some(n)) => {
                let phase = PI / (2.0 * f64::from(n));
                let rho = "sqrt(x^2 + y^2)";
                (
                    format!("chebyshev_contact(n={n})"),
                    format!("{rho}^{n}*cheb({n}, x/{rho})"),
                    format!(
                        "{rho}^{n}*cheb({n}, {c:?}*x/{rho} + {s:?}*y/{rho})",
                        c = phase.cos(),
                        s = phase.sin()
                    ),
                )
            }
            _ => unreachable!("order checked above"),
        };
        let mut model = EFieldModel::parse(label, &ex, &ey, "z", None, stored)?;
        if family == Builtin::ChebyshevContact {
            model.axis_limit = order.map(|n| AxisLimit {
                order: n,
                frame: Mat3::identity(),
            });
        }
        Ok(model)
    }

    fn check_bindings(&self) -> Result<()> {
        for e in [&self.ex, &self.ey, &self.ez, &self.s] {
            if let Some(missing) = e
                .parameters()
                .into_iter()
                .find(|p| !self.params.contains_key(p))
            {
                return Err(crate::expr::ExprError::UnboundParameter(missing).into());
            }
        }
        Ok(())
    }

    /// Same model with a different scalar shift `s(r)`.
    pub fn with_shift(mut self, s: Expression) -> Result<Self> {
        self.s = s;
        self.check_bindings()?;
        Ok(self)
    }

    fn on_axis(&self, r: &Vec3) -> Option<&AxisLimit> {
        self.axis_limit
            .as_ref()
            .filter(|_| r.x * r.x + r.y * r.y < AXIS_RHO2)
    }

    fn point<'a>(&'a self, r: &Vec3) -> EvalPoint<'a> {
        EvalPoint::new([r.x, r.y, r.z], &self.params)
    }

    pub fn eval_e(&self, r: &Vec3) -> Result<Vec3> {
        if let Some(limit) = self.on_axis(r) {
            return Ok(limit.eval(r).0);
        }
        let at = self.point(r);
        Ok(Vec3::new(
            self.ex.evaluate(&at)?,
            self.ey.evaluate(&at)?,
            self.ez.evaluate(&at)?,
        ))
    }

    /// `‖e(r)‖`, the half-gap between the two levels.
    pub fn eval_norm(&self, r: &Vec3) -> Result<f64> {
        Ok(self.eval_e(r)?.norm())
    }

    pub fn eval_s(&self, r: &Vec3) -> Result<f64> {
        Ok(self.s.evaluate(&self.point(r))?)
    }

    /// Row `i` is the gradient of `e_i`.
    pub fn eval_jacobian(&self, r: &Vec3) -> Result<Mat3> {
        Ok(self.eval_with_jacobian(r)?.1)
    }

    pub fn eval_with_jacobian(&self, r: &Vec3) -> Result<(Vec3, Mat3)> {
        if let Some(limit) = self.on_axis(r) {
            return Ok(limit.eval(r));
        }
        let at = self.point(r);
        let (vx, gx) = self.ex.value_and_gradient(&at)?;
        let (vy, gy) = self.ey.value_and_gradient(&at)?;
        let (vz, gz) = self.ez.value_and_gradient(&at)?;
        let jac = Mat3::new(
            gx[0], gx[1], gx[2], gy[0], gy[1], gy[2], gz[0], gz[1], gz[2],
        );
        Ok((Vec3::new(vx, vy, vz), jac))
    }

    /// [`EFieldModel::eval_with_jacobian`] in double-double arithmetic, for
    /// quantities that cancel badly in `f64` (the curvature of rotated
    /// high-order contacts near their strings).
    pub(crate) fn eval_with_jacobian_dd(
        &self,
        r: &Vec3,
    ) -> Result<([TwoFloat; 3], [[TwoFloat; 3]; 3])> {
        if let Some(limit) = self.on_axis(r) {
            let (e, jac) = limit.eval(r);
            return Ok((
                [0, 1, 2].map(|i| TwoFloat::from(e[i])),
                [0, 1, 2].map(|i| [0, 1, 2].map(|j| TwoFloat::from(jac[(i, j)]))),
            ));
        }
        let at = self.point(r);
        let (vx, gx) = self.ex.value_and_gradient_dd(&at)?;
        let (vy, gy) = self.ey.value_and_gradient_dd(&at)?;
        let (vz, gz) = self.ez.value_and_gradient_dd(&at)?;
        Ok(([vx, vy, vz], [gx, gy, gz]))
    }

    /// `e' = R e`, built as linear combinations of the original component
    /// expressions. `s` is unchanged.
    pub fn rotate_gauge(&self, rot: &RotationMatrix) -> EFieldModel {
        let m = rot.matrix();
        let comps = [&self.ex, &self.ey, &self.ez];
        let row = |i: usize| -> Expression {
            let mut acc: Option<Expression> = None;
            for (j, comp) in comps.iter().enumerate() {
                let c = m[(i, j)];
                if c == 0.0 {
                    continue;
                }
                let term = if c == 1.0 {
                    (*comp).clone()
                } else if c == -1.0 {
                    Expression::neg((*comp).clone())
                } else {
                    Expression::binary(BinaryOp::Mul, Expression::Const(c), (*comp).clone())
                };
                acc = Some(match acc {
                    None => term,
                    Some(prev) => Expression::binary(BinaryOp::Add, prev, term),
                });
            }
            acc.unwrap_or(Expression::Const(0.0))
        };
        EFieldModel {
            label: format!("{} [rotated]", self.label),
            ex: row(0),
            ey: row(1),
            ez: row(2),
            s: self.s.clone(),
            params: self.params.clone(),
            axis_limit: self.axis_limit.as_ref().map(|l| AxisLimit {
                order: l.order,
                frame: m * l.frame,
            }),
        }
    }

    /// `Λ = det[∇e_x, ∇e_y, ∇e_z]` at the origin.
    pub fn contact_determinant(&self) -> Result<f64> {
        Ok(self.eval_jacobian(&Vec3::zeros())?.determinant())
    }

    pub fn classify_contact(&self, threshold: f64) -> Result<Contact> {
        let lambda = self.contact_determinant()?;
        let class = if lambda.abs() > threshold {
            ContactClass::Generic
        } else {
            ContactClass::Constrained
        };
        Ok(Contact { lambda, class })
    }
}

fn order_param(family: Builtin, params: &Params) -> Result<u32> {
    let n = *params.get("n").ok_or_else(|| {
        Error::InvalidParameter(format!("{family} requires integer parameter n >= 1"))
    })?;
    if n.fract() != 0.0 || !(1.0..=1.0e6).contains(&n) {
        return Err(Error::InvalidParameter(format!(
            "{family}: n must be an integer >= 1, got {n}"
        )));
    }
    Ok(n as u32)
}

/// `make_builtin` by family name.
pub fn make_builtin(name: &str, params: &Params) -> Result<EFieldModel> {
    EFieldModel::builtin(Builtin::from_name(name)?, params)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContactClass {
    /// `Λ ≠ 0`: conical (diabolical) contact.
    Generic,
    /// `Λ = 0`: some constraint cancels derivatives of `e` at the contact.
    Constrained,
}

impl ContactClass {
    pub fn as_str(self) -> &'static str {
        match self {
            ContactClass::Generic => "generic",
            ContactClass::Constrained => "constrained",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contact {
    pub lambda: f64,
    pub class: ContactClass,
}

/// How a model is described in configuration files.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    Builtin {
        name: String,
        params: Params,
    },
    Custom {
        ex: String,
        ey: String,
        ez: String,
        s: Option<String>,
        params: Params,
    },
}

impl ModelSpec {
    pub fn build(&self) -> Result<EFieldModel> {
        match self {
            ModelSpec::Builtin { name, params } => make_builtin(name, params),
            ModelSpec::Custom {
                ex,
                ey,
                ez,
                s,
                params,
            } => EFieldModel::parse("custom", ex, ey, ez, s.as_deref(), params.clone()),
        }
    }
}
