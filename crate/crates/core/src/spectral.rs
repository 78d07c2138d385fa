//! Pointwise spectral and geometric quantities of `H(r) = s + e·σ`.
//!
//! The gauge is the one of the eigenbasis
//! `ψ± = (e_x - i e_y, ±e - e_z) / sqrt(2e(e ∓ e_z))`, singular on the Dirac
//! strings `D±` where `e_x = e_y = 0` and `±e_z ≥ 0`. The connection of the
//! upper band is
//! `A = (e_y ∇e_x - e_x ∇e_y)(1 + e_z/e) / (2(e_x² + e_y²))`
//! and its curl, the curvature, is smooth everywhere except at degeneracies.

use nalgebra::{Matrix2, Vector2};
use num_complex::Complex64;
use twofloat::TwoFloat;

use crate::error::{Error, Result};
use crate::expr::EvalPoint;
use crate::model::{EFieldModel, Mat3, Vec3};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralSettings {
    /// A point is on a string when `e ∓ e_z` (or `e_x² + e_y²`) falls below
    /// this fraction of `e` (of `e²`, squared).
    pub string_band: f64,
    /// A point is degenerate when `‖e‖` is at or below this.
    pub degeneracy_eps: f64,
    /// Curl stencil step relative to `‖r‖`.
    pub curl_step: f64,
}

impl Default for SpectralSettings {
    fn default() -> Self {
        SpectralSettings {
            string_band: 1e-10,
            degeneracy_eps: 1e-12,
            curl_step: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Band {
    Plus,
    Minus,
}

impl Band {
    pub fn sign(self) -> f64 {
        match self {
            Band::Plus => 1.0,
            Band::Minus => -1.0,
        }
    }
}

/// Hermitian 2×2 matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Hamiltonian2(pub Matrix2<Complex64>);

impl Hamiltonian2 {
    pub fn from_field(s: f64, e: &Vec3) -> Self {
        let c = Complex64::new;
        Hamiltonian2(Matrix2::new(
            c(s + e.z, 0.0),
            c(e.x, -e.y),
            c(e.x, e.y),
            c(s - e.z, 0.0),
        ))
    }

    pub fn trace(&self) -> f64 {
        (self.0[(0, 0)] + self.0[(1, 1)]).re
    }

    pub fn determinant(&self) -> f64 {
        let m = &self.0;
        (m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]).re
    }

    pub fn hermiticity_error(&self) -> f64 {
        (self.0 - self.0.adjoint())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    pub fn apply(&self, v: &Vector2<Complex64>) -> Vector2<Complex64> {
        self.0 * v
    }
}

fn arr(r: &Vec3) -> [f64; 3] {
    [r.x, r.y, r.z]
}

pub fn hamiltonian_at(model: &EFieldModel, r: &Vec3) -> Result<Hamiltonian2> {
    Ok(Hamiltonian2::from_field(
        model.eval_s(r)?,
        &model.eval_e(r)?,
    ))
}

/// `(E-, E+) = (s - ‖e‖, s + ‖e‖)`.
pub fn energies(model: &EFieldModel, r: &Vec3) -> Result<(f64, f64)> {
    let s = model.eval_s(r)?;
    let e = model.eval_norm(r)?;
    Ok((s - e, s + e))
}

/// Normalized eigenvector of the requested band in the fixed gauge.
pub fn eigenvector(
    model: &EFieldModel,
    r: &Vec3,
    band: Band,
    settings: &SpectralSettings,
) -> Result<Vector2<Complex64>> {
    eigenvector_of_field(&model.eval_e(r)?, band, settings).map_err(|e| e.at(r))
}

fn eigenvector_of_field(
    e: &Vec3,
    band: Band,
    settings: &SpectralSettings,
) -> std::result::Result<Vector2<Complex64>, FieldPointError> {
    let norm = e.norm();
    if norm <= settings.degeneracy_eps {
        return Err(FieldPointError::Degenerate(norm));
    }
    let sign = band.sign();
    let gap = norm - sign * e.z;
    if gap <= settings.string_band * norm {
        return Err(FieldPointError::OnString);
    }
    let scale = 1.0 / (2.0 * norm * gap).sqrt();
    Ok(Vector2::new(
        Complex64::new(e.x * scale, -e.y * scale),
        Complex64::new((sign * norm - e.z) * scale, 0.0),
    ))
}

/// Connection of the upper band from `e` and its Jacobian.
pub fn connection_from_field(
    e: &Vec3,
    jac: &Mat3,
    settings: &SpectralSettings,
) -> std::result::Result<Vec3, FieldPointError> {
    let norm = e.norm();
    if norm <= settings.degeneracy_eps {
        return Err(FieldPointError::Degenerate(norm));
    }
    let rho2 = e.x * e.x + e.y * e.y;
    let band = settings.string_band * norm;
    if rho2 <= band * band {
        return Err(FieldPointError::OnString);
    }
    let gx: Vec3 = jac.row(0).transpose();
    let gy: Vec3 = jac.row(1).transpose();
    Ok((gx * e.y - gy * e.x) * ((1.0 + e.z / norm) / (2.0 * rho2)))
}

/// Curvature of the upper band from `e` and its Jacobian.
pub fn curvature_from_field(
    e: &Vec3,
    jac: &Mat3,
    settings: &SpectralSettings,
) -> std::result::Result<Vec3, FieldPointError> {
    let norm = e.norm();
    if norm <= settings.degeneracy_eps {
        return Err(FieldPointError::Degenerate(norm));
    }
    // Σ_i e_i (∇e_j × ∇e_k) over cyclic (i, j, k) equals the vector of
    // triple products e·(∂_y e × ∂_z e), ... built from the Jacobian's
    // columns. The column form keeps its accuracy under gauge rotations,
    // which mix large and small rows but never columns.
    let dx: Vec3 = jac.column(0).into();
    let dy: Vec3 = jac.column(1).into();
    let dz: Vec3 = jac.column(2).into();
    let bracket = Vec3::new(
        e.dot(&dy.cross(&dz)),
        e.dot(&dz.cross(&dx)),
        e.dot(&dx.cross(&dy)),
    );
    Ok(bracket / (2.0 * norm * norm * norm))
}

/// Failure of a field-level formula, before a point is attached.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FieldPointError {
    OnString,
    Degenerate(f64),
}

impl FieldPointError {
    pub fn at(self, r: &Vec3) -> Error {
        match self {
            FieldPointError::OnString => Error::OnString { point: arr(r) },
            FieldPointError::Degenerate(norm) => Error::AtDegeneracy {
                point: arr(r),
                norm,
            },
        }
    }
}

/// Band `-` is obtained from band `+` of the field `-e`.
fn signed_field(model: &EFieldModel, r: &Vec3, band: Band) -> Result<(Vec3, Mat3)> {
    let (e, jac) = model.eval_with_jacobian(r)?;
    Ok(match band {
        Band::Plus => (e, jac),
        Band::Minus => (-e, -jac),
    })
}

pub fn berry_connection(
    model: &EFieldModel,
    r: &Vec3,
    settings: &SpectralSettings,
) -> Result<Vec3> {
    berry_connection_band(model, r, Band::Plus, settings)
}

pub fn berry_connection_band(
    model: &EFieldModel,
    r: &Vec3,
    band: Band,
    settings: &SpectralSettings,
) -> Result<Vec3> {
    let (e, jac) = signed_field(model, r, band)?;
    connection_from_field(&e, &jac, settings).map_err(|err| err.at(r))
}

pub fn berry_curvature(model: &EFieldModel, r: &Vec3, settings: &SpectralSettings) -> Result<Vec3> {
    berry_curvature_band(model, r, Band::Plus, settings)
}

pub fn berry_curvature_band(
    model: &EFieldModel,
    r: &Vec3,
    band: Band,
    settings: &SpectralSettings,
) -> Result<Vec3> {
    let (e, jac) = model.eval_with_jacobian_dd(r)?;
    let b = curvature_dd(&e, &jac, settings).map_err(|err| err.at(r))?;
    Ok(b * band.sign())
}

/// [`curvature_from_field`] evaluated in double-double. Under a gauge
/// rotation the rows of the Jacobian mix an O(1) `∇e_z` into tiny `∇e_x`,
/// `∇e_y`, and near the strings of high-order contacts the cross products
/// then lose more digits than `f64` has.
fn curvature_dd(
    e: &[TwoFloat; 3],
    jac: &[[TwoFloat; 3]; 3],
    settings: &SpectralSettings,
) -> std::result::Result<Vec3, FieldPointError> {
    let norm2 = e[0] * e[0] + e[1] * e[1] + e[2] * e[2];
    let norm = norm2.sqrt();
    let norm_f = f64::from(norm);
    if norm_f <= settings.degeneracy_eps {
        return Err(FieldPointError::Degenerate(norm_f));
    }
    let col = |j: usize| [jac[0][j], jac[1][j], jac[2][j]];
    let triple = |a: [TwoFloat; 3], b: [TwoFloat; 3]| {
        e[0] * (a[1] * b[2] - a[2] * b[1])
            + e[1] * (a[2] * b[0] - a[0] * b[2])
            + e[2] * (a[0] * b[1] - a[1] * b[0])
    };
    let scale = norm2 * norm * 2.0;
    let (dx, dy, dz) = (col(0), col(1), col(2));
    Ok(Vec3::new(
        f64::from(triple(dy, dz) / scale),
        f64::from(triple(dz, dx) / scale),
        f64::from(triple(dx, dy) / scale),
    ))
}

/// Curvature from matrix elements of `∇H` between the two eigenvectors:
/// `Im(⟨ψ+|∇H|ψ-⟩ ∧ ⟨ψ-|∇H|ψ+⟩) / (E+ - E-)²`.
pub fn berry_curvature_me(
    model: &EFieldModel,
    r: &Vec3,
    settings: &SpectralSettings,
) -> Result<Vec3> {
    let (e, jac) = model.eval_with_jacobian(r)?;
    let (_, ds) = model
        .s
        .value_and_gradient(&EvalPoint::new(arr(r), &model.params))?;
    let plus = eigenvector_of_field(&e, Band::Plus, settings).map_err(|err| err.at(r))?;
    let minus = eigenvector_of_field(&e, Band::Minus, settings).map_err(|err| err.at(r))?;
    let mut up_down = [Complex64::new(0.0, 0.0); 3];
    let mut down_up = [Complex64::new(0.0, 0.0); 3];
    for k in 0..3 {
        let de = Vec3::new(jac[(0, k)], jac[(1, k)], jac[(2, k)]);
        let dh = Hamiltonian2::from_field(ds[k], &de);
        up_down[k] = plus.dotc(&dh.apply(&minus));
        down_up[k] = minus.dotc(&dh.apply(&plus));
    }
    let wedge = [
        up_down[1] * down_up[2] - up_down[2] * down_up[1],
        up_down[2] * down_up[0] - up_down[0] * down_up[2],
        up_down[0] * down_up[1] - up_down[1] * down_up[0],
    ];
    let gap = 2.0 * e.norm();
    Ok(Vec3::new(wedge[0].im, wedge[1].im, wedge[2].im) / (gap * gap))
}

/// Curl of the curvature by fourth-order central differences (stencil
/// points at `±h` and `±2h`). `step` defaults to `settings.curl_step * ‖r‖`.
pub fn curl_b(
    model: &EFieldModel,
    r: &Vec3,
    step: Option<f64>,
    settings: &SpectralSettings,
) -> Result<Vec3> {
    let h = step.unwrap_or(settings.curl_step * r.norm());
    if !(h > 0.0) {
        return Err(Error::InvalidSettings(format!(
            "curl step must be positive, got {h}"
        )));
    }
    // Linear estimate of the distance to the nearest zero of e.
    let (e, jac) = model.eval_with_jacobian(r)?;
    let jn = jac.norm();
    if jn > 0.0 && 2.0 * h >= e.norm() / jn {
        return Err(Error::DegeneracyInStencil { point: arr(r) });
    }
    let b_at = |p: Vec3| -> Result<Vec3> {
        berry_curvature(model, &p, settings).map_err(|err| match err {
            Error::AtDegeneracy { .. } => Error::DegeneracyInStencil { point: arr(r) },
            other => other,
        })
    };
    // d[k] = ∂B/∂r_k
    let mut d = [Vec3::zeros(); 3];
    for (k, dk) in d.iter_mut().enumerate() {
        let mut off = Vec3::zeros();
        off[k] = h;
        let near = b_at(r + off)? - b_at(r - off)?;
        let far = b_at(r + 2.0 * off)? - b_at(r - 2.0 * off)?;
        *dk = (8.0 * near - far) / (12.0 * h);
    }
    Ok(Vec3::new(d[1].z - d[2].y, d[2].x - d[0].z, d[0].y - d[1].x))
}
