//! Circulation of the connection along closed loops and flux of the
//! curvature through spheres, by adaptive Gauss–Legendre quadrature.
//!
//! Orientation conventions: sphere normals point outward. A circle carries an
//! explicit orientation about its axis; [`Orientation::Clockwise`] about the
//! `+z` axis is the rim of a hole cut around a string on the `+z` side of an
//! outward-oriented sphere, so a small such loop around `D+` tends to
//! `4π` times the charge carried by that string.

use std::cell::Cell;
use std::f64::consts::{PI, TAU};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::expr::{EvalPoint, Expression, Params};
use crate::model::{EFieldModel, Vec3};
use crate::spectral::{
    connection_from_field, curvature_from_field, FieldPointError, SpectralSettings,
};

/// 7-point Gauss–Legendre rule on [-1, 1].
const GL_NODES: [f64; 7] = [
    -0.949_107_912_342_758_5,
    -0.741_531_185_599_394_4,
    -0.405_845_151_377_397_2,
    0.0,
    0.405_845_151_377_397_2,
    0.741_531_185_599_394_4,
    0.949_107_912_342_758_5,
];
const GL_WEIGHTS: [f64; 7] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
    0.381_830_050_505_118_9,
    0.279_705_391_489_276_7,
    0.129_484_966_168_869_7,
];

pub const MAX_DEPTH_LIMIT: u32 = 24;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSettings {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_depth: u32,
    /// Initial panels along a loop, and initial θ panels on a sphere (twice
    /// as many in φ).
    pub initial_panels: usize,
    pub spectral: SpectralSettings,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        QuadratureSettings {
            abs_tol: 1e-6,
            rel_tol: 1e-8,
            max_depth: 12,
            initial_panels: 8,
            spectral: SpectralSettings::default(),
        }
    }
}

impl QuadratureSettings {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.abs_tol) || !positive(self.rel_tol) {
            return Err(Error::InvalidSettings(format!(
                "tolerances must be positive (abs_tol = {}, rel_tol = {})",
                self.abs_tol, self.rel_tol
            )));
        }
        if self.max_depth > MAX_DEPTH_LIMIT {
            return Err(Error::InvalidSettings(format!(
                "max_depth {} exceeds {MAX_DEPTH_LIMIT}",
                self.max_depth
            )));
        }
        if self.initial_panels == 0 {
            return Err(Error::InvalidSettings(
                "initial_panels must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    Counterclockwise,
    Clockwise,
}

impl Orientation {
    fn sign(self) -> f64 {
        match self {
            Orientation::Counterclockwise => 1.0,
            Orientation::Clockwise => -1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Orientation::Counterclockwise => "ccw",
            Orientation::Clockwise => "cw",
        }
    }
}

/// Closed curve `t ∈ [0, 1) → r(t)`.
#[derive(Debug, Clone, PartialEq)]
pub enum ParametricLoop {
    /// Circle in the plane through `center` normal to `axis`; the
    /// counterclockwise sense is right-handed about `axis`.
    Circle {
        center: Vec3,
        radius: f64,
        axis: Vec3,
        orientation: Orientation,
    },
    /// Components are expressions in the parameter `t`.
    Curve {
        x: Expression,
        y: Expression,
        z: Expression,
        params: Params,
        orientation: Orientation,
    },
}

const LOOP_VARIABLE: &str = "t";

impl ParametricLoop {
    pub fn circle(center: Vec3, radius: f64, axis: Vec3, orientation: Orientation) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) || !(axis.norm() > 0.0) {
            return Err(Error::InvalidSettings(format!(
                "circle needs a positive radius and a nonzero axis (radius {radius})"
            )));
        }
        Ok(ParametricLoop::Circle {
            center,
            radius,
            axis: axis.normalize(),
            orientation,
        })
    }

    /// `[δ cos θ, δ sin θ, z0]`, θ increasing for counterclockwise.
    pub fn horizontal_circle(delta: f64, z0: f64, orientation: Orientation) -> Result<Self> {
        Self::circle(Vec3::new(0.0, 0.0, z0), delta, Vec3::z(), orientation)
    }

    pub fn curve(
        x: Expression,
        y: Expression,
        z: Expression,
        params: Params,
        orientation: Orientation,
    ) -> Result<Self> {
        let curve = ParametricLoop::Curve {
            x,
            y,
            z,
            params,
            orientation,
        };
        let start = curve.point(0.0)?;
        let end = curve.point(1.0)?;
        if (start - end).norm() > 1e-12 * start.norm().max(1.0) {
            return Err(Error::InvalidSettings(format!(
                "curve is not closed: r(0) = {start:?}, r(1) = {end:?}"
            )));
        }
        Ok(curve)
    }

    fn orientation(&self) -> Orientation {
        match self {
            ParametricLoop::Circle { orientation, .. }
            | ParametricLoop::Curve { orientation, .. } => *orientation,
        }
    }

    pub fn point(&self, t: f64) -> Result<Vec3> {
        Ok(self.point_and_tangent(t)?.0)
    }

    /// `r(t)` and `dr/dt` with the orientation applied.
    pub fn point_and_tangent(&self, t: f64) -> Result<(Vec3, Vec3)> {
        let sign = self.orientation().sign();
        match self {
            ParametricLoop::Circle {
                center,
                radius,
                axis,
                ..
            } => {
                let (u, v) = plane_basis(axis);
                let angle = sign * TAU * t;
                let (s, c) = angle.sin_cos();
                let point = center + (u * c + v * s) * *radius;
                let tangent = (v * c - u * s) * (*radius * TAU * sign);
                Ok((point, tangent))
            }
            ParametricLoop::Curve {
                x, y, z, params, ..
            } => {
                let param = if sign > 0.0 { t } else { 1.0 - t };
                let mut bound = params.clone();
                bound.insert(LOOP_VARIABLE.to_string(), param);
                let at = EvalPoint::new([0.0; 3], &bound);
                let (px, dx) = x.derivative_wrt_param(&at, LOOP_VARIABLE)?;
                let (py, dy) = y.derivative_wrt_param(&at, LOOP_VARIABLE)?;
                let (pz, dz) = z.derivative_wrt_param(&at, LOOP_VARIABLE)?;
                Ok((Vec3::new(px, py, pz), Vec3::new(dx, dy, dz) * sign))
            }
        }
    }
}

/// Orthonormal `u, v` with `u × v = axis`; for `axis = z` this is `(x, y)`.
pub(crate) fn plane_basis(axis: &Vec3) -> (Vec3, Vec3) {
    let a = axis.normalize();
    let helper = if a.y.abs() < 0.9 {
        Vec3::y()
    } else {
        Vec3::z()
    };
    let u = helper.cross(&a).normalize();
    (u, a.cross(&u))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Circulation {
    pub value: f64,
    pub error_estimate: f64,
    /// Smallest `(e_x² + e_y²)/e²` seen on the loop: how close it came to `D`.
    pub min_string_proxy: f64,
    pub evaluations: usize,
}

/// Neumaier-compensated running sum.
#[derive(Default, Clone, Copy)]
struct Compensated {
    sum: f64,
    carry: f64,
}

impl Compensated {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn total(self) -> f64 {
        self.sum + self.carry
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Partial {
    value: f64,
    error: f64,
    unconverged: bool,
}

fn gauss_1d(f: &mut impl FnMut(f64) -> Result<f64>, a: f64, b: f64) -> Result<f64> {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut acc = 0.0;
    for (x, w) in GL_NODES.iter().zip(GL_WEIGHTS) {
        acc += w * f(mid + half * x)?;
    }
    Ok(acc * half)
}

struct Adaptive1d<'s> {
    settings: &'s QuadratureSettings,
    length: f64,
}

impl Adaptive1d<'_> {
    fn refine(
        &self,
        f: &mut impl FnMut(f64) -> Result<f64>,
        a: f64,
        b: f64,
        coarse: f64,
        depth: u32,
    ) -> Result<Partial> {
        let mid = 0.5 * (a + b);
        let left = gauss_1d(f, a, mid)?;
        let right = gauss_1d(f, mid, b)?;
        let fine = left + right;
        let error = (fine - coarse).abs();
        let tol =
            (self.settings.abs_tol * (b - a) / self.length).max(self.settings.rel_tol * fine.abs());
        if error <= tol {
            return Ok(Partial {
                value: fine,
                error,
                unconverged: false,
            });
        }
        if depth >= self.settings.max_depth {
            return Ok(Partial {
                value: fine,
                error,
                unconverged: true,
            });
        }
        let l = self.refine(f, a, mid, left, depth + 1)?;
        let r = self.refine(f, mid, b, right, depth + 1)?;
        Ok(Partial {
            value: l.value + r.value,
            error: l.error + r.error,
            unconverged: l.unconverged || r.unconverged,
        })
    }
}

fn check_total(
    total: f64,
    error: f64,
    unconverged: bool,
    settings: &QuadratureSettings,
) -> Result<()> {
    if unconverged && error > settings.abs_tol + settings.rel_tol * total.abs() {
        return Err(Error::ToleranceNotReached {
            estimate: total,
            error,
        });
    }
    Ok(())
}

/// `ΔΦ = ∮ A·dl` for the upper band.
pub fn circulation(
    model: &EFieldModel,
    path: &ParametricLoop,
    settings: &QuadratureSettings,
) -> Result<Circulation> {
    settings.validate()?;
    let min_proxy = Cell::new(f64::INFINITY);
    let evaluations = Cell::new(0usize);
    let spectral = &settings.spectral;
    let mut integrand = |t: f64| -> Result<f64> {
        evaluations.set(evaluations.get() + 1);
        let (r, dr) = path.point_and_tangent(t)?;
        let (e, jac) = model.eval_with_jacobian(&r)?;
        let e2 = e.norm_squared();
        if e2 > 0.0 {
            min_proxy.set(min_proxy.get().min((e.x * e.x + e.y * e.y) / e2));
        }
        match connection_from_field(&e, &jac, spectral) {
            Ok(a) => Ok(a.dot(&dr)),
            Err(FieldPointError::OnString) => Err(Error::LoopTouchesString {
                proxy: min_proxy
                    .get()
                    .min(0.0f64.max((e.x * e.x + e.y * e.y) / e2.max(f64::MIN_POSITIVE))),
            }),
            Err(err @ FieldPointError::Degenerate(_)) => Err(err.at(&r)),
        }
    };
    let adaptive = Adaptive1d {
        settings,
        length: 1.0,
    };
    let panels = settings.initial_panels;
    let mut sum = Compensated::default();
    let mut error = 0.0;
    let mut unconverged = false;
    for k in 0..panels {
        let a = k as f64 / panels as f64;
        let b = (k + 1) as f64 / panels as f64;
        let coarse = gauss_1d(&mut integrand, a, b)?;
        let part = adaptive.refine(&mut integrand, a, b, coarse, 0)?;
        sum.add(part.value);
        error += part.error;
        unconverged |= part.unconverged;
    }
    let value = sum.total();
    check_total(value, error, unconverged, settings)?;
    Ok(Circulation {
        value,
        error_estimate: error,
        min_string_proxy: min_proxy.get(),
        evaluations: evaluations.get(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Flux {
    pub value: f64,
    pub error_estimate: f64,
    /// Accepted tiles.
    pub tiles: usize,
    pub evaluations: usize,
    /// Smallest `‖e‖` seen on the sphere.
    pub min_norm: f64,
}

#[derive(Clone, Copy)]
struct Tile {
    theta: (f64, f64),
    phi: (f64, f64),
}

impl Tile {
    fn area(&self) -> f64 {
        (self.theta.1 - self.theta.0) * (self.phi.1 - self.phi.0)
    }

    fn split_theta(&self) -> [Tile; 2] {
        let m = 0.5 * (self.theta.0 + self.theta.1);
        [
            Tile {
                theta: (self.theta.0, m),
                phi: self.phi,
            },
            Tile {
                theta: (m, self.theta.1),
                phi: self.phi,
            },
        ]
    }

    fn split_phi(&self) -> [Tile; 2] {
        let m = 0.5 * (self.phi.0 + self.phi.1);
        [
            Tile {
                theta: self.theta,
                phi: (self.phi.0, m),
            },
            Tile {
                theta: self.theta,
                phi: (m, self.phi.1),
            },
        ]
    }
}

struct SphereFlux<'a> {
    model: &'a EFieldModel,
    center: Vec3,
    radius: f64,
    settings: &'a QuadratureSettings,
}

#[derive(Default)]
struct TileStats {
    partial: Partial,
    tiles: usize,
    evaluations: usize,
    min_norm: f64,
}

impl SphereFlux<'_> {
    const TOTAL_AREA: f64 = PI * TAU;

    /// `B·n R² sin θ` at `(θ, φ)`.
    fn integrand(&self, theta: f64, phi: f64, stats: &mut TileStats) -> Result<f64> {
        stats.evaluations += 1;
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        let normal = Vec3::new(st * cp, st * sp, ct);
        let r = self.center + normal * self.radius;
        let (e, jac) = self.model.eval_with_jacobian(&r)?;
        stats.min_norm = stats.min_norm.min(e.norm());
        match curvature_from_field(&e, &jac, &self.settings.spectral) {
            Ok(b) => Ok(b.dot(&normal) * self.radius * self.radius * st),
            Err(_) => Err(Error::DegeneracyOnSurface {
                radius: self.radius,
                point: [r.x, r.y, r.z],
            }),
        }
    }

    fn gauss(&self, tile: &Tile, stats: &mut TileStats) -> Result<f64> {
        let ht = 0.5 * (tile.theta.1 - tile.theta.0);
        let mt = 0.5 * (tile.theta.0 + tile.theta.1);
        let hp = 0.5 * (tile.phi.1 - tile.phi.0);
        let mp = 0.5 * (tile.phi.0 + tile.phi.1);
        let mut acc = 0.0;
        for (xt, wt) in GL_NODES.iter().zip(GL_WEIGHTS) {
            let mut row = 0.0;
            for (xp, wp) in GL_NODES.iter().zip(GL_WEIGHTS) {
                row += wp * self.integrand(mt + ht * xt, mp + hp * xp, stats)?;
            }
            acc += wt * row;
        }
        Ok(acc * ht * hp)
    }

    /// Refines one tile, splitting along whichever direction changes the
    /// estimate more.
    fn refine(
        &self,
        tile: Tile,
        coarse: f64,
        depth: u32,
        stats: &mut TileStats,
    ) -> Result<Partial> {
        let by_theta = tile.split_theta();
        let by_phi = tile.split_phi();
        let qt = [
            self.gauss(&by_theta[0], stats)?,
            self.gauss(&by_theta[1], stats)?,
        ];
        let qp = [
            self.gauss(&by_phi[0], stats)?,
            self.gauss(&by_phi[1], stats)?,
        ];
        let (ft, fp) = (qt[0] + qt[1], qp[0] + qp[1]);
        let (et, ep) = ((ft - coarse).abs(), (fp - coarse).abs());
        let fine = 0.5 * (ft + fp);
        let error = et.max(ep);
        let s = self.settings;
        let tol = (s.abs_tol * tile.area() / Self::TOTAL_AREA).max(s.rel_tol * fine.abs());
        if error <= tol {
            stats.tiles += 1;
            return Ok(Partial {
                value: fine,
                error,
                unconverged: false,
            });
        }
        if depth >= s.max_depth {
            stats.tiles += 1;
            return Ok(Partial {
                value: fine,
                error,
                unconverged: true,
            });
        }
        let (children, q) = if et >= ep {
            (by_theta, qt)
        } else {
            (by_phi, qp)
        };
        let a = self.refine(children[0], q[0], depth + 1, stats)?;
        let b = self.refine(children[1], q[1], depth + 1, stats)?;
        Ok(Partial {
            value: a.value + b.value,
            error: a.error + b.error,
            unconverged: a.unconverged || b.unconverged,
        })
    }

    fn top_tile(&self, tile: Tile) -> Result<TileStats> {
        let mut stats = TileStats {
            min_norm: f64::INFINITY,
            ..TileStats::default()
        };
        let coarse = self.gauss(&tile, &mut stats)?;
        stats.partial = self.refine(tile, coarse, 0, &mut stats)?;
        Ok(stats)
    }
}

/// Flux of the upper-band curvature through the sphere `|r - center| = radius`,
/// outward normal.
pub fn flux_sphere(
    model: &EFieldModel,
    center: &Vec3,
    radius: f64,
    settings: &QuadratureSettings,
) -> Result<Flux> {
    settings.validate()?;
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::InvalidSettings(format!(
            "radius must be positive, got {radius}"
        )));
    }
    let job = SphereFlux {
        model,
        center: *center,
        radius,
        settings,
    };
    let nt = settings.initial_panels;
    let np = 2 * nt;
    let tiles: Vec<Tile> = (0..nt)
        .flat_map(|i| {
            (0..np).map(move |j| Tile {
                theta: (PI * i as f64 / nt as f64, PI * (i + 1) as f64 / nt as f64),
                phi: (TAU * j as f64 / np as f64, TAU * (j + 1) as f64 / np as f64),
            })
        })
        .collect();
    // Tiles are independent; the reduction below runs in tile order so the
    // result does not depend on the thread count.
    let results: Vec<Result<TileStats>> = tiles.par_iter().map(|t| job.top_tile(*t)).collect();
    let mut sum = Compensated::default();
    let mut error = 0.0;
    let mut unconverged = false;
    let mut count = 0;
    let mut evaluations = 0;
    let mut min_norm = f64::INFINITY;
    for result in results {
        let stats = result?;
        sum.add(stats.partial.value);
        error += stats.partial.error;
        unconverged |= stats.partial.unconverged;
        count += stats.tiles;
        evaluations += stats.evaluations;
        min_norm = min_norm.min(stats.min_norm);
    }
    let value = sum.total();
    check_total(value, error, unconverged, settings)?;
    Ok(Flux {
        value,
        error_estimate: error,
        tiles: count,
        evaluations,
        min_norm,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluxCharge {
    /// `flux / 4π`.
    pub g: f64,
    /// `|2g - round(2g)|`.
    pub quantization_residual: f64,
    pub flux: Flux,
}

/// Charge enclosed by the sphere of the given radius about the origin.
pub fn charge_from_flux(
    model: &EFieldModel,
    radius: f64,
    settings: &QuadratureSettings,
) -> Result<FluxCharge> {
    let flux = flux_sphere(model, &Vec3::zeros(), radius, settings)?;
    let g = flux.value / (4.0 * PI);
    Ok(FluxCharge {
        g,
        quantization_residual: (2.0 * g - (2.0 * g).round()).abs(),
        flux,
    })
}
