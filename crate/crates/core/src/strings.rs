//! Dirac-string piercings of a sphere and the winding-number route to the
//! charge, `g = ½ Σ w_l` over the strings of `D+`.
//!
//! Each piercing is encircled by a small circle lying on the sphere,
//! counterclockwise seen from outside, and `w_l` is the winding of
//! `Z = e_x + i e_y` along it.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::integrate::{charge_from_flux, Orientation, ParametricLoop, QuadratureSettings};
use crate::model::{EFieldModel, Vec3};

pub const MIN_GRID_N: usize = 32;
pub const DEFAULT_GRID_N: usize = 128;
/// Roots with `|Z|` below this fraction of the surface maximum are accepted.
const ROOT_TOL: f64 = 1e-10;
/// `|e_z|` below this fraction of the surface maximum of `‖e‖` is ambiguous.
const HEMISPHERE_TOL: f64 = 1e-8;
const NEWTON_MAX_ITER: usize = 400;
const NEWTON_STEP_TOL: f64 = 1e-13;
const NEWTON_MAX_STEP: f64 = 0.2;
/// Switch to the rotated chart within 5° of a pole.
const POLE_GUARD: f64 = 5.0 * PI / 180.0;
const WINDING_START: usize = 64;
const WINDING_MAX: usize = 1 << 20;
pub const AGREEMENT_WARNING: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Hemisphere {
    /// `D+`, where `e_z > 0`.
    Plus,
    /// `D-`, where `e_z < 0`.
    Minus,
}

impl Hemisphere {
    pub fn as_str(self) -> &'static str {
        match self {
            Hemisphere::Plus => "+",
            Hemisphere::Minus => "-",
        }
    }

    /// Loops around `D-` strings run clockwise so that both hemispheres
    /// give the same charge.
    pub fn loop_orientation(self) -> Orientation {
        match self {
            Hemisphere::Plus => Orientation::Counterclockwise,
            Hemisphere::Minus => Orientation::Clockwise,
        }
    }
}

/// An exact multiple of ½, stored as its double.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct HalfInteger {
    twice: i64,
}

impl HalfInteger {
    pub const ZERO: HalfInteger = HalfInteger { twice: 0 };

    pub fn from_twice(twice: i64) -> Self {
        HalfInteger { twice }
    }

    pub fn twice(self) -> i64 {
        self.twice
    }

    pub fn to_f64(self) -> f64 {
        self.twice as f64 / 2.0
    }
}

impl fmt::Display for HalfInteger {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.twice % 2 == 0 {
            write!(f, "{}", self.twice / 2)
        } else {
            write!(f, "{}/2", self.twice)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("`{0}` is not an integer or a half-integer k/2")]
pub struct ParseHalfIntegerError(String);

impl FromStr for HalfInteger {
    type Err = ParseHalfIntegerError;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let err = || ParseHalfIntegerError(s.to_string());
        match s.split_once('/') {
            Some((num, "2")) => {
                let k: i64 = num.parse().map_err(|_| err())?;
                if k % 2 == 0 {
                    return Err(err());
                }
                Ok(HalfInteger { twice: k })
            }
            Some(_) => Err(err()),
            None => {
                let k: i64 = s.parse().map_err(|_| err())?;
                k.checked_mul(2)
                    .map(HalfInteger::from_twice)
                    .ok_or_else(err)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StringPiercing {
    pub theta: f64,
    pub phi: f64,
    pub point: Vec3,
    pub hemisphere: Hemisphere,
    /// Chord radius of the encircling loop.
    pub delta: f64,
    pub winding: i64,
    pub min_abs_z: f64,
}

impl StringPiercing {
    /// The encircling circle on the sphere about the origin, oriented for
    /// this piercing's hemisphere.
    pub fn encircling_loop(&self, delta: f64) -> Result<ParametricLoop> {
        let radius = self.point.norm();
        let axis = self.point / radius;
        let beta = delta / radius;
        ParametricLoop::circle(
            axis * (radius * beta.cos()),
            radius * beta.sin(),
            axis,
            self.hemisphere.loop_orientation(),
        )
    }
}

/// All roots of `e_x = e_y = 0` found on a sphere, both hemispheres.
#[derive(Debug, Clone, PartialEq)]
pub struct PiercingScan {
    pub radius: f64,
    pub grid_n: usize,
    /// Sorted by `(θ, φ)`; `delta`, `winding` and `min_abs_z` are not yet set.
    pub roots: Vec<StringPiercing>,
    /// Newton starting points `(θ, φ)` that did not converge to a root.
    pub failed_cells: Vec<(f64, f64)>,
    pub max_abs_z: f64,
    pub max_norm: f64,
}

/// Spherical chart `p = R (a sin θ cos φ + b sin θ sin φ + c cos θ)`.
#[derive(Clone, Copy)]
struct Chart {
    a: Vec3,
    b: Vec3,
    c: Vec3,
}

const STANDARD: Chart = Chart {
    a: Vec3::new(1.0, 0.0, 0.0),
    b: Vec3::new(0.0, 1.0, 0.0),
    c: Vec3::new(0.0, 0.0, 1.0),
};
/// Poles on `±x`, regular where the standard chart is singular.
const ROTATED: Chart = Chart {
    a: Vec3::new(0.0, 1.0, 0.0),
    b: Vec3::new(0.0, 0.0, 1.0),
    c: Vec3::new(1.0, 0.0, 0.0),
};

impl Chart {
    fn for_direction(n: &Vec3) -> Chart {
        if n.z.abs() > POLE_GUARD.cos() {
            ROTATED
        } else {
            STANDARD
        }
    }

    fn unit(&self, theta: f64, phi: f64) -> Vec3 {
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        self.a * (st * cp) + self.b * (st * sp) + self.c * ct
    }

    fn tangents(&self, theta: f64, phi: f64) -> (Vec3, Vec3) {
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        (
            self.a * (ct * cp) + self.b * (ct * sp) - self.c * st,
            self.b * (st * cp) - self.a * (st * sp),
        )
    }

    fn angles(&self, n: &Vec3) -> (f64, f64) {
        let theta = n.dot(&self.c).clamp(-1.0, 1.0).acos();
        let phi = n.dot(&self.b).atan2(n.dot(&self.a));
        (theta, phi)
    }
}

fn standard_angles(n: &Vec3) -> (f64, f64) {
    let (theta, phi) = STANDARD.angles(n);
    (theta, phi.rem_euclid(TAU))
}

fn z_of(e: &Vec3) -> f64 {
    e.x.hypot(e.y)
}

/// Newton iteration for `e_x = e_y = 0` on the sphere, starting at `n0`,
/// run until the step stalls so that flat high-order zeros are reached in
/// position and not just in `|Z|`. Returns the unit direction and `|Z|`
/// there if `|Z| ≤ tol`.
fn newton_root(
    model: &EFieldModel,
    radius: f64,
    n0: Vec3,
    tol: f64,
) -> Result<Option<(Vec3, f64)>> {
    let mut n = n0;
    let mut best: Option<(Vec3, f64)> = None;
    let mut converged = false;
    for _ in 0..NEWTON_MAX_ITER {
        let (e, jac) = model.eval_with_jacobian(&(n * radius))?;
        let z = z_of(&e);
        if best.is_none_or(|(_, bz)| z <= bz) {
            best = Some((n, z));
        }
        if z == 0.0 {
            converged = true;
            break;
        }
        let chart = Chart::for_direction(&n);
        let (theta, phi) = chart.angles(&n);
        let (pt, pp) = chart.tangents(theta, phi);
        let gx: Vec3 = jac.row(0).transpose() * radius;
        let gy: Vec3 = jac.row(1).transpose() * radius;
        let (j11, j12, j21, j22) = (gx.dot(&pt), gx.dot(&pp), gy.dot(&pt), gy.dot(&pp));
        // Levenberg damping keeps the step defined where one row of the
        // Jacobian vanishes, e.g. on a coordinate plane of a flat zero.
        let (a, b, c) = (
            j11 * j11 + j21 * j21,
            j11 * j12 + j21 * j22,
            j12 * j12 + j22 * j22,
        );
        let mu = 1e-14 * (a + c);
        let (a, c) = (a + mu, c + mu);
        let det = a * c - b * b;
        if mu == 0.0 || det == 0.0 || !det.is_finite() {
            break;
        }
        let (g1, g2) = (j11 * e.x + j21 * e.y, j12 * e.x + j22 * e.y);
        let mut dt = -(c * g1 - b * g2) / det;
        let mut dp = -(a * g2 - b * g1) / det;
        let step = dt.hypot(dp);
        if step > NEWTON_MAX_STEP {
            dt *= NEWTON_MAX_STEP / step;
            dp *= NEWTON_MAX_STEP / step;
        }
        n = chart.unit(theta + dt, phi + dp).normalize();
        if step < NEWTON_STEP_TOL {
            converged = true;
            break;
        }
    }
    Ok(best.filter(|&(_, z)| converged && z <= tol))
}

/// Whether `e_x` and `e_y` both change sign over the corners, or `Z` winds
/// around them.
fn is_candidate(corners: &[Vec3; 4]) -> bool {
    let changes = |f: fn(&Vec3) -> f64| {
        let lo = corners.iter().map(f).fold(f64::INFINITY, f64::min);
        let hi = corners.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
        lo <= 0.0 && hi >= 0.0
    };
    if changes(|e| e.x) && changes(|e| e.y) {
        return true;
    }
    let mut turn = 0.0;
    for k in 0..4 {
        let (a, b) = (corners[k], corners[(k + 1) % 4]);
        turn += wrap(b.y.atan2(b.x) - a.y.atan2(a.x));
    }
    turn.abs() > PI
}

/// Phase difference folded into `(-π, π]`.
fn wrap(d: f64) -> f64 {
    let r = d.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// Finds every root of `e_x = e_y = 0` on the sphere of the given radius
/// about the origin and tags its hemisphere.
pub fn scan_piercings(model: &EFieldModel, radius: f64, grid_n: usize) -> Result<PiercingScan> {
    if grid_n < MIN_GRID_N {
        return Err(Error::InvalidSettings(format!(
            "grid_n must be at least {MIN_GRID_N}, got {grid_n}"
        )));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::InvalidSettings(format!(
            "radius must be positive, got {radius}"
        )));
    }
    let rows = grid_n;
    let cols = 2 * grid_n;
    let node = |i: usize, j: usize| {
        STANDARD.unit(PI * i as f64 / rows as f64, TAU * j as f64 / cols as f64)
    };
    let grid: Vec<Vec<Vec3>> = (0..=rows)
        .into_par_iter()
        .map(|i| {
            (0..cols)
                .map(|j| model.eval_e(&(node(i, j) * radius)))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let max_abs_z = grid.iter().flatten().map(z_of).fold(0.0, f64::max);
    let max_norm = grid.iter().flatten().map(|e| e.norm()).fold(0.0, f64::max);
    let tol = ROOT_TOL * max_abs_z;

    // Newton starts: nodes that are already near-roots (this catches the
    // poles, where cells degenerate to triangles) and centers of cells with
    // a sign change or winding.
    let cell_center = |i: usize, j: usize| {
        (
            PI * (i as f64 + 0.5) / rows as f64,
            TAU * (j as f64 + 0.5) / cols as f64,
        )
    };
    let mut starts: Vec<((f64, f64), Vec3)> = Vec::new();
    for (i, row) in grid.iter().enumerate() {
        for (j, e) in row.iter().enumerate() {
            // all nodes of a pole row are one point
            if z_of(e) <= tol && !((i == 0 || i == rows) && j > 0) {
                let angles = (PI * i as f64 / rows as f64, TAU * j as f64 / cols as f64);
                starts.push((angles, node(i, j)));
            }
        }
    }
    for i in 0..rows {
        for j in 0..cols {
            let jn = (j + 1) % cols;
            if is_candidate(&[grid[i][j], grid[i][jn], grid[i + 1][jn], grid[i + 1][j]]) {
                let (t, p) = cell_center(i, j);
                starts.push(((t, p), STANDARD.unit(t, p)));
            }
        }
    }
    let newton: Vec<Result<Option<(Vec3, f64)>>> = starts
        .par_iter()
        .map(|(_, start)| newton_root(model, radius, *start, tol))
        .collect();
    let mut found: Vec<(Vec3, f64)> = Vec::new();
    let mut failed_cells = Vec::new();
    for ((angles, _), result) in starts.iter().zip(newton) {
        match result? {
            Some(root) => found.push(root),
            None => failed_cells.push(*angles),
        }
    }

    // Keep the best root within each cluster.
    found.sort_by(|a, b| a.1.total_cmp(&b.1));
    let min_separation = TAU / grid_n as f64;
    let mut unique: Vec<(Vec3, f64)> = Vec::new();
    for (n, z) in found {
        if unique
            .iter()
            .all(|(m, _)| n.dot(m).clamp(-1.0, 1.0).acos() >= min_separation)
        {
            unique.push((n, z));
        }
    }

    let mut roots = Vec::with_capacity(unique.len());
    for (n, z) in unique {
        let point = n * radius;
        let e = model.eval_e(&point)?;
        if e.z.abs() < HEMISPHERE_TOL * max_norm {
            return Err(Error::AmbiguousHemisphere {
                point: [point.x, point.y, point.z],
                ez: e.z,
            });
        }
        let (theta, phi) = standard_angles(&n);
        roots.push(StringPiercing {
            theta,
            phi,
            point,
            hemisphere: if e.z > 0.0 {
                Hemisphere::Plus
            } else {
                Hemisphere::Minus
            },
            delta: 0.0,
            winding: 0,
            min_abs_z: z,
        });
    }
    roots.sort_by(|a, b| a.theta.total_cmp(&b.theta).then(a.phi.total_cmp(&b.phi)));
    for k in 0..roots.len() {
        let nearest = roots
            .iter()
            .enumerate()
            .filter(|&(l, _)| l != k)
            .map(|(_, r)| (r.point - roots[k].point).norm())
            .fold(f64::INFINITY, f64::min);
        roots[k].delta = (0.5 * nearest).min(0.1 * radius);
    }
    Ok(PiercingScan {
        radius,
        grid_n,
        roots,
        failed_cells,
        max_abs_z,
        max_norm,
    })
}

/// Piercings of the requested hemisphere with their encircling-loop
/// windings filled in.
pub fn locate_piercings(
    model: &EFieldModel,
    radius: f64,
    grid_n: usize,
    hemisphere: Hemisphere,
) -> Result<Vec<StringPiercing>> {
    let scan = scan_piercings(model, radius, grid_n)?;
    wind(
        model,
        scan.roots
            .into_iter()
            .filter(|p| p.hemisphere == hemisphere)
            .collect(),
    )
}

fn wind(model: &EFieldModel, piercings: Vec<StringPiercing>) -> Result<Vec<StringPiercing>> {
    piercings
        .into_par_iter()
        .map(|mut p| {
            let w = winding_details(model, &p.encircling_loop(p.delta)?)?;
            p.winding = w.winding;
            p.min_abs_z = w.min_abs_z;
            Ok(p)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Winding {
    pub winding: i64,
    pub min_abs_z: f64,
    pub max_abs_z: f64,
    pub samples: usize,
}

/// Algebraic number of turns of `Z = e_x + i e_y` around zero along the loop.
pub fn winding_number(model: &EFieldModel, path: &ParametricLoop) -> Result<i64> {
    Ok(winding_details(model, path)?.winding)
}

pub fn winding_details(model: &EFieldModel, path: &ParametricLoop) -> Result<Winding> {
    let mut samples = WINDING_START;
    loop {
        let zs = (0..samples)
            .map(|k| {
                let e = model.eval_e(&path.point(k as f64 / samples as f64)?)?;
                Ok((e.x, e.y))
            })
            .collect::<Result<Vec<_>>>()?;
        let abs: Vec<f64> = zs.iter().map(|(x, y)| x.hypot(*y)).collect();
        let min_abs_z = abs.iter().copied().fold(f64::INFINITY, f64::min);
        let max_abs_z = abs.iter().copied().fold(0.0, f64::max);
        if min_abs_z <= ROOT_TOL * max_abs_z {
            return Err(Error::LoopCrossesZero {
                min_abs_z,
                max_abs_z,
            });
        }
        let mut total = 0.0;
        let mut max_step: f64 = 0.0;
        for k in 0..samples {
            let (ax, ay) = zs[k];
            let (bx, by) = zs[(k + 1) % samples];
            let step = wrap(by.atan2(bx) - ay.atan2(ax));
            max_step = max_step.max(step.abs());
            total += step;
        }
        let turns = (total / TAU).round();
        if max_step < PI / 2.0 && (total - TAU * turns).abs() <= 1e-6 {
            return Ok(Winding {
                winding: turns as i64,
                min_abs_z,
                max_abs_z,
                samples,
            });
        }
        if samples >= WINDING_MAX {
            return Err(Error::WindingNotConverged { samples });
        }
        samples *= 2;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindingCharge {
    pub g: HalfInteger,
    pub piercings: Vec<StringPiercing>,
    pub failed_cells: Vec<(f64, f64)>,
}

/// `g = ½ Σ w_l` over the `D+` piercings.
pub fn charge_from_windings(
    model: &EFieldModel,
    radius: f64,
    grid_n: usize,
) -> Result<WindingCharge> {
    charge_from_hemisphere(model, radius, grid_n, Hemisphere::Plus)
}

/// The same sum over the strings of one hemisphere. For `D-` the loops run
/// clockwise, so a consistent gauge gives the same charge from either side.
pub fn charge_from_hemisphere(
    model: &EFieldModel,
    radius: f64,
    grid_n: usize,
    hemisphere: Hemisphere,
) -> Result<WindingCharge> {
    let scan = scan_piercings(model, radius, grid_n)?;
    let piercings = wind(
        model,
        scan.roots
            .into_iter()
            .filter(|p| p.hemisphere == hemisphere)
            .collect(),
    )?;
    let g = HalfInteger::from_twice(piercings.iter().map(|p| p.winding).sum());
    Ok(WindingCharge {
        g,
        piercings,
        failed_cells: scan.failed_cells,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportSettings {
    pub quadrature: QuadratureSettings,
    pub grid_n: usize,
}

impl Default for ReportSettings {
    fn default() -> Self {
        ReportSettings {
            quadrature: QuadratureSettings::default(),
            grid_n: DEFAULT_GRID_N,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChargeReport {
    pub radius: f64,
    pub g_flux: f64,
    pub flux: f64,
    pub flux_error: f64,
    pub g_winding: HalfInteger,
    /// The `D+` piercings used for `g_winding`.
    pub piercings: Vec<StringPiercing>,
    pub quantization_residual: f64,
    pub method_agreement: f64,
    pub warning: Option<String>,
    /// Scan cells flagged as candidates where Newton found no root.
    pub unconverged_cells: usize,
    pub settings: ReportSettings,
}

/// Charge by both routes. Errors name the method that raised them.
pub fn full_report(
    model: &EFieldModel,
    radius: f64,
    settings: &ReportSettings,
) -> Result<ChargeReport> {
    let flux =
        charge_from_flux(model, radius, &settings.quadrature).map_err(|e| e.attributed("flux"))?;
    let windings = charge_from_windings(model, radius, settings.grid_n)
        .map_err(|e| e.attributed("winding"))?;
    let method_agreement = (flux.g - windings.g.to_f64()).abs();
    let warning = (method_agreement > AGREEMENT_WARNING)
        .then(|| format!("flux and winding charges differ by {method_agreement:.3e}"));
    Ok(ChargeReport {
        radius,
        g_flux: flux.g,
        flux: flux.flux.value,
        flux_error: flux.flux.error_estimate,
        g_winding: windings.g,
        piercings: windings.piercings,
        quantization_residual: flux.quantization_residual,
        method_agreement,
        warning,
        unconverged_cells: windings.failed_cells.len(),
        settings: *settings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Params;
    use crate::model::{make_builtin, Axis, RotationMatrix};

    fn builtin(name: &str, n: Option<f64>) -> EFieldModel {
        let params = n
            .map(|n| Params::from([("n".to_string(), n)]))
            .unwrap_or_default();
        make_builtin(name, &params).unwrap()
    }

    #[test]
    fn half_integer_text() {
        for (twice, text) in [
            (1, "1/2"),
            (4, "2"),
            (-2, "-1"),
            (5, "5/2"),
            (0, "0"),
            (-3, "-3/2"),
        ] {
            let h = HalfInteger::from_twice(twice);
            assert_eq!(h.to_string(), text);
            assert_eq!(text.parse::<HalfInteger>().unwrap(), h);
        }
        for bad in ["4/2", "1/3", "x", "1.5", ""] {
            assert!(bad.parse::<HalfInteger>().is_err(), "{bad}");
        }
    }

    #[test]
    fn wrap_range() {
        assert_eq!(wrap(PI), PI);
        assert!((wrap(-PI) - PI).abs() < 1e-15);
        assert!((wrap(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-15);
    }

    #[test]
    fn charts_agree() {
        for n in [
            Vec3::new(0.3, -0.2, 0.9).normalize(),
            Vec3::new(0.0, 0.0, 1.0),
            Vec3::new(-1.0, 0.5, -0.1).normalize(),
        ] {
            for chart in [STANDARD, ROTATED] {
                let (t, p) = chart.angles(&n);
                assert!((chart.unit(t, p) - n).norm() < 1e-14);
            }
        }
        assert!((ROTATED.a.cross(&ROTATED.b) - ROTATED.c).norm() == 0.0);
    }

    #[test]
    fn diabolical_pierces_north_pole() {
        let d = builtin("diabolical", None);
        let plus = locate_piercings(&d, 1.0, 64, Hemisphere::Plus).unwrap();
        assert_eq!(plus.len(), 1);
        assert!(plus[0].theta < 1e-12);
        assert_eq!(plus[0].winding, 1);
        assert!((plus[0].delta - 0.1).abs() < 1e-15);
        let minus = locate_piercings(&d, 1.0, 64, Hemisphere::Minus).unwrap();
        assert_eq!(minus.len(), 1);
        assert!((minus[0].theta - PI).abs() < 1e-12);
        assert_eq!(minus[0].winding, 1);
    }

    #[test]
    fn quadratic_shift_strings() {
        let q = builtin("quadratic_shift", None);
        assert!(locate_piercings(&q, 0.5, 64, Hemisphere::Plus)
            .unwrap()
            .is_empty());
        let flipped = q.rotate_gauge(&RotationMatrix::half_turn(Axis::X));
        let plus = locate_piercings(&flipped, 0.5, 64, Hemisphere::Plus).unwrap();
        assert_eq!(plus.len(), 4);
        for p in &plus {
            assert!(p.point.z < 0.0);
            assert!((p.point.x.abs() - p.point.y.abs()).abs() < 1e-9);
            assert_eq!(p.winding, (p.point.x.signum() * p.point.y.signum()) as i64);
        }
        assert_eq!(
            charge_from_windings(&flipped, 0.5, 64).unwrap().g,
            HalfInteger::ZERO
        );
    }

    #[test]
    fn windings_on_horizontal_circles() {
        let path =
            ParametricLoop::horizontal_circle(0.1, 0.05, Orientation::Counterclockwise).unwrap();
        for (name, n, w) in [
            ("diabolical", None, 1),
            ("power_contact", Some(1.0), -2),
            ("power_contact", Some(2.0), 0),
            ("chebyshev_contact", Some(3.0), 3),
            ("chebyshev_contact", Some(5.0), 5),
        ] {
            assert_eq!(
                winding_number(&builtin(name, n), &path).unwrap(),
                w,
                "{name} {n:?}"
            );
        }
        let through_zero =
            ParametricLoop::horizontal_circle(0.1, 0.0, Orientation::Counterclockwise).unwrap();
        let shifted = EFieldModel::parse("m", "x - 0.1", "y", "1", None, Params::new()).unwrap();
        assert!(matches!(
            winding_number(&shifted, &through_zero),
            Err(Error::LoopCrossesZero { .. })
        ));
    }

    #[test]
    fn winding_charges() {
        for (name, n, twice) in [
            ("diabolical", None, 1),
            ("power_contact", Some(1.0), -2),
            ("power_contact", Some(4.0), 0),
            ("chebyshev_contact", Some(5.0), 5),
        ] {
            let g = charge_from_windings(&builtin(name, n), 0.5, 64).unwrap().g;
            assert_eq!(g.twice(), twice, "{name} {n:?}");
        }
    }

    #[test]
    fn hemisphere_duality_after_flip() {
        let flipped =
            builtin("quadratic_shift", None).rotate_gauge(&RotationMatrix::half_turn(Axis::X));
        let d = builtin("diabolical", None);
        for m in [&flipped, &d] {
            let plus = charge_from_hemisphere(m, 0.5, 64, Hemisphere::Plus)
                .unwrap()
                .g;
            let minus = charge_from_hemisphere(m, 0.5, 64, Hemisphere::Minus)
                .unwrap()
                .g;
            assert_eq!(plus, minus);
        }
    }

    #[test]
    fn ambiguous_hemisphere() {
        // the only root on the unit sphere is a degeneracy, where e_z = 0
        let m = EFieldModel::parse("shifted", "x", "y", "z - 1", None, Params::new()).unwrap();
        assert!(matches!(
            scan_piercings(&m, 1.0, 32),
            Err(Error::AmbiguousHemisphere { .. })
        ));
    }

    #[test]
    fn report_for_diabolical() {
        let r = full_report(
            &builtin("diabolical", None),
            0.5,
            &ReportSettings::default(),
        )
        .unwrap();
        assert_eq!(r.g_winding, HalfInteger::from_twice(1));
        assert!((r.g_flux - 0.5).abs() < 1e-6);
        assert!(r.method_agreement < 1e-6);
        assert!(r.warning.is_none());
        assert_eq!(r.piercings.len(), 1);
    }

    #[test]
    fn report_attributes_errors() {
        let m = EFieldModel::parse("m", "x - 0.5", "y", "z", None, Params::new()).unwrap();
        let err = full_report(&m, 0.5, &ReportSettings::default()).unwrap_err();
        assert!(matches!(
            err,
            Error::Method { method: "flux", .. }
                | Error::Method {
                    method: "winding",
                    ..
                }
        ));
        assert!(err.to_string().contains("method"));
    }

    #[test]
    fn grid_validation() {
        let d = builtin("diabolical", None);
        assert!(matches!(
            scan_piercings(&d, 1.0, 16),
            Err(Error::InvalidSettings(_))
        ));
    }
}
