//! Model fixtures shared by the benchmarks.

use monopole_core::{make_builtin, EFieldModel, Params, RotationMatrix, Vec3};

pub fn builtin(name: &str, n: Option<u32>) -> EFieldModel {
    let params = n
        .map(|n| Params::from([("n".to_string(), f64::from(n))]))
        .unwrap_or_default();
    make_builtin(name, &params).expect("built-in exists")
}

/// `power_contact(n=3)` in a fixed generic gauge, so its strings are not
/// aligned with the grid.
pub fn rotated_power_contact() -> EFieldModel {
    let rot = RotationMatrix::about_axis(Vec3::new(1.0, 2.0, 3.0), 0.7);
    builtin("power_contact", Some(3)).rotate_gauge(&rot)
}

/// Deterministic points spread over the shell `0.2 ≤ ‖r‖ ≤ 1`.
pub fn sample_points(count: usize) -> Vec<Vec3> {
    let golden = (5.0f64.sqrt() - 1.0) / 2.0;
    (0..count)
        .map(|k| {
            let t = (k as f64 + 0.5) / count as f64;
            let z = 1.0 - 2.0 * t;
            let phi = std::f64::consts::TAU * golden * k as f64;
            let rho = (1.0 - z * z).sqrt();
            Vec3::new(rho * phi.cos(), rho * phi.sin(), z) * (0.2 + 0.8 * t)
        })
        .collect()
}
