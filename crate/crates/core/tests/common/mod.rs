#![allow(dead_code)]

use monopole_core::{make_builtin, EFieldModel, Params, RotationMatrix, Vec3};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Every built-in family with the orders exercised by the tests.
pub fn builtins() -> Vec<(String, EFieldModel)> {
    let mut out = vec![
        ("diabolical".to_string(), model("diabolical", None)),
        (
            "quadratic_shift".to_string(),
            model("quadratic_shift", None),
        ),
    ];
    for n in 1..=4 {
        out.push((
            format!("power_contact(n={n})"),
            model("power_contact", Some(n)),
        ));
    }
    for n in 1..=5 {
        out.push((
            format!("chebyshev_contact(n={n})"),
            model("chebyshev_contact", Some(n)),
        ));
    }
    out
}

pub fn model(name: &str, n: Option<u32>) -> EFieldModel {
    let params = n
        .map(|n| Params::from([("n".to_string(), f64::from(n))]))
        .unwrap_or_default();
    make_builtin(name, &params).unwrap()
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    let u: f64 = rng.gen_range(f64::EPSILON..1.0);
    let v: f64 = rng.gen();
    (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos()
}

pub fn random_rotation(rng: &mut ChaCha8Rng) -> RotationMatrix {
    RotationMatrix::from_quaternion(normal(rng), normal(rng), normal(rng), normal(rng))
}

/// Uniform in the shell `lo ≤ ‖r‖ ≤ hi`.
pub fn random_point_in_shell(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> Vec3 {
    let dir = Vec3::new(normal(rng), normal(rng), normal(rng)).normalize();
    dir * rng.gen_range(lo..=hi)
}
