use std::fs;
use std::path::{Path, PathBuf};

use monopole_cli::{load_config, run_with, CliError};
use serde_json::Value;

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn monopole(args: &[&str]) -> Run {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("monopole").chain(args.iter().copied());
    let code = run_with(argv, &mut out, &mut err);
    Run {
        code,
        stdout: String::from_utf8(out).unwrap(),
        stderr: String::from_utf8(err).unwrap(),
    }
}

fn json(text: &str) -> Value {
    serde_json::from_str(text).unwrap_or_else(|e| panic!("{e}: {text}"))
}

fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

const BUILTINS: [(&str, Option<u32>); 11] = [
    ("diabolical", None),
    ("quadratic_shift", None),
    ("power_contact", Some(1)),
    ("power_contact", Some(2)),
    ("power_contact", Some(3)),
    ("power_contact", Some(4)),
    ("chebyshev_contact", Some(1)),
    ("chebyshev_contact", Some(2)),
    ("chebyshev_contact", Some(3)),
    ("chebyshev_contact", Some(4)),
    ("chebyshev_contact", Some(5)),
];

/// Set `UPDATE_GOLDEN=1` to rewrite the files after an intended change.
#[test]
fn charge_reports_match_golden_files() {
    let update = std::env::var_os("UPDATE_GOLDEN").is_some();
    for (name, n) in BUILTINS {
        let param = n.map(|n| format!("n={n}"));
        let mut args = vec!["charge", "--builtin", name];
        if let Some(p) = &param {
            args.extend(["--param", p]);
        }
        let run = monopole(&args);
        assert_eq!(run.code, 0, "{name} {n:?}: {}", run.stderr);
        let file = golden_dir().join(match n {
            Some(n) => format!("charge_{name}_{n}.json"),
            None => format!("charge_{name}.json"),
        });
        if update {
            fs::write(&file, &run.stdout).unwrap();
        }
        let expected =
            fs::read_to_string(&file).unwrap_or_else(|e| panic!("{}: {e}", file.display()));
        assert_eq!(run.stdout, expected, "{}", file.display());
    }
}

#[test]
fn charge_report_schema() {
    let report = json(&monopole(&["charge", "--builtin", "diabolical"]).stdout);
    let keys: Vec<&str> = report
        .as_object()
        .unwrap()
        .keys()
        .map(String::as_str)
        .collect();
    for key in [
        "g_flux",
        "g_winding",
        "g_winding_float",
        "piercings",
        "quantization_residual",
        "method_agreement",
        "settings",
        "model_echo",
        "version",
    ] {
        assert!(keys.contains(&key), "missing {key}");
    }
    assert_eq!(report["g_winding"], "1/2");
    let p = &report["piercings"][0];
    for key in [
        "theta",
        "phi",
        "hemisphere",
        "winding",
        "delta",
        "min_abs_z",
    ] {
        assert!(!p[key].is_null(), "piercing lacks {key}");
    }
    assert_eq!(p["hemisphere"], "+");
    assert_eq!(p["winding"], 1);
}

#[test]
fn charge_for_chebyshev_four() {
    let run = monopole(&[
        "charge",
        "--builtin",
        "chebyshev_contact",
        "--param",
        "n=4",
        "--radius",
        "0.4",
    ]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    let report = json(&run.stdout);
    assert_eq!(report["g_winding"], "2");
    assert!((report["g_flux"].as_f64().unwrap() - 2.0).abs() < 1e-3);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let args = ["charge", "--builtin", "power_contact", "--param", "n=3"];
    assert_eq!(monopole(&args).stdout, monopole(&args).stdout);
}

#[test]
fn classify_diabolical_and_constrained() {
    let r = json(&monopole(&["classify", "--builtin", "diabolical"]).stdout);
    assert_eq!(r["lambda"].as_f64(), Some(1.0));
    assert_eq!(r["class"], "generic");
    let r = json(&monopole(&["classify", "--builtin", "quadratic_shift"]).stdout);
    assert_eq!(r["lambda"].as_f64(), Some(0.0));
    assert_eq!(r["class"], "constrained");
    let r = json(
        &monopole(&[
            "classify",
            "--ex",
            "x",
            "--ey",
            "y",
            "--ez",
            "1e-9*z",
            "--lambda-threshold",
            "1e-10",
        ])
        .stdout,
    );
    assert_eq!(r["class"], "generic");
}

#[test]
fn usage_errors_exit_one_with_json() {
    for args in [
        vec!["charge", "--config", "missing.json"],
        vec!["frobnicate"],
        vec![],
        vec!["charge"],
        vec!["charge", "--builtin", "power_contact"],
        vec!["charge", "--builtin", "diabolical", "--param", "n"],
        vec!["charge", "--builtin", "diabolical", "--radius", "-1"],
        vec!["charge", "--ex", "x +", "--ey", "y", "--ez", "z"],
    ] {
        let run = monopole(&args);
        assert_eq!(run.code, 1, "{args:?}");
        assert!(run.stdout.is_empty());
        let err = json(&run.stderr);
        assert_eq!(err["error"]["exit_code"], 1);
        assert!(err["error"]["message"].is_string());
    }
    let err = json(&monopole(&["charge", "--builtin", "diabolical", "--radius", "-1"]).stderr);
    assert_eq!(err["error"]["pointer"], "/radius");
}

#[test]
fn numerical_failures_exit_two() {
    // the sphere passes through the second zero of e_x at x = 1
    let run = monopole(&[
        "flux",
        "--ex",
        "x*(x - 1)",
        "--ey",
        "y",
        "--ez",
        "z",
        "--radius",
        "1",
    ]);
    assert_eq!(run.code, 2, "{}", run.stderr);
    assert_eq!(json(&run.stderr)["error"]["kind"], "numerical");
    // e = (0, 0, 1) puts every point on the string
    let run = monopole(&["circulate", "--ex", "0", "--ey", "0", "--ez", "1"]);
    assert_eq!(run.code, 2, "{}", run.stderr);
}

#[test]
fn unwritable_destination_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("no/such/dir/report.json");
    let run = monopole(&[
        "classify",
        "--builtin",
        "diabolical",
        "--output",
        target.to_str().unwrap(),
    ]);
    assert_eq!(run.code, 2);
    assert_eq!(json(&run.stderr)["error"]["kind"], "io");
}

#[test]
fn output_file_and_stdout_agree() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("report.json");
    let args = [
        "windings",
        "--builtin",
        "chebyshev_contact",
        "--param",
        "n=3",
    ];
    let direct = monopole(&args).stdout;
    let mut with_file = args.to_vec();
    with_file.extend(["--output", target.to_str().unwrap()]);
    let run = monopole(&with_file);
    assert_eq!(run.code, 0);
    assert!(run.stdout.is_empty());
    assert_eq!(fs::read_to_string(&target).unwrap(), direct);
    assert_eq!(json(&direct)["g_winding"], "3/2");
}

#[test]
fn config_file_with_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.json");
    fs::write(
        &path,
        r#"{"model": {"builtin": "power_contact", "params": {"n": 2}}, "radius": 0.3}"#,
    )
    .unwrap();
    let config = load_config(&path).unwrap();
    assert_eq!(config.radius, 0.3);

    let p = path.to_str().unwrap();
    let r = json(&monopole(&["flux", "--config", p]).stdout);
    assert_eq!(r["radius"].as_f64(), Some(0.3));
    assert!(r["g_flux"].as_f64().unwrap().abs() < 1e-3);
    let r = json(&monopole(&["flux", "--config", p, "--param", "n=3", "--radius", "0.4"]).stdout);
    assert_eq!(r["radius"].as_f64(), Some(0.4));
    assert!((r["g_flux"].as_f64().unwrap() + 1.0).abs() < 1e-3);
    assert_eq!(r["model_echo"]["params"]["n"].as_f64(), Some(3.0));
}

#[test]
fn config_errors_carry_pointers() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        (r#"{"model": {"ex": "x", "ey": "y"}}"#, "/model/ez"),
        (
            r#"{"radius": -1, "model": {"builtin": "diabolical"}}"#,
            "/radius",
        ),
    ];
    for (text, pointer) in cases {
        let path = dir.path().join("bad.json");
        fs::write(&path, text).unwrap();
        match load_config(&path) {
            Err(CliError::Config { pointer: p, .. }) => assert_eq!(p, pointer),
            other => panic!("{text}: {other:?}"),
        }
        let run = monopole(&["charge", "--config", path.to_str().unwrap()]);
        assert_eq!(run.code, 1);
        assert_eq!(json(&run.stderr)["error"]["pointer"], pointer);
    }
    let path = dir.path().join("broken.json");
    fs::write(&path, "{").unwrap();
    assert!(matches!(
        load_config(&path),
        Err(CliError::ConfigSyntax { .. })
    ));
}

#[test]
fn field_dump_marks_string_points() {
    let run = monopole(&[
        "field",
        "--builtin",
        "diabolical",
        "--min",
        "-1",
        "--max",
        "1",
        "--steps",
        "3,3,2",
    ]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    let lines: Vec<&str> = run.stdout.lines().collect();
    assert_eq!(lines[0], monopole_cli::FIELD_HEADER);
    assert_eq!(lines.len(), 1 + 18);
    for line in &lines[1..] {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells.len(), 12);
        let x: f64 = cells[0].parse().unwrap();
        let y: f64 = cells[1].parse().unwrap();
        let on_axis = x == 0.0 && y == 0.0;
        assert_eq!(cells[11], if on_axis { "1" } else { "0" }, "{line}");
        assert_eq!(cells[3] == "nan", on_axis);
        // energies are reported everywhere
        assert_ne!(cells[9], "nan");
    }
}

#[test]
fn circulation_of_shrinking_loop() {
    let r = json(
        &monopole(&[
            "circulate",
            "--builtin",
            "power_contact",
            "--param",
            "n=1",
            "--delta",
            "0.025",
        ])
        .stdout,
    );
    let phi = r["delta_phi"].as_f64().unwrap();
    assert!((phi + 4.0 * std::f64::consts::PI).abs() < 1e-2, "{phi}");
    assert_eq!(r["loop"]["orientation"], "cw");
    let ccw = json(
        &monopole(&[
            "circulate",
            "--builtin",
            "power_contact",
            "--param",
            "n=1",
            "--delta",
            "0.025",
            "--orientation",
            "ccw",
        ])
        .stdout,
    );
    assert_eq!(ccw["delta_phi"].as_f64().unwrap(), -phi);
}

#[test]
fn list_models_documents_parameters() {
    let r = json(&monopole(&["list-models"]).stdout);
    let models = r["models"].as_array().unwrap();
    assert_eq!(models.len(), 4);
    let power = models
        .iter()
        .find(|m| m["name"] == "power_contact")
        .unwrap();
    assert_eq!(power["params"][0]["name"], "n");
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(monopole(&["--help"]).code, 0);
    let v = monopole(&["--version"]);
    assert_eq!(v.code, 0);
    assert!(v.stdout.contains(monopole_cli::VERSION));
}
