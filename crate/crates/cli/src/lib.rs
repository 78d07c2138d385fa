//! The `monopole` command: loads a model from a JSON config and/or flags,
//! runs one computation and writes a JSON report (CSV for `field`).
//!
//! Exit codes: 0 on success, 1 for usage and config errors, 2 for numerical
//! failures and output errors. Failures print a JSON object with an `error`
//! key on stderr.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod args;
pub mod config;
pub mod error;
pub mod output;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::Parser;
use monopole_core::integrate::{charge_from_flux, circulation};
use monopole_core::spectral::{berry_connection, berry_curvature, energies};
use monopole_core::strings::{charge_from_windings, full_report};
use monopole_core::{
    Builtin, EFieldModel, Error as CoreError, Expression, ModelSpec, ParametricLoop,
    ReportSettings, StringPiercing, Vec3,
};
use serde_json::{Map, Value};

use crate::args::{Cli, Command, CommonArgs, GridArgs, LoopArgs};
pub use crate::config::load_config;
use crate::config::{parse_triple, LoopShape, RunConfig};
pub use crate::error::CliError;
use crate::output::{float, floats, object, render, sci};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

type Result<T> = std::result::Result<T, CliError>;

/// Runs the command line `args` (program name first) against the process
/// stdout and stderr and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with(args, &mut io::stdout().lock(), &mut io::stderr().lock())
}

pub fn run_with<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = write!(stdout, "{}", e.render());
            return 0;
        }
        Err(e) => {
            return report_error(
                &CliError::Usage(e.render().to_string().trim_end().to_string()),
                stderr,
            )
        }
    };
    match execute(cli.command).and_then(|out| out.deliver(stdout)) {
        Ok(()) => 0,
        Err(e) => report_error(&e, stderr),
    }
}

fn report_error(e: &CliError, stderr: &mut dyn Write) -> i32 {
    let code = e.exit_code();
    let body = object([(
        "error",
        object([
            ("kind", Value::from(e.kind())),
            ("message", Value::from(e.to_string())),
            ("pointer", e.pointer().map_or(Value::Null, Value::from)),
            ("exit_code", Value::from(code)),
        ]),
    )]);
    let _ = stderr.write_all(render(&body).as_bytes());
    code
}

/// Rendered result and where it goes.
struct Output {
    text: String,
    destination: Option<PathBuf>,
}

impl Output {
    fn deliver(self, stdout: &mut dyn Write) -> Result<()> {
        match self.destination {
            Some(path) => {
                fs::write(&path, self.text).map_err(|source| CliError::Output { path, source })
            }
            None => stdout
                .write_all(self.text.as_bytes())
                .and_then(|()| stdout.flush())
                .map_err(|source| CliError::Output {
                    path: "<stdout>".into(),
                    source,
                }),
        }
    }
}

fn execute(command: Command) -> Result<Output> {
    match command {
        Command::ListModels { output } => Ok(Output {
            text: render(&list_models()),
            destination: output,
        }),
        Command::Charge(common) => json_command(&resolve(&common, |_| Ok(()))?, charge),
        Command::Flux(common) => json_command(&resolve(&common, |_| Ok(()))?, flux),
        Command::Windings(common) => json_command(&resolve(&common, |_| Ok(()))?, windings),
        Command::Circulate { common, path } => {
            json_command(&resolve(&common, |v| apply_loop(v, &path))?, circulate)
        }
        Command::Classify {
            common,
            lambda_threshold,
        } => {
            let config = resolve(&common, |v| {
                if let Some(t) = lambda_threshold {
                    set(v, "lambda_threshold", Value::from(t));
                }
                Ok(())
            })?;
            json_command(&config, classify)
        }
        Command::Field { common, grid } => {
            let config = resolve(&common, |v| apply_grid(v, &grid))?;
            let model = config.model.build()?;
            Ok(Output {
                text: field_csv(&model, &config)?,
                destination: config.output.clone(),
            })
        }
    }
}

fn json_command(
    config: &RunConfig,
    f: fn(&EFieldModel, &RunConfig) -> Result<Map<String, Value>>,
) -> Result<Output> {
    let model = config.model.build()?;
    let mut body = f(&model, config)?;
    body.insert("model_echo".into(), model_echo(&config.model));
    body.insert("version".into(), Value::from(VERSION));
    Ok(Output {
        text: render(&Value::Object(body)),
        destination: config.output.clone(),
    })
}

/// Config file (if any) with the flags laid over it, validated.
fn resolve(
    common: &CommonArgs,
    extra: impl FnOnce(&mut Map<String, Value>) -> Result<()>,
) -> Result<RunConfig> {
    let mut value = match &common.config {
        Some(path) => config::read_config_value(path)?,
        None => Value::Object(Map::new()),
    };
    let Value::Object(root) = &mut value else {
        return Err(CliError::config("/", "expected an object"));
    };
    apply_common(root, common)?;
    extra(root)?;
    RunConfig::from_value(&value)
}

fn set(root: &mut Map<String, Value>, key: &str, v: Value) {
    root.insert(key.to_string(), v);
}

fn section<'a>(root: &'a mut Map<String, Value>, key: &str) -> &'a mut Map<String, Value> {
    let entry = root
        .entry(key.to_string())
        .or_insert_with(|| Value::Object(Map::new()));
    if !entry.is_object() {
        *entry = Value::Object(Map::new());
    }
    entry.as_object_mut().expect("object")
}

fn apply_common(root: &mut Map<String, Value>, a: &CommonArgs) -> Result<()> {
    if let Some(name) = &a.builtin {
        set(
            root,
            "model",
            object([("builtin", Value::from(name.as_str()))]),
        );
    }
    if a.ex.is_some() || a.ey.is_some() || a.ez.is_some() || a.s.is_some() {
        let model = section(root, "model");
        if model.contains_key("builtin") {
            model.clear();
        }
        for (key, text) in [("ex", &a.ex), ("ey", &a.ey), ("ez", &a.ez), ("s", &a.s)] {
            if let Some(text) = text {
                model.insert(key.into(), Value::from(text.as_str()));
            }
        }
    }
    for p in &a.params {
        let (name, v) = p
            .split_once('=')
            .and_then(|(k, v)| Some((k.trim(), v.trim().parse::<f64>().ok()?)))
            .ok_or_else(|| CliError::Usage(format!("--param expects NAME=VALUE, got `{p}`")))?;
        section(section(root, "model"), "params").insert(name.to_string(), Value::from(v));
    }
    for (key, v) in [
        ("radius", a.radius),
        ("abs_tol", a.abs_tol),
        ("rel_tol", a.rel_tol),
    ] {
        if let Some(v) = v {
            set(root, key, Value::from(v));
        }
    }
    for (key, v) in [
        ("max_depth", a.max_depth),
        ("initial_panels", a.initial_panels),
        ("grid_n", a.grid_n),
    ] {
        if let Some(v) = v {
            set(root, key, Value::from(v));
        }
    }
    if let Some(path) = &a.output {
        set(
            root,
            "output",
            Value::from(path.to_string_lossy().into_owned()),
        );
    }
    Ok(())
}

fn apply_loop(root: &mut Map<String, Value>, a: &LoopArgs) -> Result<()> {
    if a.delta.is_none() && a.z0.is_none() && a.axis.is_none() && a.orientation.is_none() {
        return Ok(());
    }
    let section = section(root, "loop");
    for (key, v) in [("delta", a.delta), ("z0", a.z0)] {
        if let Some(v) = v {
            section.insert(key.into(), Value::from(v));
        }
    }
    for (key, v) in [("axis", &a.axis), ("orientation", &a.orientation)] {
        if let Some(v) = v {
            section.insert(key.into(), Value::from(v.as_str()));
        }
    }
    Ok(())
}

fn apply_grid(root: &mut Map<String, Value>, a: &GridArgs) -> Result<()> {
    if a.min.is_none() && a.max.is_none() && a.steps.is_none() {
        return Ok(());
    }
    let section = section(root, "field");
    for (key, text) in [("min", &a.min), ("max", &a.max)] {
        if let Some(text) = text {
            let v = parse_triple(text).map_err(|m| CliError::Usage(format!("--{key}: {m}")))?;
            section.insert(key.into(), Value::from(v.to_vec()));
        }
    }
    if let Some(text) = &a.steps {
        let parts: std::result::Result<Vec<u64>, _> =
            text.split(',').map(|p| p.trim().parse::<u64>()).collect();
        let v = match parts.as_deref() {
            Ok([n]) => Value::from(*n),
            Ok([a, b, c]) => Value::from(vec![*a, *b, *c]),
            _ => {
                return Err(CliError::Usage(format!(
                    "--steps expects `n` or `nx,ny,nz`, got `{text}`"
                )))
            }
        };
        section.insert("steps".into(), v);
    }
    Ok(())
}

fn settings_echo(c: &RunConfig) -> Value {
    object([
        ("abs_tol", float(c.quadrature.abs_tol)),
        ("rel_tol", float(c.quadrature.rel_tol)),
        ("max_depth", Value::from(c.quadrature.max_depth)),
        ("initial_panels", Value::from(c.quadrature.initial_panels)),
        ("grid_n", Value::from(c.grid_n)),
    ])
}

fn model_echo(spec: &ModelSpec) -> Value {
    let params = |p: &monopole_core::Params| {
        Value::Object(p.iter().map(|(k, v)| (k.clone(), float(*v))).collect())
    };
    match spec {
        ModelSpec::Builtin { name, params: p } => object([
            ("builtin", Value::from(name.as_str())),
            ("params", params(p)),
        ]),
        ModelSpec::Custom {
            ex,
            ey,
            ez,
            s,
            params: p,
        } => object([
            ("ex", Value::from(ex.as_str())),
            ("ey", Value::from(ey.as_str())),
            ("ez", Value::from(ez.as_str())),
            ("s", s.as_deref().map_or(Value::Null, Value::from)),
            ("params", params(p)),
        ]),
    }
}

fn piercing_json(p: &StringPiercing) -> Value {
    object([
        ("theta", float(p.theta)),
        ("phi", float(p.phi)),
        ("point", floats(p.point.as_slice())),
        ("hemisphere", Value::from(p.hemisphere.as_str())),
        ("winding", Value::from(p.winding)),
        ("delta", float(p.delta)),
        ("min_abs_z", float(p.min_abs_z)),
    ])
}

fn into_map(v: Value) -> Map<String, Value> {
    match v {
        Value::Object(map) => map,
        _ => unreachable!("object() builds objects"),
    }
}

fn charge(model: &EFieldModel, c: &RunConfig) -> Result<Map<String, Value>> {
    let settings = ReportSettings {
        quadrature: c.quadrature,
        grid_n: c.grid_n,
    };
    let r = full_report(model, c.radius, &settings)?;
    Ok(into_map(object([
        ("radius", float(r.radius)),
        ("g_flux", float(r.g_flux)),
        ("flux", float(r.flux)),
        ("flux_error", float(r.flux_error)),
        ("g_winding", Value::from(r.g_winding.to_string())),
        ("g_winding_float", float(r.g_winding.to_f64())),
        (
            "piercings",
            Value::Array(r.piercings.iter().map(piercing_json).collect()),
        ),
        ("quantization_residual", float(r.quantization_residual)),
        ("method_agreement", float(r.method_agreement)),
        ("unconverged_cells", Value::from(r.unconverged_cells)),
        ("warning", r.warning.map_or(Value::Null, Value::from)),
        ("settings", settings_echo(c)),
    ])))
}

fn flux(model: &EFieldModel, c: &RunConfig) -> Result<Map<String, Value>> {
    let f = charge_from_flux(model, c.radius, &c.quadrature)?;
    Ok(into_map(object([
        ("radius", float(c.radius)),
        ("flux", float(f.flux.value)),
        ("flux_error", float(f.flux.error_estimate)),
        ("g_flux", float(f.g)),
        ("quantization_residual", float(f.quantization_residual)),
        ("tiles", Value::from(f.flux.tiles)),
        ("evaluations", Value::from(f.flux.evaluations)),
        ("settings", settings_echo(c)),
    ])))
}

fn windings(model: &EFieldModel, c: &RunConfig) -> Result<Map<String, Value>> {
    let w = charge_from_windings(model, c.radius, c.grid_n)?;
    Ok(into_map(object([
        ("radius", float(c.radius)),
        ("g_winding", Value::from(w.g.to_string())),
        ("g_winding_float", float(w.g.to_f64())),
        (
            "piercings",
            Value::Array(w.piercings.iter().map(piercing_json).collect()),
        ),
        ("unconverged_cells", Value::from(w.failed_cells.len())),
        ("settings", settings_echo(c)),
    ])))
}

fn circulate(model: &EFieldModel, c: &RunConfig) -> Result<Map<String, Value>> {
    let orientation = c.loop_spec.orientation;
    let (path, echo) = match &c.loop_spec.shape {
        LoopShape::Circle { delta, z0, axis } => {
            let path = ParametricLoop::circle(axis.normalize() * *z0, *delta, *axis, orientation)?;
            let echo = object([
                ("delta", float(*delta)),
                ("z0", float(*z0)),
                ("axis", floats(axis.as_slice())),
                ("orientation", Value::from(orientation.as_str())),
            ]);
            (path, echo)
        }
        LoopShape::Curve { x, y, z } => {
            let parse = |s: &str| Expression::parse(s).map_err(CoreError::from);
            let params = model.params.clone();
            let path = ParametricLoop::curve(parse(x)?, parse(y)?, parse(z)?, params, orientation)?;
            let echo = object([
                ("x", Value::from(x.as_str())),
                ("y", Value::from(y.as_str())),
                ("z", Value::from(z.as_str())),
                ("orientation", Value::from(orientation.as_str())),
            ]);
            (path, echo)
        }
    };
    let r = circulation(model, &path, &c.quadrature)?;
    Ok(into_map(object([
        ("delta_phi", float(r.value)),
        ("error_estimate", float(r.error_estimate)),
        ("min_string_proxy", float(r.min_string_proxy)),
        ("evaluations", Value::from(r.evaluations)),
        ("loop", echo),
        ("settings", settings_echo(c)),
    ])))
}

fn classify(model: &EFieldModel, c: &RunConfig) -> Result<Map<String, Value>> {
    let contact = model.classify_contact(c.lambda_threshold)?;
    Ok(into_map(object([
        ("lambda", float(contact.lambda)),
        ("class", Value::from(contact.class.as_str())),
        ("threshold", float(c.lambda_threshold)),
    ])))
}

fn list_models() -> Value {
    let models = Builtin::ALL
        .iter()
        .map(|b| {
            let params = b
                .parameter_docs()
                .iter()
                .map(|(name, doc)| {
                    object([("name", Value::from(*name)), ("doc", Value::from(*doc))])
                })
                .collect();
            object([
                ("name", Value::from(b.name())),
                ("field", Value::from(b.field())),
                ("params", Value::Array(params)),
                ("safe_radius", float(b.safe_radius())),
            ])
        })
        .collect();
    object([
        ("models", Value::Array(models)),
        ("version", Value::from(VERSION)),
    ])
}

pub const FIELD_HEADER: &str = "x,y,z,a_x,a_y,a_z,b_x,b_y,b_z,e_minus,e_plus,skipped";

/// One row per grid point, `z` fastest. Points on a string or at a
/// degeneracy keep their row with `nan` for `A` and `B` and `skipped = 1`.
fn field_csv(model: &EFieldModel, c: &RunConfig) -> Result<String> {
    let grid = &c.field;
    let spectral = &c.quadrature.spectral;
    let mut out = String::with_capacity(200 * grid.steps.iter().product::<usize>());
    out.push_str(FIELD_HEADER);
    out.push('\n');
    for i in 0..grid.steps[0] {
        for j in 0..grid.steps[1] {
            for k in 0..grid.steps[2] {
                let r = Vec3::new(
                    grid.coordinate(0, i),
                    grid.coordinate(1, j),
                    grid.coordinate(2, k),
                );
                let (lo, hi) = energies(model, &r)?;
                let geometry = berry_connection(model, &r, spectral)
                    .and_then(|a| Ok((a, berry_curvature(model, &r, spectral)?)));
                let (a, b, skipped) = match geometry {
                    Ok((a, b)) => (a, b, 0),
                    Err(CoreError::OnString { .. } | CoreError::AtDegeneracy { .. }) => {
                        (Vec3::repeat(f64::NAN), Vec3::repeat(f64::NAN), 1)
                    }
                    Err(e) => return Err(e.into()),
                };
                let cells = [r.x, r.y, r.z, a.x, a.y, a.z, b.x, b.y, b.z, lo, hi].map(sci);
                let _ = writeln!(out, "{},{skipped}", cells.join(","));
            }
        }
    }
    Ok(out)
}
