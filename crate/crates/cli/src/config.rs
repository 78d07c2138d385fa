//! Run configuration: JSON file schema, defaults and validation.
//!
//! ```text
//! {
//!   "model": {"builtin": "power_contact", "params": {"n": 3}}
//!          | {"ex": "...", "ey": "...", "ez": "...", "s": "...", "params": {...}},
//!   "radius": 0.5, "abs_tol": 1e-6, "rel_tol": 1e-8, "max_depth": 12,
//!   "initial_panels": 8, "grid_n": 128, "lambda_threshold": 1e-8,
//!   "output": "report.json",
//!   "loop": {"delta": 0.1, "z0": 0.2, "axis": "z", "orientation": "cw"}
//!         | {"x": "...", "y": "...", "z": "...", "orientation": "cw"},
//!   "field": {"min": -1, "max": [1, 1, 2], "steps": 11}
//! }
//! ```
//!
//! Everything except `model` is optional. Errors carry a JSON pointer to
//! the offending key.

use std::fs;
use std::path::{Path, PathBuf};

use monopole_core::integrate::MAX_DEPTH_LIMIT;
use monopole_core::model::DEFAULT_LAMBDA_THRESHOLD;
use monopole_core::strings::{DEFAULT_GRID_N, MIN_GRID_N};
use monopole_core::{
    Builtin, Expression, ModelSpec, Orientation, Params, QuadratureSettings, Vec3,
};
use serde_json::{Map, Value};

use crate::error::CliError;

type Result<T> = std::result::Result<T, CliError>;

pub const DEFAULT_RADIUS: f64 = 0.5;
/// Upper bound on the number of points in a field dump.
pub const MAX_FIELD_POINTS: usize = 10_000_000;

#[derive(Debug, Clone, PartialEq)]
pub enum LoopShape {
    /// Circle of radius `delta` about `axis`, centered at `z0·axis`.
    Circle { delta: f64, z0: f64, axis: Vec3 },
    /// Expressions in `t ∈ [0, 1]`, evaluated with the model parameters.
    Curve { x: String, y: String, z: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoopSpec {
    pub shape: LoopShape,
    pub orientation: Orientation,
}

impl Default for LoopSpec {
    fn default() -> Self {
        LoopSpec {
            shape: LoopShape::Circle {
                delta: 0.1,
                z0: 0.2,
                axis: Vec3::z(),
            },
            // the rim of the hole around a string on the +axis side
            orientation: Orientation::Clockwise,
        }
    }
}

/// Regular grid of `steps[k]` points from `min[k]` to `max[k]` per axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldGrid {
    pub min: [f64; 3],
    pub max: [f64; 3],
    pub steps: [usize; 3],
}

impl Default for FieldGrid {
    fn default() -> Self {
        FieldGrid {
            min: [-1.0; 3],
            max: [1.0; 3],
            steps: [11; 3],
        }
    }
}

impl FieldGrid {
    pub fn coordinate(&self, axis: usize, i: usize) -> f64 {
        let n = self.steps[axis];
        if n == 1 {
            return self.min[axis];
        }
        let t = i as f64 / (n - 1) as f64;
        self.min[axis] + (self.max[axis] - self.min[axis]) * t
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelSpec,
    pub radius: f64,
    pub quadrature: QuadratureSettings,
    pub grid_n: usize,
    pub lambda_threshold: f64,
    pub output: Option<PathBuf>,
    pub loop_spec: LoopSpec,
    pub field: FieldGrid,
}

/// Reads and validates a config file.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    RunConfig::from_value(&read_config_value(path)?)
}

pub fn read_config_value(path: &Path) -> Result<Value> {
    let text = fs::read_to_string(path).map_err(|source| CliError::ConfigRead {
        path: path.into(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| CliError::ConfigSyntax {
        path: path.into(),
        message: e.to_string(),
    })
}

const TOP_KEYS: [&str; 11] = [
    "model",
    "radius",
    "abs_tol",
    "rel_tol",
    "max_depth",
    "initial_panels",
    "grid_n",
    "lambda_threshold",
    "output",
    "loop",
    "field",
];

impl RunConfig {
    pub fn from_value(value: &Value) -> Result<Self> {
        let root = Node::object(value, "")?;
        root.check_keys(&TOP_KEYS)?;
        let model = match root.child("model")? {
            Some(node) => model_spec(&node)?,
            None => return Err(CliError::config("/model", "missing \"model\"")),
        };
        let defaults = QuadratureSettings::default();
        let quadrature = QuadratureSettings {
            abs_tol: root.positive("abs_tol")?.unwrap_or(defaults.abs_tol),
            rel_tol: root.positive("rel_tol")?.unwrap_or(defaults.rel_tol),
            max_depth: root
                .uint_in("max_depth", 1, u64::from(MAX_DEPTH_LIMIT))?
                .map_or(defaults.max_depth, |d| d as u32),
            initial_panels: root
                .uint_in("initial_panels", 1, 1024)?
                .map_or(defaults.initial_panels, |n| n as usize),
            ..defaults
        };
        let config = RunConfig {
            model,
            radius: root.positive("radius")?.unwrap_or(DEFAULT_RADIUS),
            quadrature,
            grid_n: root
                .uint_in("grid_n", MIN_GRID_N as u64, 1 << 16)?
                .map_or(DEFAULT_GRID_N, |n| n as usize),
            lambda_threshold: root
                .positive("lambda_threshold")?
                .unwrap_or(DEFAULT_LAMBDA_THRESHOLD),
            output: root.string("output")?.map(PathBuf::from),
            loop_spec: match root.child("loop")? {
                Some(node) => loop_spec(&node)?,
                None => LoopSpec::default(),
            },
            field: match root.child("field")? {
                Some(node) => field_grid(&node)?,
                None => FieldGrid::default(),
            },
        };
        Ok(config)
    }
}

fn model_spec(node: &Node) -> Result<ModelSpec> {
    let params = match node.child("params")? {
        Some(p) => {
            let mut params = Params::new();
            for key in p.map.keys() {
                let v = p.number(key)?.expect("key exists");
                params.insert(key.clone(), v);
            }
            params
        }
        None => Params::new(),
    };
    let spec = if let Some(name) = node.string("builtin")? {
        node.check_keys(&["builtin", "params"])?;
        if Builtin::from_name(name).is_err() {
            let known: Vec<&str> = Builtin::ALL.iter().map(|b| b.name()).collect();
            return Err(CliError::config(
                node.pointer("builtin"),
                format!("unknown built-in `{name}` (known: {})", known.join(", ")),
            ));
        }
        ModelSpec::Builtin {
            name: name.to_string(),
            params,
        }
    } else {
        node.check_keys(&["ex", "ey", "ez", "s", "params"])?;
        let mut parts = Vec::new();
        for key in ["ex", "ey", "ez"] {
            let text = node.string(key)?.ok_or_else(|| {
                CliError::config(
                    node.pointer(key),
                    format!("missing \"{key}\" (or give \"builtin\")"),
                )
            })?;
            parse_expression(node, key, text)?;
            parts.push(text.to_string());
        }
        let s = node.string("s")?.map(str::to_string);
        if let Some(text) = &s {
            parse_expression(node, "s", text)?;
        }
        let [ex, ey, ez]: [String; 3] = parts.try_into().expect("three components");
        ModelSpec::Custom {
            ex,
            ey,
            ez,
            s,
            params,
        }
    };
    spec.build()
        .map_err(|e| CliError::config(node.at.clone(), e.to_string()))?;
    Ok(spec)
}

fn parse_expression(node: &Node, key: &str, text: &str) -> Result<Expression> {
    Expression::parse(text).map_err(|e| CliError::config(node.pointer(key), e.to_string()))
}

fn loop_spec(node: &Node) -> Result<LoopSpec> {
    let defaults = LoopSpec::default();
    let orientation = match node.string("orientation")? {
        None => defaults.orientation,
        Some(text) => {
            parse_orientation(text).map_err(|m| CliError::config(node.pointer("orientation"), m))?
        }
    };
    let shape = if node.get("x").is_some() || node.get("y").is_some() || node.get("z").is_some() {
        node.check_keys(&["x", "y", "z", "orientation"])?;
        let mut parts = Vec::new();
        for key in ["x", "y", "z"] {
            let text = node
                .string(key)?
                .ok_or_else(|| CliError::config(node.pointer(key), format!("missing \"{key}\"")))?;
            parse_expression(node, key, text)?;
            parts.push(text.to_string());
        }
        let [x, y, z]: [String; 3] = parts.try_into().expect("three components");
        LoopShape::Curve { x, y, z }
    } else {
        node.check_keys(&["delta", "z0", "axis", "orientation"])?;
        let LoopShape::Circle { delta, z0, axis } = defaults.shape else {
            unreachable!()
        };
        let axis = match node.get("axis") {
            None => axis,
            Some(Value::String(s)) => {
                parse_axis(s).map_err(|m| CliError::config(node.pointer("axis"), m))?
            }
            Some(_) => {
                let v = node.triple("axis")?.expect("key exists");
                vector_axis(v).map_err(|m| CliError::config(node.pointer("axis"), m))?
            }
        };
        LoopShape::Circle {
            delta: node.positive("delta")?.unwrap_or(delta),
            z0: node.number("z0")?.unwrap_or(z0),
            axis,
        }
    };
    Ok(LoopSpec { shape, orientation })
}

fn field_grid(node: &Node) -> Result<FieldGrid> {
    node.check_keys(&["min", "max", "steps"])?;
    let d = FieldGrid::default();
    let min = node.triple("min")?.unwrap_or(d.min);
    let max = node.triple("max")?.unwrap_or(d.max);
    for k in 0..3 {
        if !(max[k] >= min[k]) {
            return Err(CliError::config(
                node.pointer("max"),
                format!("max must not be below min on axis {k}"),
            ));
        }
    }
    let steps = match node.get("steps") {
        None => d.steps,
        Some(Value::Array(items)) if items.len() == 3 => {
            let mut steps = [0; 3];
            for (k, item) in items.iter().enumerate() {
                steps[k] = step_count(item).ok_or_else(|| {
                    CliError::config(
                        format!("{}/{k}", node.pointer("steps")),
                        "expected an integer >= 1",
                    )
                })?;
            }
            steps
        }
        Some(v) => {
            let n = step_count(v).ok_or_else(|| {
                CliError::config(
                    node.pointer("steps"),
                    "expected an integer >= 1 or an array of three",
                )
            })?;
            [n; 3]
        }
    };
    if steps
        .iter()
        .try_fold(1usize, |acc, &n| acc.checked_mul(n))
        .is_none_or(|total| total > MAX_FIELD_POINTS)
    {
        return Err(CliError::config(
            node.pointer("steps"),
            format!("more than {MAX_FIELD_POINTS} grid points"),
        ));
    }
    Ok(FieldGrid { min, max, steps })
}

fn step_count(v: &Value) -> Option<usize> {
    v.as_u64()
        .filter(|&n| n >= 1)
        .and_then(|n| usize::try_from(n).ok())
}

pub(crate) fn parse_orientation(text: &str) -> std::result::Result<Orientation, String> {
    match text {
        "ccw" | "counterclockwise" => Ok(Orientation::Counterclockwise),
        "cw" | "clockwise" => Ok(Orientation::Clockwise),
        _ => Err(format!("orientation must be `ccw` or `cw`, got `{text}`")),
    }
}

pub(crate) fn parse_axis(text: &str) -> std::result::Result<Vec3, String> {
    match text {
        "x" => Ok(Vec3::x()),
        "y" => Ok(Vec3::y()),
        "z" => Ok(Vec3::z()),
        _ => {
            let v = parse_triple(text)?;
            vector_axis(v)
        }
    }
}

fn vector_axis(v: [f64; 3]) -> std::result::Result<Vec3, String> {
    let axis = Vec3::from(v);
    if axis.norm() > 0.0 && axis.iter().all(|c| c.is_finite()) {
        Ok(axis)
    } else {
        Err("axis must be a nonzero finite vector".into())
    }
}

/// `"a"` or `"a,b,c"`.
pub(crate) fn parse_triple(text: &str) -> std::result::Result<[f64; 3], String> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    let nums: std::result::Result<Vec<f64>, _> = parts.iter().map(|p| p.parse::<f64>()).collect();
    match nums.as_deref() {
        Ok([a]) => Ok([*a; 3]),
        Ok([a, b, c]) => Ok([*a, *b, *c]),
        _ => Err(format!(
            "expected a number or three comma-separated numbers, got `{text}`"
        )),
    }
}

/// A JSON object together with its pointer.
struct Node<'a> {
    map: &'a Map<String, Value>,
    at: String,
}

impl<'a> Node<'a> {
    fn object(value: &'a Value, at: &str) -> Result<Self> {
        match value {
            Value::Object(map) => Ok(Node {
                map,
                at: at.to_string(),
            }),
            _ => Err(CliError::config(
                if at.is_empty() { "/" } else { at },
                "expected an object",
            )),
        }
    }

    fn pointer(&self, key: &str) -> String {
        format!("{}/{}", self.at, key.replace('~', "~0").replace('/', "~1"))
    }

    fn get(&self, key: &str) -> Option<&'a Value> {
        self.map.get(key)
    }

    fn check_keys(&self, allowed: &[&str]) -> Result<()> {
        match self.map.keys().find(|k| !allowed.contains(&k.as_str())) {
            Some(k) => Err(CliError::config(
                self.pointer(k),
                format!("unknown key \"{k}\""),
            )),
            None => Ok(()),
        }
    }

    fn child(&self, key: &str) -> Result<Option<Node<'a>>> {
        self.get(key)
            .map(|v| Node::object(v, &self.pointer(key)))
            .transpose()
    }

    fn string(&self, key: &str) -> Result<Option<&'a str>> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s)),
            Some(_) => Err(CliError::config(self.pointer(key), "expected a string")),
        }
    }

    fn number(&self, key: &str) -> Result<Option<f64>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => match v.as_f64().filter(|x| x.is_finite()) {
                Some(x) => Ok(Some(x)),
                None => Err(CliError::config(
                    self.pointer(key),
                    "expected a finite number",
                )),
            },
        }
    }

    fn positive(&self, key: &str) -> Result<Option<f64>> {
        match self.number(key)? {
            Some(x) if x <= 0.0 => Err(CliError::config(
                self.pointer(key),
                format!("must be positive, got {x}"),
            )),
            other => Ok(other),
        }
    }

    fn uint_in(&self, key: &str, lo: u64, hi: u64) -> Result<Option<u64>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => match v.as_u64().filter(|n| (lo..=hi).contains(n)) {
                Some(n) => Ok(Some(n)),
                None => Err(CliError::config(
                    self.pointer(key),
                    format!("expected an integer in [{lo}, {hi}]"),
                )),
            },
        }
    }

    /// A number (broadcast to all axes) or an array of three numbers.
    fn triple(&self, key: &str) -> Result<Option<[f64; 3]>> {
        let bad = || {
            CliError::config(
                self.pointer(key),
                "expected a number or an array of three numbers",
            )
        };
        match self.get(key) {
            None => Ok(None),
            Some(Value::Array(items)) if items.len() == 3 => {
                let mut out = [0.0; 3];
                for (k, item) in items.iter().enumerate() {
                    out[k] = item.as_f64().filter(|x| x.is_finite()).ok_or_else(|| {
                        CliError::config(
                            format!("{}/{k}", self.pointer(key)),
                            "expected a finite number",
                        )
                    })?;
                }
                Ok(Some(out))
            }
            Some(v) => v
                .as_f64()
                .filter(|x| x.is_finite())
                .map(|x| Some([x; 3]))
                .ok_or_else(bad),
        }
    }
}
