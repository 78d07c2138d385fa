use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "monopole",
    version,
    about = "Berry curvature flux and Dirac string windings of two-level degeneracies"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Charge by flux and by string windings, with their agreement.
    Charge(CommonArgs),
    /// Charge from the curvature flux through a sphere.
    Flux(CommonArgs),
    /// Piercings of the D+ strings through a sphere and their windings.
    Windings(CommonArgs),
    /// Geometric phase along a closed loop.
    Circulate {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        path: LoopArgs,
    },
    /// CSV dump of connection, curvature and energies on a grid.
    Field {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Determinant of the Jacobian of e at the origin.
    Classify {
        #[command(flatten)]
        common: CommonArgs,
        /// |Λ| above this is a generic contact.
        #[arg(long, allow_negative_numbers = true)]
        lambda_threshold: Option<f64>,
    },
    /// Built-in model families and their parameters.
    ListModels {
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// JSON run configuration; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, conflicts_with_all = ["ex", "ey", "ez"])]
    pub builtin: Option<String>,
    /// Model parameter `name=value`; repeatable.
    #[arg(long = "param", value_name = "NAME=VALUE")]
    pub params: Vec<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub ex: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub ey: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub ez: Option<String>,
    /// Scalar shift s(r).
    #[arg(long, allow_hyphen_values = true)]
    pub s: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub radius: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub abs_tol: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub rel_tol: Option<f64>,
    #[arg(long)]
    pub max_depth: Option<u64>,
    #[arg(long)]
    pub initial_panels: Option<u64>,
    #[arg(long)]
    pub grid_n: Option<u64>,
    /// Write the result here instead of stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LoopArgs {
    /// Circle radius.
    #[arg(long, allow_negative_numbers = true)]
    pub delta: Option<f64>,
    /// Offset of the circle center along the axis.
    #[arg(long, allow_hyphen_values = true)]
    pub z0: Option<f64>,
    /// `x`, `y`, `z` or `a,b,c`.
    #[arg(long, allow_hyphen_values = true)]
    pub axis: Option<String>,
    /// `ccw` or `cw` about the axis; default `cw`.
    #[arg(long)]
    pub orientation: Option<String>,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    /// Lower corner, `a` or `a,b,c`.
    #[arg(long, allow_hyphen_values = true)]
    pub min: Option<String>,
    /// Upper corner, `a` or `a,b,c`.
    #[arg(long, allow_hyphen_values = true)]
    pub max: Option<String>,
    /// Points per axis, `n` or `nx,ny,nz`.
    #[arg(long)]
    pub steps: Option<String>,
}
