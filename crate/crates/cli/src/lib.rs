// Copyright 2026 The convex-lse Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


//! Command handlers behind the `convex-lse` binary.
//!
//! Every handler writes `key=value` lines to `out`, an `error=` line to `err`
//! on failure, and returns the process exit code. [`run`] parses arguments and dispatches.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use convex_lse::io::{self, Prediction};
use convex_lse::sim::{self, Design, Experiment, Scenario, Truth};
use convex_lse::{evaluate, fit, Error, FitConfig, SolveStatus, Variant};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_NO_CONVERGENCE: i32 = 3;
pub const EXIT_DIMENSION: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "convex-lse", version, about = "Convex least squares regression")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a model to a CSV file and write it as JSON.
    Fit(FitArgs),
    /// Evaluate a fitted model at the points of a CSV file.
    Predict(PredictArgs),
    /// Run a Monte Carlo sweep over sample sizes.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    Convex,
    /// Convex and nonincreasing in every coordinate.
    Monotone,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Convex => Variant::Convex,
            VariantArg::Monotone => Variant::ConvexNonincreasing,
        }
    }
}

#[derive(Debug, clap::Args)]
pub struct FitArgs {
    /// CSV file with a header row.
    #[arg(long)]
    pub input: PathBuf,
    /// Name of the response column; every other column is a coordinate.
    #[arg(long)]
    pub response: String,
    #[arg(long, value_enum, default_value_t = VariantArg::Convex)]
    pub variant: VariantArg,
    #[arg(long)]
    pub out: PathBuf,
    /// Relative feasibility and stationarity tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Solve in the original coordinates.
    #[arg(long)]
    pub no_scale: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Extension {
    /// The lower convex envelope; infinite outside its domain.
    Envelope,
    /// The maximum of the fitted supporting hyperplanes; finite everywhere.
    Maxaffine,
}

#[derive(Debug, clap::Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// CSV file with a header row; every column is a coordinate.
    #[arg(long)]
    pub points: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = Extension::Envelope)]
    pub extension: Extension,
    /// Also write the supporting hyperplane at each point.
    #[arg(long)]
    pub subgradients: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScenarioArg {
    /// `|x|^2`.
    Quadratic,
    /// `x2 - x1`, or `-x1` when d = 1.
    Hyperplane,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DesignArg {
    Grid,
    Iid,
    Hetero,
}

impl From<DesignArg> for Design {
    fn from(d: DesignArg) -> Self {
        match d {
            DesignArg::Grid => Design::FixedGrid,
            DesignArg::Iid => Design::IidUniform,
            DesignArg::Hetero => Design::HeteroscedasticFixed,
        }
    }
}

#[derive(Debug, clap::Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum, default_value_t = ScenarioArg::Quadratic)]
    pub scenario: ScenarioArg,
    #[arg(long, default_value_t = 2)]
    pub d: usize,
    /// Comma-separated sample sizes.
    #[arg(long, value_delimiter = ',', default_value = "256")]
    pub n: Vec<usize>,
    #[arg(long, default_value_t = 1)]
    pub reps: usize,
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    #[arg(long, value_enum, default_value_t = DesignArg::Iid)]
    pub design: DesignArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = VariantArg::Convex)]
    pub variant: VariantArg,
    /// Directory receiving report.json and report.csv.
    #[arg(long)]
    pub out: PathBuf,
}

/// Exit code for a library error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::NoConvergence { .. } => EXIT_NO_CONVERGENCE,
        Error::DimensionMismatch { .. } => EXIT_DIMENSION,
        Error::InvalidScenario(_) => EXIT_USAGE,
        _ => EXIT_IO,
    }
}

fn fail(sink: &mut dyn Write, err: &Error) -> i32 {
    let _ = writeln!(sink, "error={err}");
    exit_code(err)
}

fn status_name(status: SolveStatus) -> &'static str {
    match status {
        SolveStatus::Converged => "converged",
        SolveStatus::IterLimit => "iter_limit",
    }
}

pub fn cmd_fit(args: &FitArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let mut cfg = FitConfig {
        scaling: !args.no_scale,
        ..FitConfig::default()
    };
    if let Some(t) = args.tol {
        cfg.feas_tol = t;
        cfg.stat_tol = t;
    }
    if let Some(k) = args.max_iter {
        cfg.max_iter = k;
    }
    if cfg.check().is_err() {
        let _ = writeln!(err, "error=invalid tolerance or iteration limit");
        return EXIT_USAGE;
    }
    let data = match io::read_csv(&args.input, &args.response) {
        Ok(d) => d,
        Err(e) => return fail(err, &e),
    };
    let model = match fit(&data, args.variant.into(), &cfg) {
        Ok(m) => m,
        Err(e) => return fail(err, &e),
    };
    if let Err(e) = io::write_model(&args.out, &model) {
        return fail(err, &e);
    }
    let diag = model.diagnostics();
    let _ = writeln!(
        out,
        "status={} n={} d={} iterations={} primal_residual={:e} stationarity_residual={:e} objective={} out={}",
        status_name(diag.status),
        model.n(),
        model.d(),
        diag.iterations,
        diag.primal_residual,
        diag.stationarity_residual,
        diag.objective,
        args.out.display(),
    );
    match diag.status {
        SolveStatus::Converged => EXIT_OK,
        SolveStatus::IterLimit => EXIT_NO_CONVERGENCE,
    }
}

pub fn cmd_predict(args: &PredictArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let model = match io::read_model(&args.model) {
        Ok(m) => m,
        Err(e) => return fail(err, &e),
    };
    let (coords, d) = match io::read_points(&args.points) {
        Ok(p) => p,
        Err(e) => return fail(err, &e),
    };
    if d != model.d() {
        return fail(err, &Error::DimensionMismatch { expected: model.d(), got: d });
    }
    let mut rows = Vec::with_capacity(coords.len() / d.max(1));
    let mut outside = 0;
    for x in coords.chunks(d) {
        let r = match evaluate(&model, x) {
            Ok(r) => r,
            Err(e) => return fail(err, &e),
        };
        outside += usize::from(!r.in_domain);
        let row = match args.extension {
            Extension::Envelope => Prediction {
                value: r.value,
                in_domain: r.in_domain,
                hyperplane: r.subgradient.zip(r.intercept),
            },
            Extension::Maxaffine => {
                let (xi, eta) = match convex_lse::eval::max_affine_hyperplane(&model, x) {
                    Ok(h) => h,
                    Err(e) => return fail(err, &e),
                };
                let value = xi.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + eta;
                Prediction {
                    value,
                    in_domain: r.in_domain,
                    hyperplane: Some((xi, eta)),
                }
            }
        };
        rows.push(row);
    }
    if let Err(e) = io::write_predictions(&args.out, &rows, d, args.subgradients) {
        return fail(err, &e);
    }
    let _ = writeln!(
        out,
        "points={} outside_domain={} out={}",
        rows.len(),
        outside,
        args.out.display()
    );
    EXIT_OK
}

pub fn cmd_simulate(args: &SimulateArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let truth = match args.scenario {
        ScenarioArg::Quadratic => Truth::Quadratic,
        ScenarioArg::Hyperplane => Truth::tilted_plane(args.d),
    };
    let scenario = Scenario {
        truth,
        design: args.design.into(),
        d: args.d,
        n: args.n.first().copied().unwrap_or(1),
        noise_sigma: args.sigma,
        seed: args.seed,
    };
    if let Err(e) = scenario.check() {
        return fail(err, &e);
    }
    if args.n.contains(&0) || args.reps == 0 {
        let _ = writeln!(err, "error=sample sizes and replications must be positive");
        return EXIT_USAGE;
    }
    let mut exp = Experiment::new(scenario, args.n.clone(), args.reps, args.seed);
    exp.variant = args.variant.into();
    exp.threads = sim::threads_from_env();
    let report = match sim::run_experiment(&exp) {
        Ok(r) => r,
        Err(e) => return fail(err, &e),
    };
    if let Err(e) = std::fs::create_dir_all(&args.out) {
        return fail(err, &Error::Io { path: args.out.clone(), source: e });
    }
    let json = args.out.join("report.json");
    let csv = args.out.join("report.csv");
    if let Err(e) = io::write_report_json(&json, &report).and_then(|_| io::write_report_csv(&csv, &report)) {
        return fail(err, &e);
    }
    let fmt = |v: Option<f64>| v.map_or_else(|| "nan".to_owned(), |v| format!("{v:e}"));
    for s in &report.summaries {
        let _ = writeln!(
            out,
            "n={} reps={} failures={} mean_sup_error={} mean_grad_error={}",
            s.n,
            s.replications,
            s.failures,
            fmt(s.mean_sup_error),
            fmt(s.mean_grad_error),
        );
    }
    let _ = writeln!(out, "report={} table={}", json.display(), csv.display());
    EXIT_OK
}

/// Parses `args` (program name first) and runs the command. Help and
/// version requests go to `out` and exit 0; other parse errors exit 1.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{text}");
                EXIT_USAGE
            } else {
                let _ = write!(out, "{text}");
                EXIT_OK
            };
        }
    };
    match &cli.command {
        Command::Fit(a) => cmd_fit(a, out, err),
        Command::Predict(a) => cmd_predict(a, out, err),
        Command::Simulate(a) => cmd_simulate(a, out, err),
    }
}
