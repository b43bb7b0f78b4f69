//! Command-line front end.
//!
//! Every subcommand can be driven by flags or by a JSON config. When an
//! output directory is given (or required, for the solver commands) the
//! fully resolved config is written as `config.json` next to the outputs,
//! together with its SHA-256 in `config.sha256`; rerunning with
//! `--config <dir>/config.json` reproduces every output byte for byte.
//!
//! Exit codes: 0 on success (whatever the solver classification), 1 when the
//! oracle tolerance fails or on internal errors, 2 on domain, configuration
//! and usage errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::construct::{self, SupersolutionSpec};
use crate::error::{Error, Result};
use crate::io::{config_hash, to_json_pretty, write_text};
use crate::radialop::{
    self, assemble_operator_with, build_grid, field_to_csv, AssemblyOptions, OracleReport,
    RefinementReport, ORACLE_TOLERANCE,
};
use crate::solver::{
    self, ProbeResult, SolveStatus, SolverControls, SolverReport, Source, TraceRow,
};
use crate::specfun::{self, ExponentReport, ProblemParams};
use crate::sweep::{self, GridConfig, SweepPlan, TransitionBand};

/// Environment variable overriding the output directory.
pub const OUT_DIR_ENV: &str = "HARDY_KPZ_OUT_DIR";
/// Environment variable overriding the worker thread count.
pub const THREADS_ENV: &str = "HARDY_KPZ_THREADS";
/// Output directory of the solver commands when none is given.
pub const DEFAULT_OUT_DIR: &str = "hardy-kpz-out";

/// Fractional Hardy–KPZ numerics.
#[derive(Debug, Parser)]
#[command(name = "hardy-kpz", version, about)]
pub struct Cli {
    /// Worker threads for assembly and sweeps (default: all cores).
    #[arg(long, global = true, env = THREADS_ENV)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Hardy constant Λ_{N,s} and normalizing constant a_{N,s}.
    Constants(ConstantsArgs),
    /// Critical exponents at one λ, or an exponent table over a λ range.
    Exponents(ExponentsArgs),
    /// Power-function oracle of the discrete fractional Laplacian.
    Oracle(OracleArgs),
    /// Monotone scheme for the KPZ problem (JSON config).
    Solve(RunArgs),
    /// Monotone scheme for the damped problem (JSON config with alpha_damp).
    Damped(RunArgs),
    /// Parameter sweep producing a region map (JSON plan).
    Sweep(SweepArgs),
    /// Bracket the source-scale threshold μ* (JSON config).
    Probe(RunArgs),
}

/// Flags shared by every subcommand for config input and output.
#[derive(Debug, Args)]
pub struct IoArgs {
    /// JSON config; replaces the parameter flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory for the resolved config and artifacts.
    #[arg(long, env = OUT_DIR_ENV)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ConstantsArgs {
    /// Dimension N (integer, N > 2s).
    #[arg(long = "N", required_unless_present = "config")]
    pub n: Option<u32>,
    /// Fractional order s, dimensionless, 0 < s < 1.
    #[arg(
        long,
        required_unless_present = "config",
        allow_negative_numbers = true
    )]
    pub s: Option<f64>,
    #[command(flatten)]
    pub io: IoArgs,
}

#[derive(Debug, Args)]
pub struct ExponentsArgs {
    /// Dimension N (integer, N > 2s).
    #[arg(long = "N", required_unless_present = "config")]
    pub n: Option<u32>,
    /// Fractional order s, 1/2 < s < 1 for the exponent chain (any 0 < s < 1 accepted).
    #[arg(
        long,
        required_unless_present = "config",
        allow_negative_numbers = true
    )]
    pub s: Option<f64>,
    /// Hardy coefficient λ, 0 < λ ≤ Λ_{N,s}.
    #[arg(long, conflicts_with = "table", allow_negative_numbers = true)]
    pub lambda: Option<f64>,
    /// Table mode: `start:stop:steps` over λ; rows outside (0, Λ] are marked invalid.
    #[arg(long, value_name = "START:STOP:STEPS")]
    pub table: Option<String>,
    /// Interpret table bounds as multiples of Λ_{N,s}.
    #[arg(long, requires = "table")]
    pub relative: bool,
    #[command(flatten)]
    pub io: IoArgs,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    /// Dimension N (integer, N > 2s).
    #[arg(long = "N", required_unless_present = "config")]
    pub n: Option<u32>,
    /// Fractional order s, 0 < s < 1.
    #[arg(
        long,
        required_unless_present = "config",
        allow_negative_numbers = true
    )]
    pub s: Option<f64>,
    /// Power exponent θ of |x|^{−θ}, 0 < θ < N − 2s.
    #[arg(long, required_unless_present_any = ["config", "lambda"], allow_negative_numbers = true)]
    pub theta: Option<f64>,
    /// Use θ = μ(λ) for this Hardy coefficient, 0 < λ ≤ Λ_{N,s}.
    #[arg(long, conflicts_with = "theta", allow_negative_numbers = true)]
    pub lambda: Option<f64>,
    /// Ball radius R (length units, > 0).
    #[arg(long = "R", default_value_t = sweep::DESK_RADIUS)]
    pub r_max: f64,
    /// Node count M (≥ 16).
    #[arg(long = "M", default_value_t = 200)]
    pub m: usize,
    /// Grading exponent g ≥ 1 of r_i = R (i/M)^g.
    #[arg(long, default_value_t = 2.0)]
    pub g: f64,
    /// Check nodes with r ≤ this radius (default R/10).
    #[arg(long)]
    pub r_max_check: Option<f64>,
    /// Relative tolerance (dimensionless).
    #[arg(long, default_value_t = ORACLE_TOLERANCE)]
    pub tolerance: f64,
    /// Also assemble with 2M nodes and report the error ratio at common nodes.
    #[arg(long)]
    pub refine: bool,
    #[command(flatten)]
    pub io: IoArgs,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// JSON config file. Keys: `problem` {N, s, lambda, p, mu} with
    /// 0 < s < 1, 0 < lambda ≤ Λ_{N,s}, p > 1, mu ≥ 0; `source`
    /// {"type": "power", exponent, constant} for f = constant·r^{−exponent}
    /// or {"type": "nodal", values}; optional `grid` {R, M, g} (default
    /// R = 0.5, M = 200, g = 2), `assembly`, `controls`, `supersolution`
    /// ("auto" or "none") and, for `damped` only, `alpha_damp` > 2s − 1.
    /// A sweep plan adds `axes` [{param, start, stop, steps, scale}] with
    /// param in p, lambda, mu, alpha_damp and scale in absolute, p-plus,
    /// hardy-constant.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (default `hardy-kpz-out`).
    #[arg(long, env = OUT_DIR_ENV)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Compute at most this many new cells, leaving the rest pending in the checkpoint.
    #[arg(long)]
    pub run_limit: Option<usize>,
}

/// `constants` config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsConfig {
    #[serde(rename = "N")]
    pub n: u32,
    pub s: f64,
}

/// λ range of an exponent table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LambdaRange {
    pub start: f64,
    pub stop: f64,
    pub steps: usize,
    /// Bounds are multiples of Λ_{N,s}.
    #[serde(default)]
    pub relative: bool,
}

/// `exponents` config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExponentsConfig {
    #[serde(rename = "N")]
    pub n: u32,
    pub s: f64,
    #[serde(default)]
    pub lambda: Option<f64>,
    #[serde(default)]
    pub table: Option<LambdaRange>,
}

/// `oracle` config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    #[serde(rename = "N")]
    pub n: u32,
    pub s: f64,
    pub theta: f64,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub assembly: AssemblyOptions,
    #[serde(default)]
    pub r_max_check: Option<f64>,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default)]
    pub refine: bool,
}

fn default_tolerance() -> f64 {
    ORACLE_TOLERANCE
}

/// How the solver commands obtain the classifying supersolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SupersolutionMode {
    /// Build the nearest admissible power supersolution when possible.
    #[default]
    Auto,
    /// Classify by sustained growth only.
    None,
}

/// `solve`, `damped` and `probe` config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveConfig {
    pub problem: ProblemParams,
    /// Damping exponent α (required by `damped`, rejected elsewhere).
    #[serde(default)]
    pub alpha_damp: Option<f64>,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub assembly: AssemblyOptions,
    #[serde(default)]
    pub controls: SolverControls,
    pub source: Source,
    #[serde(default)]
    pub supersolution: SupersolutionMode,
}

/// Parses the command line and runs it, mapping errors to exit codes.
pub fn main_entry() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}

/// Exit code for an error: 2 for domain, configuration and usage errors, 1 otherwise.
pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Domain(_) | Error::Config(_) | Error::Usage(_) | Error::Json(_) => 2,
        _ => 1,
    }
}

/// Runs a parsed command line.
pub fn run(cli: Cli) -> Result<ExitCode> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(Error::Config("threads must be positive".to_string()));
        }
        // Ignored when a global pool already exists (tests calling `run` twice).
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global();
    }
    match cli.command {
        Command::Constants(a) => cmd_constants(a),
        Command::Exponents(a) => cmd_exponents(a),
        Command::Oracle(a) => cmd_oracle(a),
        Command::Solve(a) => cmd_solve(a, false),
        Command::Damped(a) => cmd_solve(a, true),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Probe(a) => cmd_probe(a),
    }
}

/// Reads a JSON config, reporting the path of an offending key.
pub fn read_config<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        Error::Config(format!(
            "{}: at `{}`: {}",
            path.display(),
            e.path(),
            e.inner()
        ))
    })
}

/// Writes `config.json`, `config.sha256` and `files` into `dir`.
fn emit<C: Serialize>(dir: &Path, config: &C, files: &[(&str, String)]) -> Result<String> {
    let hash = config_hash(config)?;
    write_text(&dir.join("config.json"), &to_json_pretty(config)?)?;
    write_text(&dir.join("config.sha256"), &format!("{hash}\n"))?;
    for (name, contents) in files {
        write_text(&dir.join(name), contents)?;
    }
    Ok(hash)
}

fn missing(flag: &str) -> Error {
    Error::Usage(format!("--{flag} is required without --config"))
}

#[derive(Debug, Serialize)]
struct ConstantsOutput {
    #[serde(rename = "N")]
    n: u32,
    s: f64,
    #[serde(rename = "Lambda_Ns")]
    lambda_ns: f64,
    #[serde(rename = "a_Ns")]
    a_ns: f64,
}

fn cmd_constants(a: ConstantsArgs) -> Result<ExitCode> {
    let config = match &a.io.config {
        Some(path) => read_config(path)?,
        None => ConstantsConfig {
            n: a.n.ok_or_else(|| missing("N"))?,
            s: a.s.ok_or_else(|| missing("s"))?,
        },
    };
    let out = ConstantsOutput {
        n: config.n,
        s: config.s,
        lambda_ns: specfun::hardy_constant(config.n, config.s)?,
        a_ns: specfun::normalizing_constant(config.n, config.s)?,
    };
    let json = to_json_pretty(&out)?;
    if let Some(dir) = &a.io.out {
        emit(dir, &config, &[("constants.json", json.clone())])?;
    }
    print!("{json}");
    Ok(ExitCode::SUCCESS)
}

fn parse_range(text: &str, relative: bool) -> Result<LambdaRange> {
    let parts: Vec<&str> = text.split(':').collect();
    let bad = || Error::Usage(format!("--table expects START:STOP:STEPS, got `{text}`"));
    if parts.len() != 3 {
        return Err(bad());
    }
    Ok(LambdaRange {
        start: parts[0].parse().map_err(|_| bad())?,
        stop: parts[1].parse().map_err(|_| bad())?,
        steps: parts[2].parse().map_err(|_| bad())?,
        relative,
    })
}

fn cmd_exponents(a: ExponentsArgs) -> Result<ExitCode> {
    let config = match &a.io.config {
        Some(path) => read_config(path)?,
        None => ExponentsConfig {
            n: a.n.ok_or_else(|| missing("N"))?,
            s: a.s.ok_or_else(|| missing("s"))?,
            lambda: a.lambda,
            table: a
                .table
                .as_deref()
                .map(|t| parse_range(t, a.relative))
                .transpose()?,
        },
    };
    let (name, text) = match (config.lambda, config.table) {
        (Some(lambda), None) => {
            let report: ExponentReport = specfun::exponents(config.n, config.s, lambda)?;
            ("exponents.json", to_json_pretty(&report)?)
        }
        (None, Some(range)) => {
            let unit = if range.relative {
                specfun::hardy_constant(config.n, config.s)?
            } else {
                1.0
            };
            let axis = sweep::AxisSpec {
                param: sweep::SweepParam::Lambda,
                start: range.start,
                stop: range.stop,
                steps: range.steps,
                scale: sweep::AxisScale::Absolute,
            };
            let grid: Vec<f64> = axis.values().into_iter().map(|v| v * unit).collect();
            let rows = sweep::exponent_table(config.n, config.s, &grid)?;
            ("exponent_table.csv", sweep::exponent_table_csv(&rows))
        }
        _ => {
            return Err(Error::Usage(
                "give exactly one of --lambda and --table".to_string(),
            ))
        }
    };
    if let Some(dir) = &a.io.out {
        emit(dir, &config, &[(name, text.clone())])?;
    }
    print!("{text}");
    Ok(ExitCode::SUCCESS)
}

#[derive(Debug, Serialize)]
struct OracleOutput {
    report: OracleReport,
    tolerance: f64,
    pass: bool,
    refinement: Option<RefinementReport>,
}

fn cmd_oracle(a: OracleArgs) -> Result<ExitCode> {
    let mut config = match &a.io.config {
        Some(path) => read_config(path)?,
        None => {
            let n = a.n.ok_or_else(|| missing("N"))?;
            let s = a.s.ok_or_else(|| missing("s"))?;
            let theta = match (a.theta, a.lambda) {
                (Some(t), _) => t,
                (None, Some(l)) => specfun::exponents(n, s, l)?.mu_lambda,
                (None, None) => return Err(missing("theta")),
            };
            OracleConfig {
                n,
                s,
                theta,
                grid: GridConfig {
                    r_max: a.r_max,
                    m: a.m,
                    g: a.g,
                },
                assembly: AssemblyOptions::default(),
                r_max_check: a.r_max_check,
                tolerance: a.tolerance,
                refine: a.refine,
            }
        }
    };
    config.r_max_check.get_or_insert(config.grid.r_max / 10.0);
    let check = config.r_max_check.unwrap_or(config.grid.r_max / 10.0);
    specfun::power_multiplier(config.theta, config.n, config.s)?;
    let grid = build_grid(config.grid.r_max, config.grid.m, config.grid.g)?;
    let op = assemble_operator_with(&grid, config.n, config.s, &config.assembly)?;
    let report = op.oracle_power_test(config.theta, check)?;
    let refinement = if config.refine {
        Some(radialop::oracle_refinement(
            &grid,
            config.n,
            config.s,
            &config.assembly,
            config.theta,
            check,
        )?)
    } else {
        None
    };
    let pass = report.passes(config.tolerance);
    let json = to_json_pretty(&OracleOutput {
        report,
        tolerance: config.tolerance,
        pass,
        refinement,
    })?;
    if let Some(dir) = &a.io.out {
        emit(dir, &config, &[("oracle.json", json.clone())])?;
    }
    print!("{json}");
    Ok(if pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

/// `report.json` of the solver commands.
#[derive(Debug, Serialize)]
struct SolveOutput<'a> {
    status: SolveStatus,
    reason: Option<&'a str>,
    sup_norm: f64,
    monotonicity_violations: usize,
    fixed_point_residual: f64,
    gradient_integral: Option<f64>,
    hardy_integral: Option<f64>,
    supersolution: Option<&'a SupersolutionSpec>,
    supersolution_bound: Option<f64>,
    below_supersolution: Option<bool>,
    exponents: ExponentReport,
    trace: &'a [TraceRow],
}

fn out_dir(out: Option<PathBuf>) -> PathBuf {
    out.unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

/// Runs a solver config and returns the report with the spec it used.
pub fn run_solve_config(
    config: &SolveConfig,
    damped: bool,
) -> Result<(SolverReport, Option<SupersolutionSpec>)> {
    config.problem.validate()?;
    let alpha = match (damped, config.alpha_damp) {
        (true, Some(a)) => Some(a),
        (true, None) => {
            return Err(Error::Config(
                "alpha_damp: required by `damped`".to_string(),
            ))
        }
        (false, Some(_)) => {
            return Err(Error::Config(
                "alpha_damp: only valid for `damped`".to_string(),
            ))
        }
        (false, None) => None,
    };
    let grid = build_grid(config.grid.r_max, config.grid.m, config.grid.g)?;
    let op = assemble_operator_with(&grid, config.problem.n, config.problem.s, &config.assembly)?;
    let spec = match (config.supersolution, alpha) {
        (SupersolutionMode::None, _) => None,
        (SupersolutionMode::Auto, None) => {
            solver::reference_supersolution(&config.problem, &config.source, config.grid.r_max)?
        }
        (SupersolutionMode::Auto, Some(a)) => {
            let p = &config.problem;
            match construct::damped_supersolution(p.n, p.s, p.lambda, p.p, a, config.grid.r_max) {
                Ok(spec) => Some(spec),
                Err(Error::Construction(_)) => None,
                Err(e) => return Err(e),
            }
        }
    };
    let report = match alpha {
        Some(a) => solver::solve_damped(
            &config.problem,
            a,
            &config.source,
            &op,
            &config.controls,
            spec.as_ref(),
        )?,
        None => solver::solve_kpz(
            &config.problem,
            &config.source,
            &op,
            &config.controls,
            spec.as_ref(),
        )?,
    };
    Ok((report, spec))
}

fn cmd_solve(a: RunArgs, damped: bool) -> Result<ExitCode> {
    let config: SolveConfig = read_config(&a.config)?;
    let (report, spec) = run_solve_config(&config, damped)?;
    let exponents = specfun::critical_exponents(&config.problem)?;
    let summary = SolveOutput {
        status: report.status,
        reason: report.reason.as_deref(),
        sup_norm: report.field.sup_norm(),
        monotonicity_violations: report.monotonicity_violations,
        fixed_point_residual: report.fixed_point_residual,
        gradient_integral: report.gradient_integral,
        hardy_integral: report.hardy_integral,
        supersolution: spec.as_ref(),
        supersolution_bound: report.supersolution_bound,
        below_supersolution: report.below_supersolution,
        exponents,
        trace: &report.trace,
    };
    let json = to_json_pretty(&summary)?;
    let dir = out_dir(a.out);
    emit(
        &dir,
        &config,
        &[
            ("report.json", json),
            ("trace.csv", report.trace_csv()),
            (
                "field.csv",
                field_to_csv(&report.field, config.problem.n, config.problem.s),
            ),
        ],
    )?;
    println!(
        "{} (sup norm {:.16e}); outputs in {}",
        report.status.as_str(),
        report.field.sup_norm(),
        dir.display()
    );
    Ok(ExitCode::SUCCESS)
}

#[derive(Debug, Serialize)]
struct SweepSummary<'a> {
    cells: usize,
    pending: usize,
    band: Option<&'a TransitionBand>,
}

fn cmd_sweep(a: SweepArgs) -> Result<ExitCode> {
    let plan: SweepPlan = read_config(&a.run.config)?;
    let dir = out_dir(a.run.out);
    let map = sweep::run_sweep(&plan, Some(&dir.join("checkpoint.jsonl")), a.run_limit)?;
    emit(
        &dir,
        &plan,
        &[
            ("region_map.csv", map.to_csv()),
            ("region_map.json", to_json_pretty(&map.sidecar())?),
        ],
    )?;
    let summary = SweepSummary {
        cells: map.cells.len(),
        pending: map.pending,
        band: map.band.as_ref(),
    };
    print!("{}", to_json_pretty(&summary)?);
    Ok(ExitCode::SUCCESS)
}

fn cmd_probe(a: RunArgs) -> Result<ExitCode> {
    let config: SolveConfig = read_config(&a.config)?;
    if config.alpha_damp.is_some() {
        return Err(Error::Config("alpha_damp: not used by `probe`".to_string()));
    }
    config.problem.validate()?;
    let grid = build_grid(config.grid.r_max, config.grid.m, config.grid.g)?;
    let op = assemble_operator_with(&grid, config.problem.n, config.problem.s, &config.assembly)?;
    let result: ProbeResult =
        solver::mu_threshold_probe(&config.problem, &config.source, &op, &config.controls)?;
    let json = to_json_pretty(&result)?;
    let dir = out_dir(a.out);
    emit(&dir, &config, &[("probe.json", json.clone())])?;
    print!("{json}");
    Ok(ExitCode::SUCCESS)
}
