//! Batch front end: `validate`, `run`, `converge`, `depcheck`, `kwc-build`
//! and `constants`.
//!
//! Exit codes: 0 ok, 1 invalid configuration or data, 2 step size refused by
//! the guard, 3 solver failure. Every subcommand leaves a `summary.json` in
//! the output directory.

pub mod config;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use thiserror::Error;

use crate::analysis::{
    check_apriori, check_continuous_dependence, tau_refinement_study, AnalysisError, ConvergenceProblem, Run,
    RunSettings,
};
use crate::coefficients::{io, tau_star, validate_sextet, SchemeConstants, ValidationReport};
use crate::stepper::{StepError, TauGuard};
pub use config::{Problem, RunConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("{0}")]
    Guard(String),
    #[error("solver: {0}")]
    Solver(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Validation(_) | CliError::Io(_) => 1,
            CliError::Guard(_) => 2,
            CliError::Solver(_) => 3,
        }
    }
}

fn is_guard(e: &StepError) -> bool {
    match e {
        StepError::TauGuard { .. } => true,
        StepError::AtStep { source, .. } => is_guard(source),
        _ => false,
    }
}

impl From<StepError> for CliError {
    fn from(e: StepError) -> Self {
        if is_guard(&e) {
            CliError::Guard(e.to_string())
        } else {
            CliError::Solver(e.to_string())
        }
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::Step(s) => s.into(),
            AnalysisError::Mismatch(_) | AnalysisError::TooFewTaus(_) | AnalysisError::NotDecreasing => {
                CliError::Config(e.to_string())
            }
            other => CliError::Solver(other.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "kwc-parabolic", version, about = "Coupled parabolic solver and estimate checker")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for randomized computations.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Run step sizes at or above tau_*.
    #[arg(long, global = true)]
    pub override_tau_guard: bool,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Builder {
    Linearized,
    Adjoint,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the coefficient conditions.
    Validate,
    /// March the scheme with `tau`.
    Run,
    /// Refinement study over `taus`.
    Converge,
    /// Continuous-dependence estimate between two configurations.
    Depcheck {
        #[arg(long)]
        other: PathBuf,
    },
    /// Write the coefficients built from a phase-field pair.
    KwcBuild {
        #[arg(long, value_enum)]
        builder: Option<Builder>,
    },
    /// Print the explicit constants.
    Constants,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Validate => "validate",
            Command::Run => "run",
            Command::Converge => "converge",
            Command::Depcheck { .. } => "depcheck",
            Command::KwcBuild { .. } => "kwc-build",
            Command::Constants => "constants",
        }
    }
}

#[derive(Debug, Serialize)]
struct Summary<'a> {
    command: &'a str,
    name: &'a str,
    status: &'a str,
    exit_code: i32,
    message: Option<String>,
    wall_time_s: f64,
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.into()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

struct Context {
    cfg: RunConfig,
    base: PathBuf,
    out: PathBuf,
    seed: u64,
    override_guard: bool,
}

impl Context {
    fn problem(&self) -> Result<Problem, CliError> {
        Problem::build(&self.cfg, &self.base, None)
    }

    fn guard(&self, problem: &Problem) -> Result<TauGuard, CliError> {
        if self.override_guard {
            return Ok(TauGuard::off());
        }
        let ts = tau_star(problem.sextet.norms(), self.cfg.nu).map_err(|e| CliError::Validation(e.to_string()))?;
        Ok(TauGuard::strict(ts))
    }

    fn settings(&self, problem: &Problem, tau: f64) -> Result<RunSettings, CliError> {
        Ok(RunSettings { tau, nu: self.cfg.nu, tol: self.cfg.tol, mode: self.cfg.slice_mode, guard: self.guard(problem)? })
    }
}

fn failure_message(report: &ValidationReport) -> String {
    let mut s = String::new();
    for c in report.failures() {
        if !s.is_empty() {
            s.push_str("; ");
        }
        s.push_str(c.name);
        if let Some(w) = c.witness {
            let _ = write!(s, " (time index {}, node {}, value {:.6e})", w.time_index, w.node, w.value);
        }
    }
    s
}

/// Refuses inadmissible data before any solve.
fn require_admissible(ctx: &Context, problem: &Problem) -> Result<(), CliError> {
    let report = validate_sextet(&problem.sextet);
    if report.passed() {
        return Ok(());
    }
    write_json(&ctx.out.join("validation.json"), &report)?;
    Err(CliError::Validation(failure_message(&report)))
}

fn cmd_validate(ctx: &Context) -> Result<(), CliError> {
    let problem = ctx.problem()?;
    let report = validate_sextet(&problem.sextet);
    write_json(&ctx.out.join("validation.json"), &report)?;
    for c in &report.conditions {
        println!("{} {}", if c.pass { "ok  " } else { "FAIL" }, c.name);
    }
    if report.passed() {
        Ok(())
    } else {
        Err(CliError::Validation(failure_message(&report)))
    }
}

fn cmd_run(ctx: &Context) -> Result<(), CliError> {
    let problem = ctx.problem()?;
    require_admissible(ctx, &problem)?;
    let tau = ctx.cfg.require_tau()?;
    let settings = ctx.settings(&problem, tau)?;
    let (p0, z0) = (&problem.initial.0, &problem.initial.1);
    let run = Run::execute(&problem.disc, &problem.sextet, &problem.forcing, (p0, z0), &settings)?;
    let disc = &problem.disc;
    let traj = &run.traj;

    let mut csv = String::from("step,t,node,p,z\n");
    for i in 0..=traj.n_steps() {
        let p = disc.v.extend(&traj.p[i]);
        let z = disc.v0.extend(&traj.z[i]);
        let t = traj.time(i);
        for (node, (pv, zv)) in p.iter().zip(&z).enumerate() {
            let _ = writeln!(csv, "{i},{t:.12e},{node},{pv:.12e},{zv:.12e}");
        }
    }
    fs::write(ctx.out.join("trajectory.csv"), csv)?;

    let mut diag = String::from("step,t,p_h,z_h,energy,iterations,relative_residual\n");
    for d in &traj.diagnostics {
        let _ = writeln!(
            diag,
            "{},{:.12e},{:.12e},{:.12e},{:.12e},{},{:.6e}",
            d.index, d.t, d.p_h, d.z_h, d.energy, d.iterations, d.relative_residual
        );
    }
    fs::write(ctx.out.join("diagnostics.csv"), diag)?;
    println!("{} steps of tau = {tau:e}", traj.n_steps());
    Ok(())
}

fn cmd_converge(ctx: &Context) -> Result<(), CliError> {
    let problem = ctx.problem()?;
    require_admissible(ctx, &problem)?;
    let guard = ctx.guard(&problem)?;
    let cp = ConvergenceProblem {
        disc: &problem.disc,
        sextet: &problem.sextet,
        forcing: &problem.forcing,
        initial: (&problem.initial.0, &problem.initial.1),
        nu: ctx.cfg.nu,
        tol: ctx.cfg.tol,
        mode: ctx.cfg.slice_mode,
        guard,
        exact: problem.exact,
    };
    let table = tau_refinement_study(&cp, &ctx.cfg.taus)?;
    let csv = table.to_csv();
    fs::write(ctx.out.join("convergence.csv"), &csv)?;
    print!("{csv}");
    Ok(())
}

#[derive(Debug, Serialize)]
struct DepcheckRecord {
    continuous_dependence: crate::analysis::EstimateReport,
    apriori_first: crate::analysis::EstimateReport,
    apriori_second: crate::analysis::EstimateReport,
    constants: SchemeConstants,
}

fn cmd_depcheck(ctx: &Context, other: &Path) -> Result<(), CliError> {
    let (cfg2, base2) = RunConfig::load(other)?;
    let p1 = ctx.problem()?;
    let p2 = Problem::build(&cfg2, &base2, None)?;
    require_admissible(ctx, &p1)?;
    require_admissible(ctx, &p2)?;
    let tau = ctx.cfg.require_tau()?;
    if cfg2.tau != Some(tau) || cfg2.nu != ctx.cfg.nu {
        return Err(CliError::Config("both configurations need the same tau and nu".into()));
    }
    let settings = ctx.settings(&p1, tau)?;
    let emb = p1.embedding(&ctx.cfg, ctx.seed)?;
    let run1 = Run::execute(&p1.disc, &p1.sextet, &p1.forcing, (&p1.initial.0, &p1.initial.1), &settings)?;
    let settings2 = RunSettings { guard: ctx.guard(&p2)?, ..settings };
    let run2 = Run::execute(&p1.disc, &p2.sextet, &p2.forcing, (&p2.initial.0, &p2.initial.1), &settings2)?;
    let dep = check_continuous_dependence(&p1.disc, &run1, &run2, &emb)?;
    let record = DepcheckRecord {
        apriori_first: check_apriori(&p1.disc, &run1, &emb)?,
        apriori_second: check_apriori(&p1.disc, &run2, &emb)?,
        constants: SchemeConstants::compute(p1.sextet.norms(), ctx.cfg.nu, run1.horizon(), &emb)
            .map_err(|e| CliError::Validation(e.to_string()))?,
        continuous_dependence: dep,
    };
    write_json(&ctx.out.join("depcheck.json"), &record)?;
    let d = &record.continuous_dependence;
    println!("{}: lhs = {:.6e}, rhs = {:.6e}, pass = {}", d.name, d.lhs, d.rhs, d.pass);
    if d.pass {
        Ok(())
    } else {
        Err(CliError::Validation(format!("{} violated: lhs {:.6e} > rhs {:.6e}", d.name, d.lhs, d.rhs)))
    }
}

fn cmd_kwc_build(ctx: &Context, builder: Option<Builder>) -> Result<(), CliError> {
    let adjoint = builder.map(|b| b == Builder::Adjoint);
    let problem = Problem::build(&ctx.cfg, &ctx.base, adjoint)?;
    if adjoint.is_none() && !matches!(
        ctx.cfg.coefficients,
        config::CoefficientSource::KwcLinearized(_) | config::CoefficientSource::KwcAdjoint(_)
    ) {
        return Err(CliError::Config("kwc-build needs a kwc-linearized or kwc-adjoint source".into()));
    }
    for (name, field) in problem.sextet.fields() {
        let stem = if name == "A" { "amat" } else { name };
        let file = fs::File::create(ctx.out.join(format!("{stem}.txt")))?;
        io::write_text(field, std::io::BufWriter::new(file))?;
    }
    let mut csv = String::from("node,p0,z0\n");
    for (i, (p, z)) in problem.initial.0.iter().zip(&problem.initial.1).enumerate() {
        let _ = writeln!(csv, "{i},{p:.12e},{z:.12e}");
    }
    fs::write(ctx.out.join("initial.csv"), csv)?;
    let report = validate_sextet(&problem.sextet);
    write_json(&ctx.out.join("validation.json"), &report)?;
    if report.passed() {
        Ok(())
    } else {
        Err(CliError::Validation(failure_message(&report)))
    }
}

fn cmd_constants(ctx: &Context) -> Result<(), CliError> {
    let problem = ctx.problem()?;
    let emb = problem.embedding(&ctx.cfg, ctx.seed)?;
    let constants = SchemeConstants::compute(problem.sextet.norms(), ctx.cfg.nu, ctx.cfg.t_end, &emb)
        .map_err(|e| CliError::Validation(e.to_string()))?;
    write_json(&ctx.out.join("constants.json"), &constants)?;
    let text = serde_json::to_string_pretty(&constants).map_err(|e| CliError::Io(e.into()))?;
    println!("{text}");
    Ok(())
}

fn dispatch(cli: &Cli, ctx: &Context) -> Result<(), CliError> {
    match &cli.command {
        Command::Validate => cmd_validate(ctx),
        Command::Run => cmd_run(ctx),
        Command::Converge => cmd_converge(ctx),
        Command::Depcheck { other } => cmd_depcheck(ctx, other),
        Command::KwcBuild { builder } => cmd_kwc_build(ctx, *builder),
        Command::Constants => cmd_constants(ctx),
    }
}

fn context(cli: &Cli) -> Result<Context, CliError> {
    let path = cli.config.as_ref().ok_or_else(|| CliError::Config("--config is required".into()))?;
    let (cfg, base) = RunConfig::load(path)?;
    let out = cli.out.clone().or_else(|| cfg.out.as_ref().map(|o| base.join(o))).unwrap_or_else(|| "out".into());
    fs::create_dir_all(&out)?;
    Ok(Context { cfg, base, out, seed: cli.seed, override_guard: cli.override_tau_guard })
}

/// Parses `args`, runs the subcommand and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let start = Instant::now();
    let ctx = match context(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    let result = dispatch(&cli, &ctx);
    let code = result.as_ref().map_or_else(CliError::exit_code, |_| 0);
    if let Err(e) = &result {
        eprintln!("error: {e}");
    }
    let summary = Summary {
        command: cli.command.name(),
        name: &ctx.cfg.name,
        status: if code == 0 { "ok" } else { "failed" },
        exit_code: code,
        message: result.err().map(|e| e.to_string()),
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    if let Err(e) = write_json(&ctx.out.join("summary.json"), &summary) {
        eprintln!("error: cannot write summary: {e}");
        return code.max(1);
    }
    code
}
