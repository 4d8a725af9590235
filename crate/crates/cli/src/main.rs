//! `margmod`: compile, check, fit and simulate marginal log-linear models.

mod model;
mod report;
mod table_io;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use margmod::estimation::{fit, FitOptions};
use margmod::gee::{GeeOptions, GeeProblem};
use margmod::sampling::sample_table;
use margmod::{Algorithm, MarginalSequence, MllError, Parameterization, Table};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use crate::model::{compile, effect_of, read_model, ModelFile, VarSet};

pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        CliError { code: 1, message: message.into() }
    }
}

impl From<MllError> for CliError {
    fn from(e: MllError) -> Self {
        let code = match e {
            MllError::Compile(_) => 3,
            MllError::Numerical(_) => 2,
            _ => 1,
        };
        let message = match &e {
            MllError::Compile(m) => format!("no admissible ordering of marginals: {m}"),
            other => other.to_string(),
        };
        CliError { code, message }
    }
}

#[derive(Parser)]
#[command(name = "margmod", version, about = "Marginal log-linear models for contingency tables")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model to a table and report estimates and goodness of fit.
    Fit(FitArgs),
    /// Compile a model file into its marginal sequence and zero constraints.
    Compile(CompileArgs),
    /// Report ordered decomposability and smoothness of a marginal sequence.
    Check(CheckArgs),
    /// Draw a multinomial table from a table, a fitted model, or the uniform table.
    Simulate(SimulateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgorithmArg {
    Lagrangian,
    Scoring,
    Gee,
}

#[derive(Args)]
struct Output {
    /// Output file (written atomically); standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct Tuning {
    #[arg(long, value_enum, default_value = "lagrangian")]
    algorithm: AlgorithmArg,
    /// Replacement for observed zero cells.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Convergence tolerance.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    table: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    tuning: Tuning,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct CompileArgs {
    #[arg(long)]
    model: PathBuf,
    /// Table supplying variables and levels; otherwise the model's levels block.
    #[arg(long)]
    table: Option<PathBuf>,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long, required_unless_present = "marginals")]
    model: Option<PathBuf>,
    /// Comma-separated marginals, e.g. "AB,AC,ABC".
    #[arg(long)]
    marginals: Option<String>,
    #[arg(long)]
    table: Option<PathBuf>,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, required_unless_present = "table")]
    model: Option<PathBuf>,
    #[arg(long)]
    table: Option<PathBuf>,
    /// Sample size.
    #[arg(long)]
    n: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    tuning: Tuning,
    #[command(flatten)]
    output: Output,
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<(), CliError> {
    match out {
        None => {
            let mut so = std::io::stdout().lock();
            so.write_all(text.as_bytes()).and_then(|_| so.flush()).map_err(|e| CliError::input(e.to_string()))
        }
        Some(path) => {
            let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
            let mut tmp = tempfile::NamedTempFile::new_in(dir)
                .map_err(|e| CliError::input(format!("cannot write to {}: {e}", dir.display())))?;
            tmp.write_all(text.as_bytes()).map_err(|e| CliError::input(e.to_string()))?;
            tmp.persist(path).map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display())))?;
            Ok(())
        }
    }
}

fn emit_json(out: &Option<PathBuf>, v: &Value) -> Result<(), CliError> {
    let mut s = serde_json::to_string_pretty(v).expect("serializable report");
    s.push('\n');
    emit(out, &s)
}

fn load(model: &Path, table: &Path) -> Result<(ModelFile, Table), CliError> {
    let m = read_model(model)?;
    let t = table_io::read_table(table, &m.pinned_levels()?)?;
    Ok((m, t))
}

fn fit_options(t: &Tuning) -> FitOptions {
    let algorithm = match t.algorithm {
        AlgorithmArg::Scoring => Algorithm::Scoring,
        _ => Algorithm::Lagrangian,
    };
    let mut o = FitOptions { algorithm, ..Default::default() };
    if let Some(e) = t.epsilon {
        o.zero_cell_epsilon = e;
    }
    if let Some(tol) = t.tol {
        o.tol_score = tol;
        o.tol_constraint = tol;
    }
    if let Some(k) = t.max_iter {
        o.max_iter = k;
    }
    o
}

fn gee_options(t: &Tuning) -> GeeOptions {
    let mut o = GeeOptions::default();
    if let Some(e) = t.epsilon {
        o.zero_cell_epsilon = e;
    }
    if let Some(tol) = t.tol {
        o.tol = tol;
    }
    if let Some(k) = t.max_iter {
        o.max_iter = k;
    }
    o
}

fn cmd_fit(a: &FitArgs) -> Result<(), CliError> {
    let (m, n) = load(&a.model, &a.table)?;
    let compiled = compile(&m, n.scheme())?;
    let spec = &compiled.spec;
    let (doc, converged) = match a.tuning.algorithm {
        AlgorithmArg::Gee => {
            let problem = GeeProblem::new(spec)?;
            let f = problem.fit(&problem.data_from_table(&n)?, &gee_options(&a.tuning))?;
            let observed: Vec<Vec<f64>> = problem
                .marginals()
                .iter()
                .map(|&e| n.marginalize(e).map(Table::into_cells))
                .collect::<Result<_, _>>()?;
            (report::gee_fit(spec, &problem, &f, &observed), f.converged)
        }
        _ => {
            let f = fit(&n, spec, &fit_options(&a.tuning))?;
            (report::ml_fit(spec, &n, &f), f.converged)
        }
    };
    emit_json(&a.output.out, &doc)?;
    if converged {
        Ok(())
    } else {
        Err(CliError { code: 2, message: "the fit did not converge".into() })
    }
}

fn cmd_compile(a: &CompileArgs) -> Result<(), CliError> {
    let m = read_model(&a.model)?;
    let scheme = match &a.table {
        Some(t) => table_io::read_table(t, &m.pinned_levels()?)?.scheme().clone(),
        None => m.standalone_scheme()?,
    };
    let c = compile(&m, &scheme)?;
    emit_json(&a.output.out, &report::compiled(&c))
}

fn cmd_check(a: &CheckArgs) -> Result<(), CliError> {
    let mut m = match &a.model {
        Some(p) => read_model(p)?,
        None => ModelFile::default(),
    };
    if let Some(list) = &a.marginals {
        m.marginals = Some(list.split(',').map(|s| VarSet::Text(s.trim().to_string())).collect());
    }
    let scheme = match &a.table {
        Some(t) => table_io::read_table(t, &m.pinned_levels()?)?.scheme().clone(),
        None => m.standalone_scheme()?,
    };
    let param = match &m.marginals {
        Some(ms) => {
            let seq: Vec<_> = ms.iter().map(|x| effect_of(&scheme, x)).collect::<Result<_, _>>()?;
            let coding = m.coding.as_deref().and_then(margmod::CodingKind::parse).unwrap_or(margmod::CodingKind::Local);
            Parameterization::build(&scheme, &MarginalSequence::new(&scheme, seq)?, coding)?
        }
        None => compile(&m, &scheme)?.spec.param,
    };
    emit_json(&a.output.out, &report::check(&param))
}

fn cmd_simulate(a: &SimulateArgs) -> Result<(), CliError> {
    let model = a.model.as_deref().map(read_model).transpose()?;
    let pinned = match &model {
        Some(m) => m.pinned_levels()?,
        None => Vec::new(),
    };
    let table = a.table.as_deref().map(|t| table_io::read_table(t, &pinned)).transpose()?;
    let source = match (&model, table) {
        (Some(m), Some(t)) => {
            let c = compile(m, t.scheme())?;
            let f = fit(&t, &c.spec, &fit_options(&a.tuning))?;
            if !f.converged {
                return Err(CliError { code: 2, message: "the fit did not converge".into() });
            }
            f.m_hat
        }
        (None, Some(t)) => t,
        (Some(m), None) => {
            let s = m.standalone_scheme()?;
            compile(m, &s)?;
            Table::uniform(s)
        }
        (None, None) => unreachable!("clap requires a model or a table"),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let drawn = sample_table(&source, a.n, &mut rng)?;
    emit(&a.output.out, &table_io::write_table(&drawn))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let r = match &cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Compile(a) => cmd_compile(a),
        Command::Check(a) => cmd_check(a),
        Command::Simulate(a) => cmd_simulate(a),
    };
    match r {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("margmod: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
