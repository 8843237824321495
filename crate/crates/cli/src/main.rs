//! Command-line driver: runs adaptive or uniform refinement experiments and
//! writes CSV tables, VTK fields and SVG convergence plots.
//!
//! Exit codes: 0 success, 2 configuration error, 3 solver failure,
//! 4 I/O error.

mod config;
mod output;
mod svg;

use clap::{Args, Parser, Subcommand};
use config::{PartialConfig, RunConfig};
use hdg_control::adaptivity::{AfemDriver, AfemRecord, AfemStep};
use hdg_control::Error as CoreError;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

#[derive(Parser)]
#[command(
    name = "hdg-control",
    version,
    about = "Adaptive HDG solver for Neumann boundary control problems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment to its dof budget.
    Run(RunArgs),
    /// Run two configurations of the same problem and overlay the results.
    Compare(CompareArgs),
}

#[derive(Args, Clone)]
struct RunArgs {
    /// Flat JSON configuration file; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Problem name: example1 | example2.
    #[arg(long)]
    problem: Option<String>,
    /// Polynomial degree, 1..=3.
    #[arg(long)]
    k: Option<usize>,
    /// Refinement mode: adaptive | uniform.
    #[arg(long)]
    mode: Option<String>,
    /// Bulk marking parameter in (0, 1].
    #[arg(long)]
    theta: Option<f64>,
    /// Trace dof budget.
    #[arg(long)]
    budget: Option<usize>,
    /// Fixed-point tolerance.
    #[arg(long = "fp-tol")]
    fp_tol: Option<f64>,
    /// Fixed-point iteration cap.
    #[arg(long = "fp-max")]
    fp_max: Option<usize>,
    /// Initial relaxation of the projection update, in (0, 1].
    #[arg(long)]
    rho: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: Option<String>,
    /// Comma-separated artifact list: csv,vtk,svg (csv is always written).
    #[arg(long, value_delimiter = ',')]
    emit: Option<Vec<String>>,
}

#[derive(Args)]
struct CompareArgs {
    /// Configuration of run A.
    #[arg(long = "config-a")]
    config_a: PathBuf,
    /// Configuration of run B.
    #[arg(long = "config-b")]
    config_b: PathBuf,
    /// Directory for the merged table and the overlay plot.
    #[arg(long, default_value = "compare")]
    out: String,
}

enum AppError {
    Config(String),
    Solver(String),
    Io(String),
}

impl AppError {
    fn code(&self) -> u8 {
        match self {
            AppError::Config(_) => 2,
            AppError::Solver(_) => 3,
            AppError::Io(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            AppError::Config(m) | AppError::Solver(m) | AppError::Io(m) => m,
        }
    }
}

fn classify(err: CoreError) -> AppError {
    match err {
        CoreError::AfemIteration { iteration, source } => match classify(*source) {
            AppError::Config(m) => AppError::Config(format!("afem iteration {iteration}: {m}")),
            AppError::Solver(m) => AppError::Solver(format!("afem iteration {iteration}: {m}")),
            AppError::Io(m) => AppError::Io(format!("afem iteration {iteration}: {m}")),
        },
        CoreError::Config(_)
        | CoreError::InvalidBounds { .. }
        | CoreError::UnsupportedDegree(_)
        | CoreError::InvalidStabilization(_)
        | CoreError::BudgetTooSmall { .. } => AppError::Config(err.to_string()),
        CoreError::Io(_) | CoreError::MeshParse { .. } => AppError::Io(err.to_string()),
        other => AppError::Solver(other.to_string()),
    }
}

fn io_err(context: &str, err: std::io::Error) -> AppError {
    AppError::Io(format!("{context}: {err}"))
}

fn load_partial(path: Option<&Path>) -> Result<PartialConfig, AppError> {
    match path {
        None => Ok(PartialConfig::default()),
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| io_err(&format!("reading {}", path.display()), e))?;
            serde_json::from_str(&text).map_err(|e| {
                AppError::Config(format!("config {}: {e}", path.display()))
            })
        }
    }
}

fn resolve_config(args: &RunArgs) -> Result<RunConfig, AppError> {
    let file = load_partial(args.config.as_deref())?;
    let overrides = PartialConfig {
        problem: args.problem.clone(),
        k: args.k,
        mode: args.mode.clone(),
        theta: args.theta,
        budget: args.budget,
        fp_tol: args.fp_tol,
        fp_max: args.fp_max,
        rho: args.rho,
        out: args.out.clone(),
        emit: args.emit.clone(),
    };
    RunConfig::from_partial(file.merged_with(overrides)).map_err(AppError::Config)
}

/// Drives one AFEM run, streaming CSV rows as iterations finish so a solver
/// failure still leaves a partial table behind.
fn execute_run(config: &RunConfig) -> Result<(Vec<AfemRecord>, AfemStep), AppError> {
    fs::create_dir_all(&config.out)
        .map_err(|e| io_err(&format!("creating {}", config.out.display()), e))?;
    let csv_path = config.out.join("records.csv");
    let mut csv = fs::File::create(&csv_path)
        .map_err(|e| io_err(&format!("creating {}", csv_path.display()), e))?;
    writeln!(csv, "{}", output::CSV_HEADER).map_err(|e| io_err("writing csv", e))?;

    let problem = Arc::new(config.problem_spec());
    let mut driver =
        AfemDriver::new(problem, config.afem_config()).map_err(classify)?;
    let mut records = Vec::new();
    let mut last_step: Option<AfemStep> = None;
    loop {
        match driver.step() {
            Ok(Some(step)) => {
                writeln!(csv, "{}", output::csv_row(&step.record))
                    .map_err(|e| io_err("writing csv", e))?;
                csv.flush().map_err(|e| io_err("writing csv", e))?;
                eprintln!(
                    "iter {:2}: {} elements, {} dofs, eta {:.4e}{}",
                    step.record.iteration,
                    step.record.n_elements,
                    step.record.n_trace_dofs,
                    step.record.eta,
                    step.record
                        .error
                        .map(|e| format!(", E {e:.4e}"))
                        .unwrap_or_default()
                );
                records.push(step.record.clone());
                last_step = Some(step);
            }
            Ok(None) => break,
            Err(err) => {
                let _ = csv.flush();
                return Err(classify(err));
            }
        }
    }
    let step = last_step.expect("at least one afem iteration");
    Ok((records, step))
}

fn emit_artifacts(
    config: &RunConfig,
    records: &[AfemRecord],
    step: &AfemStep,
) -> Result<(), AppError> {
    if config.emit_vtk {
        let path = config.out.join("solution.vtk");
        output::write_solution_vtk(step, &path)
            .map_err(|e| io_err(&format!("writing {}", path.display()), e))?;
    }
    if config.emit_svg {
        let title = format!(
            "{} k={} {}",
            config.problem,
            config.k,
            match config.mode {
                hdg_control::adaptivity::RefineMode::Adaptive => "adaptive",
                hdg_control::adaptivity::RefineMode::Uniform => "uniform",
            }
        );
        let svg = output::convergence_svg(records, config.k, &title);
        let path = config.out.join("convergence.svg");
        fs::write(&path, svg)
            .map_err(|e| io_err(&format!("writing {}", path.display()), e))?;
    }
    Ok(())
}

fn cmd_run(args: &RunArgs) -> Result<(), AppError> {
    let config = resolve_config(args)?;
    let (records, step) = execute_run(&config)?;
    emit_artifacts(&config, &records, &step)?;
    let last = records.last().expect("nonempty records");
    println!(
        "{}: {} iterations, final {} elements / {} dofs, eta {:.6e}{}",
        config.problem,
        records.len(),
        last.n_elements,
        last.n_trace_dofs,
        last.eta,
        last.error
            .map(|e| format!(", E {e:.6e}"))
            .unwrap_or_default()
    );
    Ok(())
}

fn cmd_compare(args: &CompareArgs) -> Result<(), AppError> {
    let partial_a = load_partial(Some(&args.config_a))?;
    let partial_b = load_partial(Some(&args.config_b))?;
    let config_a = RunConfig::from_partial(partial_a).map_err(AppError::Config)?;
    let config_b = RunConfig::from_partial(partial_b).map_err(AppError::Config)?;
    if config_a.problem != config_b.problem {
        return Err(AppError::Config(format!(
            "problem: configurations disagree ({} vs {})",
            config_a.problem, config_b.problem
        )));
    }
    let (records_a, step_a) = execute_run(&config_a)?;
    emit_artifacts(&config_a, &records_a, &step_a)?;
    let (records_b, step_b) = execute_run(&config_b)?;
    emit_artifacts(&config_b, &records_b, &step_b)?;

    let out = PathBuf::from(&args.out);
    fs::create_dir_all(&out).map_err(|e| io_err(&format!("creating {}", out.display()), e))?;
    let table = output::merged_csv(&records_a, &records_b);
    fs::write(out.join("compare.csv"), table).map_err(|e| io_err("writing compare.csv", e))?;
    let label_a = format!("A: k={} theta={} {:?}", config_a.k, config_a.theta, config_a.mode);
    let label_b = format!("B: k={} theta={} {:?}", config_b.k, config_b.theta, config_b.mode);
    let svg = output::overlay_svg(&records_a, &records_b, &label_a, &label_b);
    fs::write(out.join("overlay.svg"), svg).map_err(|e| io_err("writing overlay.svg", e))?;
    println!(
        "compared {} runs: {} and {} iterations, outputs in {}",
        config_a.problem,
        records_a.len(),
        records_b.len(),
        out.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Compare(args) => cmd_compare(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", err.message());
            ExitCode::from(err.code())
        }
    }
}
