//! The `rsg` command line.
//!
//! ```text
//! rsg solve|sweep|scenario|validate-metric --config <path>
//!     [--variant path|accel|torque] [--phase <t0>] [--strict] [--out <dir>] [--grid <n>]
//! ```
//!
//! Exit codes: 0 success, 1 output I/O failure, 2 configuration or usage
//! error, 3 unconverged solve under `--strict`.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::Config;
use crate::export::{
    solution_json, write_metric_grid, write_scenario, write_summary, write_trajectory, SummaryRow,
};
use crate::scenario::assemble_scenario;
use crate::solver::{solve_transition, sweep_transitions, Solution, Status, TransitionProblem, Variant};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_STRICT: i32 = 3;

const DEFAULT_OUT: &str = "out";

#[derive(Parser, Debug)]
#[command(name = "rsg", version, about = "Optimal gait transitions on shape-space metrics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Clone, PartialEq)]
pub enum Command {
    /// Solve one transition; writes solution.json and trajectory.csv.
    Solve(Common),
    /// Solve from equally spaced departure phases; writes summary.csv.
    Sweep(Common),
    /// Solve and assemble source → transition → target; writes scenario.csv.
    Scenario(Common),
    /// Sample the metric field on a grid; writes metric_grid.csv.
    ValidateMetric(Common),
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum VariantArg {
    Path,
    Accel,
    Torque,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Path => Variant::Path,
            VariantArg::Accel => Variant::Acceleration,
            VariantArg::Torque => Variant::Torque,
        }
    }
}

#[derive(Args, Debug, Clone, PartialEq)]
pub struct Common {
    /// JSON configuration file.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, value_enum)]
    pub variant: Option<VariantArg>,
    /// Departure phase on the source gait.
    #[arg(long)]
    pub phase: Option<f64>,
    /// Exit with code 3 unless every solve converged.
    #[arg(long)]
    pub strict: bool,
    /// Output directory; overrides the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Grid points per axis for validate-metric.
    #[arg(long)]
    pub grid: Option<usize>,
}

enum Failure {
    Config(String),
    Io(String),
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match execute(&cli.command) {
        Ok(code) => code,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            EXIT_CONFIG
        }
        Err(Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            EXIT_IO
        }
    }
}

struct Context {
    config: Config,
    variant: Variant,
    out: PathBuf,
}

fn context(args: &Common) -> Result<Context, Failure> {
    let config = Config::load(&args.config)
        .map_err(|e| Failure::Config(format!("{}: {e}", args.config.display())))?;
    let variant = args.variant.map(Variant::from).unwrap_or(config.variant);
    let out = args
        .out
        .clone()
        .or_else(|| config.output.dir.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    fs::create_dir_all(&out)?;
    Ok(Context {
        config,
        variant,
        out,
    })
}

fn problem(ctx: &Context, phase: Option<f64>) -> Result<TransitionProblem, Failure> {
    ctx.config
        .problem(Some(ctx.variant), phase)
        .map_err(|e| Failure::Config(e.to_string()))
}

fn write_solution(dir: &Path, problem: &TransitionProblem, solution: &Solution) -> Result<(), Failure> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("solution.json"), solution_json(problem, solution))?;
    write_trajectory(
        BufWriter::new(File::create(dir.join("trajectory.csv"))?),
        problem,
        solution,
    )?;
    Ok(())
}

fn report(solution: &Solution) {
    println!(
        "t0={:.6} status={} T={:.6} t_f={:.6} residual={:.3e} cost={:.6e}",
        solution.departure_phase,
        solution.status.as_str(),
        solution.decision.duration,
        solution.decision.arrival_phase,
        solution.residual,
        solution.cost,
    );
}

fn strict_code(strict: bool, all_converged: bool) -> i32 {
    if strict && !all_converged {
        EXIT_STRICT
    } else {
        EXIT_OK
    }
}

fn execute(command: &Command) -> Result<i32, Failure> {
    match command {
        Command::Solve(args) => {
            let ctx = context(args)?;
            let problem = problem(&ctx, args.phase)?;
            let solution = solve_transition(&problem).map_err(|e| Failure::Config(e.to_string()))?;
            write_solution(&ctx.out, &problem, &solution)?;
            report(&solution);
            Ok(strict_code(args.strict, solution.is_converged()))
        }
        Command::Sweep(args) => {
            let ctx = context(args)?;
            let template = problem(&ctx, args.phase)?;
            let connection = ctx
                .config
                .connection(ctx.variant)
                .map_err(|e| Failure::Config(e.to_string()))?;
            let solutions = sweep_transitions(&template, ctx.config.solver.phase_count)
                .map_err(|e| Failure::Config(e.to_string()))?;
            let mut rows = Vec::with_capacity(solutions.len());
            for (index, solution) in solutions.into_iter().enumerate() {
                let item = template.clone().with_departure_phase(solution.departure_phase);
                write_solution(&ctx.out.join(format!("phase_{index:02}")), &item, &solution)?;
                report(&solution);
                let net = assemble_scenario(
                    &item,
                    &solution,
                    connection.as_ref(),
                    ctx.config.output.samples_per_period,
                )
                .ok()
                .map(|s| s.net_displacement());
                rows.push(SummaryRow {
                    index,
                    solution,
                    net,
                });
            }
            write_summary(BufWriter::new(File::create(ctx.out.join("summary.csv"))?), &rows)?;
            let all = rows.iter().all(|r| r.solution.status == Status::Converged);
            Ok(strict_code(args.strict, all))
        }
        Command::Scenario(args) => {
            let ctx = context(args)?;
            let problem = problem(&ctx, args.phase)?;
            let connection = ctx
                .config
                .connection(ctx.variant)
                .map_err(|e| Failure::Config(e.to_string()))?;
            let solution = solve_transition(&problem).map_err(|e| Failure::Config(e.to_string()))?;
            write_solution(&ctx.out, &problem, &solution)?;
            report(&solution);
            match assemble_scenario(
                &problem,
                &solution,
                connection.as_ref(),
                ctx.config.output.samples_per_period,
            ) {
                Ok(scenario) => {
                    write_scenario(BufWriter::new(File::create(ctx.out.join("scenario.csv"))?), &scenario)?;
                    let net = scenario.net_displacement();
                    println!(
                        "net x={:.6} y={:.6} theta={:.6} cost={:.6e}",
                        net.x,
                        net.y,
                        net.theta,
                        scenario.total_cost()
                    );
                    Ok(EXIT_OK)
                }
                Err(e) => {
                    eprintln!("warning: no scenario written: {e}");
                    Ok(strict_code(args.strict, false))
                }
            }
        }
        Command::ValidateMetric(args) => {
            let ctx = context(args)?;
            let field = ctx
                .config
                .metric_field(ctx.variant)
                .map_err(|e| Failure::Config(e.to_string()))?;
            if field.dim() != 2 {
                return Err(Failure::Config("validate-metric needs a two-dimensional metric".into()));
            }
            let n = args.grid.unwrap_or(ctx.config.output.grid);
            if n == 0 {
                return Err(Failure::Config("--grid must be positive".into()));
            }
            let range = ctx.config.output.grid_range;
            write_metric_grid(
                BufWriter::new(File::create(ctx.out.join("metric_grid.csv"))?),
                field.as_ref(),
                n,
                range,
            )?;
            let min = crate::export::grid_points(n, range)
                .into_iter()
                .map(|(a, b)| {
                    let g = field.metric_matrix(&nalgebra::DVector::from_column_slice(&[a, b]));
                    nalgebra::SymmetricEigen::new(g).eigenvalues.min()
                })
                .fold(f64::INFINITY, f64::min);
            println!("grid={n}x{n} min_eigenvalue={min:.6e}");
            Ok(strict_code(args.strict, min > 0.0))
        }
    }
}
