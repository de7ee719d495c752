use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use permsaddle::harness::{
    export_matrices, run_single, run_spectral, run_sweep, ExampleSpec, Method, RunConfig,
    SolverKind, SweepSpec,
};
use permsaddle::io::write_text;
use permsaddle::precond::{InnerSolveMode, MassSolve, PreconditionerKind};
use permsaddle::Error;

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_NOT_CONVERGED: u8 = 3;

/// Preconditioned Krylov solvers for Neumann boundary control on the unit square.
#[derive(Debug, Parser)]
#[command(name = "permsaddle", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve one configuration and write its report and solution.
    Solve(SolveArgs),
    /// Tabulate iteration counts over meshes, betas and methods.
    Sweep(SweepArgs),
    /// Dense spectral checks of the preconditioned permuted system.
    Spectrum(SpectrumArgs),
    /// Write the system matrices in MatrixMarket format.
    Export(ExportArgs),
}

#[derive(Debug, Args)]
struct SolveArgs {
    /// 1, 2, constant or constant:<value>
    #[arg(long, default_value = "1")]
    example: ExampleSpec,
    /// Nodes per side of the square grid.
    #[arg(long, default_value_t = 33)]
    grid: usize,
    #[arg(long, default_value_t = 1e-2)]
    beta: f64,
    /// phat2, phatI, rees or pearson
    #[arg(long, default_value = "phat2")]
    precond: PreconditionerKind,
    /// gmres or minres; defaults to the solver matching the preconditioner.
    #[arg(long)]
    solver: Option<SolverKind>,
    /// exact or approx
    #[arg(long, default_value = "exact")]
    inner: InnerSolveMode,
    /// exact, chebyshev or lumped; overrides the preconditioner default.
    #[arg(long)]
    mass: Option<MassSolve>,
    #[arg(long, default_value_t = RunConfig::DEFAULT_TOL)]
    tol: f64,
    #[arg(long, default_value_t = RunConfig::DEFAULT_MAXIT)]
    maxit: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory for report.json, state.csv, control.csv and history.csv.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Exit with status 3 when the solver does not converge.
    #[arg(long)]
    strict: bool,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long, default_value = "1")]
    example: ExampleSpec,
    #[arg(long, value_delimiter = ',', default_value = "33,65")]
    grid: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "1e-2,1e-4,1e-6,1e-8")]
    beta: Vec<f64>,
    /// Methods as <precond>[/<inner>], e.g. phat2/exact,pearson/approx
    #[arg(long, value_delimiter = ',', default_value = "phat2/exact")]
    precond: Vec<Method>,
    #[arg(long, default_value_t = RunConfig::DEFAULT_TOL)]
    tol: f64,
    #[arg(long, default_value_t = RunConfig::DEFAULT_MAXIT)]
    maxit: usize,
    /// Directory for one CSV per beta.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SpectrumArgs {
    #[arg(long, value_delimiter = ',', default_value = "4,5,7")]
    grid: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "1e-2,1e-4,1e-6")]
    beta: Vec<f64>,
    /// Directory for spectral.json and one mu CSV per point.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ExportArgs {
    #[arg(long, default_value = "1")]
    example: ExampleSpec,
    #[arg(long, default_value_t = 5)]
    grid: usize,
    #[arg(long, default_value_t = 1e-2)]
    beta: f64,
    #[arg(long)]
    out: PathBuf,
}

enum Failure {
    Lib(Error),
    NotConverged,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Self::Lib(e)
    }
}

fn solve(args: SolveArgs) -> Result<(), Failure> {
    let config = RunConfig {
        solver: args
            .solver
            .unwrap_or(SolverKind::for_preconditioner(args.precond)),
        inner: args.inner,
        mass: args.mass,
        tol: args.tol,
        maxit: args.maxit,
        seed: args.seed,
        ..RunConfig::new(args.example, args.grid, args.beta, args.precond)
    };
    let outcome = run_single(&config)?;
    let r = &outcome.report;
    println!(
        "{}+{} N={} beta={:e} dof={}: {} after {} iterations, residual {:.3e}, {:.3} s (original KKT residual {:.3e})",
        config.solver,
        config.preconditioner,
        config.grid_side,
        config.beta,
        r.dof,
        if r.converged { "converged" } else { "NOT converged" },
        r.iterations,
        r.final_residual,
        r.wall_time_seconds,
        outcome.original_residual
    );
    if let Some(dir) = &args.out {
        outcome.write_to(dir)?;
        info!("wrote report and solution to {}", dir.display());
    }
    if args.strict && !r.converged {
        return Err(Failure::NotConverged);
    }
    Ok(())
}

fn sweep(args: SweepArgs) -> Result<(), Failure> {
    let spec = SweepSpec {
        example: args.example,
        grids: args.grid,
        betas: args.beta,
        methods: args.precond,
        tol: args.tol,
        maxit: args.maxit,
    };
    for table in run_sweep(&spec)? {
        let csv = table.to_csv();
        println!("# example {} beta {:e}\n{csv}", table.example, table.beta);
        if let Some(dir) = &args.out {
            write_text(
                &dir.join(format!(
                    "sweep_example{}_beta{:e}.csv",
                    table.example, table.beta
                )),
                &csv,
            )?;
        }
    }
    Ok(())
}

fn spectrum(args: SpectrumArgs) -> Result<(), Failure> {
    let sweep = run_spectral(&args.grid, &args.beta)?;
    println!("N,beta,n,m_B,mu_min,mu_max,multiplicity_one,algebraic_multiplicity_one,trace_gap,max_identity_residual");
    for r in &sweep.reports {
        println!(
            "{},{:e},{},{},{:.10e},{:.10e},{},{},{:.3e},{:.3e}",
            r.grid_side,
            r.beta,
            r.n,
            r.m_b,
            r.mu_min,
            r.mu_max,
            r.multiplicity_one,
            r.algebraic_multiplicity_one,
            r.trace_gap,
            r.identity_residuals.max()
        );
    }
    for s in &sweep.skipped {
        eprintln!("skipped N={} beta={:e}: {}", s.grid_side, s.beta, s.reason);
    }
    if let Some(fit) = &sweep.bound_fit {
        println!(
            "bound fit: c_lo={:.4e} d_hi={:.4e} inclusion={}",
            fit.c_lo, fit.d_hi, fit.inclusion_holds
        );
    }
    if let Some(dir) = &args.out {
        write_text(&dir.join("spectral.json"), &sweep.to_json()?)?;
        for r in &sweep.reports {
            write_text(
                &dir.join(format!("mu_N{}_beta{:e}.csv", r.grid_side, r.beta)),
                &r.mu_csv(),
            )?;
        }
    }
    Ok(())
}

fn export(args: ExportArgs) -> Result<(), Failure> {
    let config = RunConfig::new(
        args.example,
        args.grid,
        args.beta,
        PreconditionerKind::Phat2,
    );
    let manifest = export_matrices(&config, Path::new(&args.out))?;
    for f in &manifest.files {
        println!(
            "{} {}x{} {} entries -> {}",
            f.name,
            f.rows,
            f.cols,
            f.entries,
            args.out.join(&f.file).display()
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(a) => solve(a),
        Command::Sweep(a) => sweep(a),
        Command::Spectrum(a) => spectrum(a),
        Command::Export(a) => export(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::NotConverged) => {
            eprintln!("error: solver did not converge");
            ExitCode::from(EXIT_NOT_CONVERGED)
        }
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::InvalidArgument(_) => ExitCode::from(EXIT_CONFIG),
                _ => ExitCode::from(EXIT_FAILURE),
            }
        }
    }
}
