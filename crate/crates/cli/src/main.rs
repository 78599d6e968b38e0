use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use glt_saddle::io::{write_matrix_market, write_vector_market};
use glt_saddle::precond::{target_system, Variant};
use glt_saddle_cli::experiments::{self, Inner, Problem, ProblemSpec, SolveConfig, Solver};
use glt_saddle_cli::table::{write_record, write_rows, Format};
use glt_saddle_cli::List;

#[derive(Parser)]
#[command(name = "glt-saddle", version, about = "Spectral and solver experiments for optimal control saddle-point systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Output {
    /// Output file (stdout if omitted)
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

impl Output {
    fn writer(&self) -> anyhow::Result<Box<dyn Write>> {
        Ok(match &self.out {
            Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
            None => Box::new(BufWriter::new(io::stdout().lock())),
        })
    }
}

#[derive(Args)]
struct Constraint {
    #[arg(long, value_enum, default_value = "poisson")]
    problem: Problem,
    /// Advection velocity `c1,c2`
    #[arg(long, default_value = "2,3")]
    c: List<f64>,
    /// Reaction coefficient
    #[arg(long, default_value_t = 1.0)]
    r: f64,
}

impl Constraint {
    fn spec(&self) -> anyhow::Result<ProblemSpec> {
        let [c1, c2] = self.c.0[..] else { bail!("--c needs two components") };
        Ok(ProblemSpec { problem: self.problem, c: (c1, c2), r: self.r })
    }
}

#[derive(Subcommand)]
enum Command {
    /// Extremes of the three eigenvalue functions on a grid
    Bounds {
        #[arg(long, default_value_t = 1e-4)]
        alpha: f64,
        #[arg(long, default_value_t = 3000)]
        grid: usize,
        #[command(flatten)]
        output: Output,
    },
    /// Eigenvalues of B_N per symbol interval, one row per n
    Count {
        #[arg(long, default_value = "10,20,40,80")]
        n: List<usize>,
        #[arg(long, default_value_t = 1e-4)]
        alpha: f64,
        #[arg(long, default_value_t = 3000)]
        grid: usize,
        #[command(flatten)]
        output: Output,
    },
    /// Matching of each block of sorted eigenvalues of B_N to symbol samples
    Match {
        #[arg(long, default_value_t = 40)]
        n: usize,
        #[arg(long, default_value_t = 1e-4)]
        alpha: f64,
        #[command(flatten)]
        output: Output,
    },
    /// Sorted samples of the eigenvalue functions
    Sample {
        #[arg(long, default_value_t = 1e-4)]
        alpha: f64,
        #[arg(long, default_value_t = 40)]
        grid: usize,
        #[command(flatten)]
        output: Output,
    },
    /// Spectrum of B_N with the symbol interval of each eigenvalue
    Spectrum {
        #[arg(long, default_value_t = 40)]
        n: usize,
        #[arg(long, default_value_t = 1e-4)]
        alpha: f64,
        #[arg(long, default_value_t = 3000)]
        grid: usize,
        #[command(flatten)]
        output: Output,
    },
    /// Iteration counts and timings of the preconditioned solvers
    Solve {
        #[command(flatten)]
        constraint: Constraint,
        /// Interior nodes per direction (N = 3 n^2)
        #[arg(long, default_value = "7,15,31,63")]
        n: List<usize>,
        #[arg(long, default_value = "1e-3,1e-6,1e-9")]
        alpha: List<f64>,
        /// Preconditioners: none, pn, pbct, pd, ptilde
        #[arg(long, default_value = "none,pn,pbct")]
        prec: List<Variant>,
        #[arg(long, value_enum, default_value = "gmres")]
        solver: Solver,
        #[arg(long, value_enum, default_value = "direct")]
        inner: Inner,
        #[arg(long, default_value_t = 1e-8)]
        inner_tol: f64,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long, default_value_t = 100)]
        maxit: usize,
        #[command(flatten)]
        output: Output,
    },
    /// Dense spectrum of the preconditioned matrix against the pencil prediction
    Precheck {
        #[command(flatten)]
        constraint: Constraint,
        #[arg(long, default_value_t = 4)]
        n: usize,
        #[arg(long, default_value_t = 1e-2)]
        alpha: f64,
        #[arg(long, default_value = "pn")]
        prec: Variant,
        #[command(flatten)]
        output: Output,
    },
    /// Writes the system solved for a preconditioner as MatrixMarket files
    Export {
        #[command(flatten)]
        constraint: Constraint,
        #[arg(long, default_value_t = 7)]
        n: usize,
        #[arg(long, default_value_t = 1e-3)]
        alpha: f64,
        /// `pd` exports the unscaled system
        #[arg(long, default_value = "pn")]
        prec: Variant,
        /// Directory receiving A.mtx and b.mtx
        #[arg(long, default_value = ".")]
        dir: PathBuf,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Bounds { alpha, grid, output } => {
            let row = experiments::bounds(alpha, grid)?;
            write_record(&row, output.format.unwrap_or(Format::Json), output.writer()?)
        }
        Command::Count { n, alpha, grid, output } => {
            let rows = experiments::count(&n.0, alpha, grid)?;
            write_rows(&rows, output.format.unwrap_or(Format::Csv), output.writer()?)
        }
        Command::Match { n, alpha, output } => {
            let rows = experiments::match_blocks(n, alpha)?;
            write_rows(&rows, output.format.unwrap_or(Format::Csv), output.writer()?)
        }
        Command::Sample { alpha, grid, output } => {
            let rows = experiments::sample(alpha, grid)?;
            write_rows(&rows, output.format.unwrap_or(Format::Csv), output.writer()?)
        }
        Command::Spectrum { n, alpha, grid, output } => {
            let rows = experiments::spectrum(n, alpha, grid)?;
            write_rows(&rows, output.format.unwrap_or(Format::Csv), output.writer()?)
        }
        Command::Solve { constraint, n, alpha, prec, solver, inner, inner_tol, tol, maxit, output } => {
            let cfg = SolveConfig {
                problem: constraint.spec()?,
                ns: n.0,
                alphas: alpha.0,
                preconditioners: prec.0,
                solver,
                inner,
                inner_tol,
                tol,
                maxit,
            };
            let rows = experiments::solve(&cfg)?;
            write_rows(&rows, output.format.unwrap_or(Format::Csv), output.writer()?)
        }
        Command::Precheck { constraint, n, alpha, prec, output } => {
            let row = experiments::precheck(constraint.spec()?, n, alpha, prec)?;
            write_record(&row, output.format.unwrap_or(Format::Json), output.writer()?)
        }
        Command::Export { constraint, n, alpha, prec, dir } => {
            let sys = constraint.spec()?.build(n, alpha)?;
            let (a, b) = target_system(&sys, prec);
            std::fs::create_dir_all(&dir)?;
            write_matrix_market(&a, BufWriter::new(File::create(dir.join("A.mtx"))?))?;
            write_vector_market(&b, BufWriter::new(File::create(dir.join("b.mtx"))?))?;
            Ok(())
        }
    }
}

fn main() -> std::process::ExitCode {
    match run(Cli::parse()) {
        Ok(()) => std::process::ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::ExitCode::FAILURE
        }
    }
}
