//! The experiment pipelines behind each subcommand, returning plain rows.

use std::time::Instant;

use anyhow::{bail, Context};
use glt_saddle::krylov::{fgmres, gmres, SolverSettings};
use glt_saddle::precond::{target_system, InnerMode, SaddlePreconditioner, Variant};
use glt_saddle::saddle::{ConstraintKind, TargetLoad, TestProblem};
use glt_saddle::spectra::{
    full_spectrum, grid_angle, interval_bounds, match_eigenvalues, preconditioned_spectrum_check, sample_symbol,
    spectral_report, IntervalBounds, DENSE_LIMIT, INTERVAL_CLOSEDNESS,
};
use glt_saddle::Saddle;
use serde::Serialize;

use crate::table::Table;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Problem {
    Poisson,
    Advection,
}

impl Problem {
    pub fn test_problem(self) -> TestProblem {
        match self {
            Problem::Poisson => TestProblem::Poisson,
            Problem::Advection => TestProblem::Advection,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Solver {
    Gmres,
    Fgmres,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Inner {
    Direct,
    Iterative,
}

/// Problem data plus the constraint coefficients (ignored for Poisson).
#[derive(Debug, Clone, Copy)]
pub struct ProblemSpec {
    pub problem: Problem,
    pub c: (f64, f64),
    pub r: f64,
}

impl ProblemSpec {
    pub fn new(problem: Problem) -> Self {
        Self { problem, c: (2.0, 3.0), r: 1.0 }
    }

    pub fn build(&self, n: usize, alpha: f64) -> anyhow::Result<Saddle> {
        let kind = match self.problem {
            Problem::Poisson => ConstraintKind::Poisson,
            Problem::Advection => ConstraintKind::Advection { c: self.c, r: self.r },
        };
        let sys = self.problem.test_problem().build_with(n, alpha, kind, TargetLoad::Projected)?;
        Ok(sys)
    }
}

fn check_alpha(alpha: f64) -> anyhow::Result<()> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        bail!("alpha must be positive, got {alpha}");
    }
    Ok(())
}

fn check_n(n: usize) -> anyhow::Result<()> {
    if n == 0 {
        bail!("n must be at least 1");
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundsRow {
    pub alpha: f64,
    pub grid: usize,
    pub m1: f64,
    #[serde(rename = "M1")]
    pub big_m1: f64,
    pub m2: f64,
    #[serde(rename = "M2")]
    pub big_m2: f64,
    pub m3: f64,
    #[serde(rename = "M3")]
    pub big_m3: f64,
}

impl Table for BoundsRow {
    const HEADER: &'static [&'static str] = &["alpha", "grid", "m1", "M1", "m2", "M2", "m3", "M3"];
}

impl BoundsRow {
    pub fn bounds(&self) -> IntervalBounds<f64> {
        IntervalBounds {
            m1: self.m1,
            big_m1: self.big_m1,
            m2: self.m2,
            big_m2: self.big_m2,
            m3: self.m3,
            big_m3: self.big_m3,
        }
    }
}

pub fn bounds(alpha: f64, grid: usize) -> anyhow::Result<BoundsRow> {
    check_alpha(alpha)?;
    let b = interval_bounds(alpha, grid)?;
    Ok(BoundsRow { alpha, grid, m1: b.m1, big_m1: b.big_m1, m2: b.m2, big_m2: b.big_m2, m3: b.m3, big_m3: b.big_m3 })
}

#[derive(Debug, Clone, Serialize)]
pub struct CountRow {
    pub n: usize,
    pub in_count: usize,
    pub n2: usize,
    pub out_count: usize,
    /// `out_count / (3 n^2)`
    pub ratio: f64,
    /// `out_count / sqrt(3 n^2)`
    pub ratio_sqrt: f64,
    pub count1: usize,
    pub count3: usize,
}

impl Table for CountRow {
    const HEADER: &'static [&'static str] =
        &["n", "in_count", "n2", "out_count", "ratio", "ratio_sqrt", "count1", "count3"];
}

/// Interval counts of `B_N` for each `n`, against bounds sampled on a `grid x grid` mesh.
pub fn count(ns: &[usize], alpha: f64, grid: usize) -> anyhow::Result<Vec<CountRow>> {
    check_alpha(alpha)?;
    if ns.is_empty() {
        return Ok(Vec::new());
    }
    let b = interval_bounds(alpha, grid)?;
    ns.iter()
        .map(|&n| {
            check_n(n)?;
            let sys = ProblemSpec::new(Problem::Poisson).build(n, alpha)?;
            let r = spectral_report(&sys, b).with_context(|| format!("counting eigenvalues at n={n}"))?;
            Ok(CountRow {
                n,
                in_count: r.counts[1],
                n2: n * n,
                out_count: r.outliers,
                ratio: r.ratio,
                ratio_sqrt: r.ratio_sqrt,
                count1: r.counts[0],
                count3: r.counts[2],
            })
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct MatchRow {
    pub block: usize,
    pub j: usize,
    pub k: usize,
    pub theta1: f64,
    pub theta2: f64,
    pub sample: f64,
    pub eigenvalue: f64,
    pub abs_error: f64,
}

impl Table for MatchRow {
    const HEADER: &'static [&'static str] =
        &["block", "j", "k", "theta1", "theta2", "sample", "eigenvalue", "abs_error"];
}

/// Matches each block of `n^2` sorted eigenvalues of `B_N` to the samples of the
/// corresponding eigenvalue function on the `n x n` grid `(j pi/n, k pi/n)`.
pub fn match_blocks(n: usize, alpha: f64) -> anyhow::Result<Vec<MatchRow>> {
    check_alpha(alpha)?;
    if n < 2 {
        bail!("matching needs n >= 2");
    }
    let sys = ProblemSpec::new(Problem::Poisson).build(n, alpha)?;
    let spectrum = full_spectrum(&sys.permute_to_block_toeplitz()?, DENSE_LIMIT)?;
    let samples = sample_symbol(alpha, n)?;
    let n2 = n * n;
    let mut rows = Vec::with_capacity(3 * n2);
    for t in 0..3 {
        let block = &spectrum[t * n2..(t + 1) * n2];
        for p in match_eigenvalues(block, &samples.labelled(t))? {
            rows.push(MatchRow {
                block: t + 1,
                j: p.j,
                k: p.k,
                theta1: grid_angle(p.j, n),
                theta2: grid_angle(p.k, n),
                sample: p.sample,
                eigenvalue: p.eigenvalue,
                abs_error: p.error,
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Serialize)]
pub struct SampleRow {
    pub index: usize,
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
}

impl Table for SampleRow {
    const HEADER: &'static [&'static str] = &["index", "p1", "p2", "p3"];
}

/// Sorted samples of the three eigenvalue functions on the `grid x grid` mesh.
pub fn sample(alpha: f64, grid: usize) -> anyhow::Result<Vec<SampleRow>> {
    check_alpha(alpha)?;
    let s = sample_symbol(alpha, grid)?;
    let (p1, p2, p3) = (s.sorted(0), s.sorted(1), s.sorted(2));
    Ok((0..p1.len()).map(|i| SampleRow { index: i, p1: p1[i], p2: p2[i], p3: p3[i] }).collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumRow {
    pub index: usize,
    pub eigenvalue: f64,
    /// 1, 2 or 3 for the symbol interval containing the eigenvalue, 0 for an outlier.
    pub interval: usize,
}

impl Table for SpectrumRow {
    const HEADER: &'static [&'static str] = &["index", "eigenvalue", "interval"];
}

/// Sorted spectrum of `B_N` with the symbol interval of each eigenvalue.
pub fn spectrum(n: usize, alpha: f64, grid: usize) -> anyhow::Result<Vec<SpectrumRow>> {
    check_alpha(alpha)?;
    check_n(n)?;
    let b = interval_bounds(alpha, grid)?;
    let sys = ProblemSpec::new(Problem::Poisson).build(n, alpha)?;
    let e = full_spectrum(&sys.permute_to_block_toeplitz()?, DENSE_LIMIT)?;
    Ok(e.iter()
        .enumerate()
        .map(|(index, &x)| {
            let interval = b
                .pairs()
                .iter()
                .zip(INTERVAL_CLOSEDNESS)
                .position(|(&(lo, hi), c)| c.contains(lo, hi, x))
                .map_or(0, |l| l + 1);
            SpectrumRow { index, eigenvalue: x, interval }
        })
        .collect())
}

#[derive(Debug, Clone)]
pub struct SolveConfig {
    pub problem: ProblemSpec,
    pub ns: Vec<usize>,
    pub alphas: Vec<f64>,
    pub preconditioners: Vec<Variant>,
    pub solver: Solver,
    pub inner: Inner,
    pub inner_tol: f64,
    pub tol: f64,
    pub maxit: usize,
}

impl SolveConfig {
    pub fn new(problem: Problem) -> Self {
        Self {
            problem: ProblemSpec::new(problem),
            ns: Vec::new(),
            alphas: Vec::new(),
            preconditioners: vec![Variant::Pn],
            solver: Solver::Gmres,
            inner: Inner::Direct,
            inner_tol: 1e-8,
            tol: 1e-6,
            maxit: 100,
        }
    }

    fn inner_mode(&self) -> InnerMode<f64> {
        match self.inner {
            Inner::Direct => InnerMode::Direct,
            Inner::Iterative => InnerMode::iterative(self.inner_tol),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveRow {
    pub problem: String,
    pub alpha: f64,
    #[serde(rename = "N")]
    pub order: usize,
    pub n: usize,
    pub solver: String,
    pub preconditioner: String,
    pub inner: String,
    /// `-1` when the solver did not reach the tolerance.
    pub iterations: i64,
    pub converged: bool,
    pub residual: f64,
    pub time: f64,
    /// `converged`, `maxit`, or the failure message.
    pub status: String,
}

impl Table for SolveRow {
    const HEADER: &'static [&'static str] = &[
        "problem",
        "alpha",
        "N",
        "n",
        "solver",
        "preconditioner",
        "inner",
        "iterations",
        "converged",
        "residual",
        "time",
        "status",
    ];
}

/// Runs one `(alpha, n, preconditioner)` cell. Solver failures become rows with `iterations = -1`.
pub fn solve_case(cfg: &SolveConfig, n: usize, alpha: f64, variant: Variant) -> anyhow::Result<SolveRow> {
    check_alpha(alpha)?;
    check_n(n)?;
    if !(cfg.tol > 0.0) || cfg.maxit == 0 {
        bail!("tolerance and maxit must be positive");
    }
    let sys = cfg.problem.build(n, alpha)?;
    let (a, b) = target_system(&sys, variant);
    let settings = SolverSettings::new(cfg.tol, cfg.maxit);
    let start = Instant::now();
    let outcome = SaddlePreconditioner::new(&sys, variant, cfg.inner_mode()).and_then(|p| match cfg.solver {
        Solver::Gmres => gmres(&a, &b, &p, settings),
        Solver::Fgmres => fgmres(&a, &b, &p, settings),
    });
    let time = start.elapsed().as_secs_f64();
    let (iterations, converged, residual, status) = match outcome {
        Ok(r) if r.converged => (r.iterations as i64, true, r.residual, "converged".to_string()),
        Ok(r) => (-1, false, r.residual, "maxit".to_string()),
        Err(e) => (-1, false, f64::NAN, e.to_string()),
    };
    let name = |p: Problem| format!("{p:?}").to_lowercase();
    Ok(SolveRow {
        problem: name(cfg.problem.problem),
        alpha,
        order: sys.order(),
        n,
        solver: format!("{:?}", cfg.solver).to_lowercase(),
        preconditioner: variant.name().to_string(),
        inner: format!("{:?}", cfg.inner).to_lowercase(),
        iterations,
        converged,
        residual,
        time,
        status,
    })
}

/// All cells, ordered by `alpha`, then `n`, then preconditioner.
pub fn solve(cfg: &SolveConfig) -> anyhow::Result<Vec<SolveRow>> {
    let mut rows = Vec::new();
    for &alpha in &cfg.alphas {
        for &n in &cfg.ns {
            for &v in &cfg.preconditioners {
                rows.push(solve_case(cfg, n, alpha, v)?);
            }
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Serialize)]
pub struct PrecheckRow {
    pub problem: String,
    pub n: usize,
    pub alpha: f64,
    pub preconditioner: String,
    pub order: usize,
    pub unit_count: usize,
    /// `2 n^2`
    pub expected_unit: usize,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub max_imag: f64,
    /// Largest predicted non-unit eigenvalue (NaN for the identity).
    pub predicted_max: f64,
    /// Largest relative deviation from the prediction (NaN for the identity).
    pub mismatch: f64,
}

impl Table for PrecheckRow {
    const HEADER: &'static [&'static str] = &[
        "problem",
        "n",
        "alpha",
        "preconditioner",
        "order",
        "unit_count",
        "expected_unit",
        "lambda_min",
        "lambda_max",
        "max_imag",
        "predicted_max",
        "mismatch",
    ];
}

/// Dense spectrum of the preconditioned matrix against the pencil prediction.
pub fn precheck(problem: ProblemSpec, n: usize, alpha: f64, variant: Variant) -> anyhow::Result<PrecheckRow> {
    check_alpha(alpha)?;
    check_n(n)?;
    let sys = problem.build(n, alpha)?;
    let r = preconditioned_spectrum_check(&sys, variant, DENSE_LIMIT)?;
    Ok(PrecheckRow {
        problem: format!("{:?}", problem.problem).to_lowercase(),
        n,
        alpha,
        preconditioner: variant.name().to_string(),
        order: r.order,
        unit_count: r.unit_count,
        expected_unit: 2 * n * n,
        lambda_min: r.lambda_min,
        lambda_max: r.lambda_max,
        max_imag: r.max_imag,
        predicted_max: r.predicted.last().copied().unwrap_or(f64::NAN),
        mismatch: r.mismatch.unwrap_or(f64::NAN),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_lists_give_no_rows() {
        assert!(count(&[], 1e-4, 10).unwrap().is_empty());
        let cfg = SolveConfig::new(Problem::Poisson);
        assert!(solve(&cfg).unwrap().is_empty());
    }

    #[test]
    fn invalid_parameters_are_errors() {
        assert!(bounds(-1.0, 10).is_err());
        assert!(bounds(1.0, 1).is_err());
        assert!(count(&[0], 1e-4, 10).is_err());
        assert!(match_blocks(1, 1e-4).is_err());
    }

    #[test]
    fn count_row_for_tiny_mesh_matches_dense_spectrum() {
        let rows = count(&[2], 1e-4, 300).unwrap();
        let spec = spectrum(2, 1e-4, 300).unwrap();
        let inside = spec.iter().filter(|r| r.interval == 2).count();
        assert_eq!(rows[0].in_count, inside);
        assert_eq!(rows[0].out_count, 4 - inside);
        assert_eq!(rows[0].count1, spec.iter().filter(|r| r.interval == 1).count());
        assert_eq!(rows[0].count3, spec.iter().filter(|r| r.interval == 3).count());
    }

    #[test]
    fn matching_at_n2_uses_dense_blocks() {
        let rows = match_blocks(2, 1e-2).unwrap();
        assert_eq!(rows.len(), 12);
        let sys = ProblemSpec::new(Problem::Poisson).build(2, 1e-2).unwrap();
        let e = full_spectrum(&sys.permute_to_block_toeplitz().unwrap(), 100).unwrap();
        let s = sample_symbol(1e-2, 2).unwrap();
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.eigenvalue, e[i]);
            assert_eq!(r.block, i / 4 + 1);
            let nearest = s
                .values
                .iter()
                .map(|v| (v[r.block - 1] - r.eigenvalue).abs())
                .fold(f64::INFINITY, f64::min);
            assert_eq!(r.abs_error, nearest);
        }
    }

    #[test]
    fn solver_failure_is_a_dagger_row() {
        let mut cfg = SolveConfig::new(Problem::Poisson);
        cfg.maxit = 2;
        let row = solve_case(&cfg, 4, 1e-3, Variant::Identity).unwrap();
        assert_eq!(row.iterations, -1);
        assert!(!row.converged);
        assert_eq!(row.status, "maxit");
        assert_eq!(row.order, 48);
    }

    #[test]
    fn precheck_identity_reports_spectrum_of_a() {
        let r = precheck(ProblemSpec::new(Problem::Poisson), 3, 1e-2, Variant::Identity).unwrap();
        let sys = ProblemSpec::new(Problem::Poisson).build(3, 1e-2).unwrap();
        let e = full_spectrum(sys.matrix(), 100).unwrap();
        assert!((r.lambda_max - e[e.len() - 1]).abs() < 1e-12);
        assert!((r.lambda_min - e[0]).abs() < 1e-12);
        assert!(r.mismatch.is_nan());
    }
}
