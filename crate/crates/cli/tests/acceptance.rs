//! One test per acceptance criterion; each prints a single PASS/FAIL line.

use std::io::Write;
use std::time::Instant;

use glt_saddle::fem::{assemble_mass, assemble_stiffness, UniformMesh};
use glt_saddle::precond::Variant;
use glt_saddle::saddle::TestProblem;
use glt_saddle::spectra::{
    count_eigs_in_interval, full_spectrum, interval_bounds, preconditioned_spectrum_check, sample_symbol,
    DENSE_LIMIT, INTERVAL_CLOSEDNESS,
};
use glt_saddle::toeplitz::{mass_symbol, predefined_symbols, stiffness_symbol};
use glt_saddle_cli::experiments::{self, Problem, SolveConfig};
use rand::{Rng, SeedableRng};

/// Written straight to stdout so the line shows without `--nocapture`.
fn report(id: u32, ok: bool, detail: &str) {
    let line = format!("[{}] criterion {id:>2}: {detail}\n", if ok { "PASS" } else { "FAIL" });
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
    assert!(ok, "criterion {id} failed: {detail}");
}

fn within(x: i64, target: i64, tol: i64) -> bool {
    (x - target).abs() <= tol
}

#[test]
fn criterion_01_symbol_bounds() {
    let start = Instant::now();
    let b = experiments::bounds(1e-4, 3000).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let expected = [
        -8.006939205138657,
        -0.971179393341684,
        0.0,
        6.086664699e-5,
        0.971268643759555,
        8.006939262908668,
    ];
    let got = [b.m1, b.big_m1, b.m2, b.big_m2, b.m3, b.big_m3];
    let err = got.iter().zip(&expected).map(|(g, e)| (g - e).abs()).fold(0.0, f64::max);
    report(1, err <= 1e-8 && secs < 60.0, &format!("bounds at g=3000, max abs error {err:.1e}, {secs:.1} s"));
}

#[test]
fn criterion_02_03_interval_counts() {
    let start = Instant::now();
    let rows = experiments::count(&[10, 20, 40, 80], 1e-4, 3000).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let inside = [74, 353, 1421, 5694];
    let outside = [26, 47, 179, 706];
    let ratio = [0.086, 0.039, 0.037, 0.036];
    let ok2 = rows.iter().enumerate().all(|(i, r)| {
        within(r.in_count as i64, inside[i], 2)
            && within(r.out_count as i64, outside[i], 2)
            && (r.ratio - ratio[i]).abs() <= 0.005
    }) && secs < 1800.0;
    let summary: Vec<String> =
        rows.iter().map(|r| format!("n={} in={} out={} ratio={:.4}", r.n, r.in_count, r.out_count, r.ratio)).collect();
    let r40 = &rows[2];
    let ok3 = within(r40.count1 as i64, 1600, 2) && within(r40.in_count as i64, 1421, 2) && within(r40.count3 as i64, 1600, 2);
    let line3 = format!("n=40 per-interval counts ({}, {}, {})", r40.count1, r40.in_count, r40.count3);
    // report both before asserting either
    let l2 = format!("outlier table [{}], {secs:.0} s", summary.join("; "));
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "[{}] criterion  2: {l2}", if ok2 { "PASS" } else { "FAIL" });
    let _ = writeln!(out, "[{}] criterion  3: {line3}", if ok3 { "PASS" } else { "FAIL" });
    drop(out);
    assert!(ok2 && ok3, "{l2}; {line3}");
}

#[test]
fn criterion_04_preconditioned_structure() {
    let mut ok = true;
    let mut worst: f64 = 0.0;
    let mut min_excess = i64::MAX;
    for n in [4, 8] {
        for alpha in [1e-2, 1e-3] {
            let sys = TestProblem::Poisson.build::<f64>(n, alpha).unwrap();
            for v in [Variant::Pn, Variant::Pbct] {
                let r = preconditioned_spectrum_check(&sys, v, DENSE_LIMIT).unwrap();
                let mismatch = r.mismatch.unwrap();
                worst = worst.max(mismatch);
                min_excess = min_excess.min(r.unit_count as i64 - 2 * (n * n) as i64);
                ok &= r.unit_count >= 2 * n * n && mismatch <= 1e-8;
            }
        }
    }
    report(4, ok, &format!("unit eigenvalues >= 2n^2 (min excess {min_excess}), pencil prediction mismatch {worst:.1e}"));
}

#[test]
fn criterion_05_clustering_trend() {
    let alpha = 1e-3;
    let mut fractions = Vec::new();
    for n in [8, 16, 32] {
        let sys = TestProblem::Poisson.build::<f64>(n, alpha).unwrap();
        let r = preconditioned_spectrum_check(&sys, Variant::Pn, DENSE_LIMIT).unwrap();
        let outside = r.eigenvalues.iter().filter(|(re, im)| (re - 1.0).hypot(*im) > 0.01).count();
        fractions.push(outside as f64 / (n * n) as f64);
    }
    let monotone = fractions.windows(2).all(|w| w[1] <= w[0]);
    // (lambda_max - 1) is the largest pencil eigenvalue (h^4/alpha) mu_max
    let mut scaled = Vec::new();
    for a in [1e-2, 1e-3, 1e-4] {
        let sys = TestProblem::Poisson.build::<f64>(16, a).unwrap();
        let r = preconditioned_spectrum_check(&sys, Variant::Pn, DENSE_LIMIT).unwrap();
        scaled.push((r.lambda_max - 1.0) * a);
    }
    let spread = scaled.iter().cloned().fold(0.0, f64::max) / scaled.iter().cloned().fold(f64::INFINITY, f64::min);
    report(
        5,
        monotone && spread <= 2.0,
        &format!(
            "fractions outside [0.99,1.01] {:?}, (lambda_max-1)*alpha {:?} (spread {spread:.3})",
            fractions.iter().map(|f| format!("{f:.4}")).collect::<Vec<_>>(),
            scaled.iter().map(|s| format!("{s:.3e}")).collect::<Vec<_>>()
        ),
    );
}

fn iterations(problem: Problem, ns: &[usize], alpha: f64, v: Variant) -> Vec<i64> {
    let mut cfg = SolveConfig::new(problem);
    cfg.ns = ns.to_vec();
    cfg.alphas = vec![alpha];
    cfg.preconditioners = vec![v];
    experiments::solve(&cfg).unwrap().iter().map(|r| r.iterations).collect()
}

#[test]
fn criterion_06_poisson_iterations() {
    let start = Instant::now();
    let a = iterations(Problem::Poisson, &[7, 15, 31, 63], 1e-3, Variant::Pn);
    let b = iterations(Problem::Poisson, &[7, 15, 31], 1e-6, Variant::Pn);
    let none = iterations(Problem::Poisson, &[15], 1e-3, Variant::Identity);
    let secs = start.elapsed().as_secs_f64();
    let ok = a.iter().zip([3, 3, 3, 2]).all(|(&x, t)| x >= 0 && within(x, t, 2))
        && b.iter().zip([15, 14, 9]).all(|(&x, t)| x >= 0 && within(x, t, 3))
        && none == [-1]
        && secs < 300.0;
    report(6, ok, &format!("P_N alpha=1e-3 {a:?}, alpha=1e-6 {b:?}, unpreconditioned N=675 {none:?}, {secs:.1} s"));
}

#[test]
fn criterion_07_advection_iterations() {
    let a = iterations(Problem::Advection, &[7, 15, 31], 1e-3, Variant::Pbct);
    let ok = a.iter().zip([5, 5, 4]).all(|(&x, t)| x >= 0 && within(x, t, 3));
    report(7, ok, &format!("P_BCT advection alpha=1e-3 {a:?}"));
}

#[test]
fn criterion_08_decoupled_preconditioner() {
    let a = iterations(Problem::Poisson, &[7, 15, 31, 63], 1e-9, Variant::Pd);
    let small = a[..3].iter().all(|&x| (0..=8).contains(&x));
    let fails_at_11907 = a[3] == -1;
    report(8, small && fails_at_11907, &format!("P_D alpha=1e-9 iterations {a:?} (expected <= 8 for N <= 2883, failure at N=11907)"));
}

#[test]
fn criterion_09_oracle_equivalence() {
    let (m, k) = (mass_symbol::<f64>(), stiffness_symbol::<f64>());
    let mut fem_err: f64 = 0.0;
    for n in 1..=32 {
        let mesh = UniformMesh::new(n).unwrap();
        let h: f64 = mesh.h();
        let tm = m.toeplitz_truncating(&[n, n]).unwrap().0.scaled(h * h);
        let tk = k.toeplitz_truncating(&[n, n]).unwrap().0;
        fem_err = fem_err.max(assemble_mass::<f64>(&mesh).max_abs_diff(&tm));
        fem_err = fem_err.max(assemble_stiffness::<f64>(&mesh).max_abs_diff(&tk));
    }
    let bounds = interval_bounds(1e-4, 3000).unwrap();
    let mut counts_agree = true;
    for n in 1..=20 {
        let b = TestProblem::Poisson.build::<f64>(n, 1e-4).unwrap().permute_to_block_toeplitz().unwrap();
        let e = full_spectrum(&b, DENSE_LIMIT).unwrap();
        for (l, (lo, hi)) in bounds.pairs().into_iter().enumerate() {
            let c = INTERVAL_CLOSEDNESS[l];
            let brute = e.iter().filter(|&&x| c.contains(lo, hi, x)).count();
            counts_agree &= count_eigs_in_interval(&b, lo, hi, c).unwrap() == brute;
        }
    }
    report(9, fem_err <= 1e-14 && counts_agree, &format!("FEM vs Toeplitz max error {fem_err:.1e} (n <= 32), inertia counts equal dense counts for n <= 20: {counts_agree}"));
}

#[test]
fn criterion_10_invariants() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
    let mut flip_err: f64 = 0.0;
    for alpha in [1e-2, 1e-4, 1e-6] {
        let (m, k, f) = predefined_symbols(alpha).unwrap();
        for _ in 0..100 {
            let t = [rng.random_range(0.0..std::f64::consts::PI), rng.random_range(0.0..std::f64::consts::PI)];
            for sym in [&m, &k, &f] {
                let base = sym.eval(&t).unwrap();
                flip_err = flip_err.max((&base - sym.eval(&[-t[0], -t[1]]).unwrap()).abs().max());
            }
        }
    }
    let mut ordered = true;
    for alpha in [1e-2, 1e-4, 1e-6] {
        for g in 2..=200 {
            ordered &= sample_symbol(alpha, g).unwrap().values.iter().all(|e| e[0] < 0.0 && 0.0 <= e[1] && e[1] < e[2]);
        }
    }
    let mut sim_err: f64 = 0.0;
    for n in 1..=6 {
        let sys = TestProblem::Poisson.build::<f64>(n, 1e-4).unwrap();
        let a = full_spectrum(sys.matrix(), DENSE_LIMIT).unwrap();
        let b = full_spectrum(&sys.permute_to_block_toeplitz().unwrap(), DENSE_LIMIT).unwrap();
        sim_err = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(sim_err, f64::max);
    }
    report(
        10,
        flip_err <= 1e-13 && ordered && sim_err <= 1e-10,
        &format!("sign flip error {flip_err:.1e}, pointwise ordering on all grids g <= 200: {ordered}, A/B spectra difference {sim_err:.1e}"),
    );
}
