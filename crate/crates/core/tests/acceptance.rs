//! Acceptance suite. Every criterion prints one `criterion N: PASS|FAIL` line
//! (straight to stderr, so it is visible in captured test output) followed by
//! the measured values, then asserts.

use std::io::Write as _;

use nalgebra::{DMatrix, Schur};

use permsaddle::assembly::{assemble_operators, element_mass, element_stiffness, ProblemInstance};
use permsaddle::dense::DenseMatrix;
use permsaddle::harness::{run_single, ExampleSpec, RunConfig};
use permsaddle::krylov::{gmres, minres, KrylovOptions};
use permsaddle::mesh::build_mesh;
use permsaddle::precond::{InnerSolveMode, PreconditionerKind};
use permsaddle::spectral::{
    exact_schur_triangular, nontrivial_eigenvalues, optimal_block_diagonal, schur_complements,
    spectral_report,
};
use permsaddle::systems::{build_extended_permuted, build_original_kkt};

const BETAS: [f64; 4] = [1e-2, 1e-4, 1e-6, 1e-8];

fn say(line: impl AsRef<str>) {
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "{}", line.as_ref());
}

fn verdict(criterion: u32, ok: bool, details: &[String]) {
    let mut out = format!(
        "criterion {criterion}: {}",
        if ok { "PASS" } else { "FAIL" }
    );
    for d in details {
        out.push_str("\n    ");
        out.push_str(d);
    }
    say(out);
}

fn solve(
    example: ExampleSpec,
    grid: usize,
    beta: f64,
    kind: PreconditionerKind,
    inner: InnerSolveMode,
) -> (usize, bool) {
    let out = run_single(&RunConfig::new(example, grid, beta, kind).with_inner(inner))
        .expect("solve runs");
    (out.report.iterations, out.report.converged)
}

fn phat2(example: ExampleSpec, grid: usize, beta: f64) -> (usize, bool) {
    solve(
        example,
        grid,
        beta,
        PreconditionerKind::Phat2,
        InnerSolveMode::Exact,
    )
}

/// Compares exact-mode GMRES + P2 counts with reference counts, +-3.
fn count_table(
    example: ExampleSpec,
    rows: &[(usize, [usize; 4])],
    details: &mut Vec<String>,
) -> bool {
    let mut ok = true;
    for &(grid, expected) in rows {
        let mut line = format!("example {example}, N={grid}:");
        for (&beta, &want) in BETAS.iter().zip(&expected) {
            let (got, converged) = phat2(example, grid, beta);
            let hit = converged && got.abs_diff(want) <= 3;
            ok &= hit;
            line.push_str(&format!(
                " beta={beta:e} {got} (ref {want}){}",
                if hit { "" } else { " MISS" }
            ));
        }
        details.push(line);
    }
    ok
}

#[test]
fn criterion_1_iteration_counts_example_1() {
    let mut details = Vec::new();
    let ok = count_table(
        ExampleSpec::Example1,
        &[(33, [6, 15, 38, 74]), (65, [6, 14, 37, 91])],
        &mut details,
    );
    verdict(1, ok, &details);
    assert!(ok, "{details:#?}");
}

#[test]
fn criterion_2_iteration_counts_example_2() {
    let mut details = Vec::new();
    let ok = count_table(
        ExampleSpec::Example2,
        &[(33, [7, 15, 35, 68])],
        &mut details,
    );
    verdict(2, ok, &details);
    assert!(ok, "{details:#?}");
}

#[test]
fn criterion_3_mesh_robustness() {
    let mut ok = true;
    let mut details = Vec::new();
    for example in [ExampleSpec::Example1, ExampleSpec::Example2] {
        for beta in BETAS {
            let runs: Vec<(usize, bool)> = [33, 65, 129]
                .iter()
                .map(|&g| phat2(example, g, beta))
                .collect();
            let its: Vec<usize> = runs.iter().map(|r| r.0).collect();
            let spread = its.iter().max().unwrap() - its.iter().min().unwrap();
            let hit = runs.iter().all(|r| r.1) && spread <= 5;
            ok &= hit;
            details.push(format!(
                "example {example}, beta={beta:e}: N=33,65,129 -> {its:?}, spread {spread}{}",
                if hit { "" } else { " > 5" }
            ));
        }
    }
    verdict(3, ok, &details);
    assert!(ok, "{details:#?}");
}

#[test]
fn criterion_4_baseline_trends() {
    let approx = InnerSolveMode::approx();
    let ex = ExampleSpec::Example1;

    let a: Vec<(usize, bool)> = [33, 65, 129]
        .iter()
        .map(|&g| solve(ex, g, 1e-2, PreconditionerKind::PhatI, approx))
        .collect();
    let ok_a = a.iter().all(|r| r.1) && a.windows(2).all(|w| w[1].0 > w[0].0);

    let (rees_its, rees_conv) = solve(ex, 33, 1e-6, PreconditionerKind::Rees, approx);
    let ok_b = !rees_conv;

    let c: Vec<(usize, bool)> = BETAS
        .iter()
        .map(|&b| solve(ex, 33, b, PreconditionerKind::Pearson, approx))
        .collect();
    let ok_c = c.iter().all(|r| r.1) && c.windows(2).all(|w| w[1].0 > w[0].0);

    let mark = |ok: bool| if ok { "ok" } else { "VIOLATED" };
    let details = vec![
        format!("(a) GMRES+PhatI, beta=1e-2, N=33,65,129: {a:?} strictly increasing: {}", mark(ok_a)),
        format!(
            "(b) MINRES+Rees, beta=1e-6, N=33: {} after {rees_its} iterations, expected no convergence within 500: {}",
            if rees_conv { "converged" } else { "not converged" },
            mark(ok_b)
        ),
        format!("(c) MINRES+Pearson, N=33, beta=1e-2..1e-8: {c:?} increasing as beta decreases: {}", mark(ok_c)),
    ];
    let ok = ok_a && ok_b && ok_c;
    verdict(4, ok, &details);
    assert!(ok, "{details:#?}");
}

#[test]
fn criterion_5_optimal_preconditioners_terminate() {
    let beta = 1e-2;
    let mesh = build_mesh::<f64>(4).unwrap();
    let ops = assemble_operators(&mesh, &ProblemInstance::example1(beta).unwrap());
    let opts = KrylovOptions::new(1e-10, 50);
    let start = std::time::Instant::now();

    let (system, blocks) = build_extended_permuted(&ops, beta).unwrap();
    let p = exact_schur_triangular(&blocks).unwrap().lu().unwrap();
    let (_, g) = gmres(&system.operator, &p, &system.rhs, opts).unwrap();
    let ok_gmres = g.converged && g.iterations <= 3;

    let original = build_original_kkt(&ops, beta).unwrap();
    let p = optimal_block_diagonal(&ops, beta).unwrap().lu().unwrap();
    let (_, m) = minres(&original.operator, &p, &original.rhs, opts).unwrap();
    let ok_minres = m.converged && m.iterations <= 4;

    let elapsed = start.elapsed().as_secs_f64();
    let ok = ok_gmres && ok_minres && elapsed < 1.0;
    let details = vec![
        format!(
            "GMRES + exact-Schur triangular, N=4: {} iterations (limit 3), converged {}",
            g.iterations, g.converged
        ),
        format!(
            "MINRES + exact block diagonal, N=4: {} iterations (limit 4), converged {}",
            m.iterations, m.converged
        ),
        format!("elapsed {elapsed:.3} s"),
    ];
    verdict(5, ok, &details);
    assert!(ok, "{details:#?}");
}

/// Eigenvalues of `S S_hat^-1` by a general dense eigensolver.
fn brute_force_spectrum(grid: usize, beta: f64) -> (Vec<(f64, f64)>, Vec<f64>, usize) {
    let mesh = build_mesh::<f64>(grid).unwrap();
    let ops = assemble_operators(&mesh, &ProblemInstance::example1(beta).unwrap());
    let (_, blocks) = build_extended_permuted(&ops, beta).unwrap();
    let (s, s_hat) = schur_complements(&blocks).unwrap();
    let prod: DenseMatrix<f64> = s.matmul(&s_hat.inverse().unwrap());
    let m = DMatrix::from_row_slice(prod.rows(), prod.cols(), prod.as_slice());
    // Deflation at machine precision can stall on the repeated unit
    // eigenvalues; relax it step by step.
    let schur = [1e-15, 1e-14, 1e-13, 1e-12]
        .iter()
        .find_map(|&eps| Schur::try_new(m.clone(), eps, 100_000))
        .expect("Schur iteration converges");
    let eig: Vec<(f64, f64)> = schur
        .complex_eigenvalues()
        .iter()
        .map(|z| (z.re, z.im))
        .collect();
    (eig, nontrivial_eigenvalues(&blocks).unwrap(), ops.n)
}

#[test]
fn criterion_6_spectral_suite() {
    let mut ok = true;
    let mut details = Vec::new();
    for grid in [4, 5, 7] {
        for beta in [1e-2, 1e-4, 1e-6] {
            let r = spectral_report(grid, beta).unwrap();
            let id = r.identity_residuals;
            let ids_ok =
                id.omega_t_j <= 1e-10 && id.omega_t_v_minus_one <= 1e-10 && id.zt_kinv_nbe <= 1e-10;
            let mu_ok = r.nontrivial_mu.len() == r.m_b && r.mu_min >= 1.0 - 1e-10;
            let trace_ok = r.trace_gap <= 1e-8 * r.total_dim as f64;
            let mult_ok = r.multiplicity_one >= r.n + 1;
            let point_ok = ids_ok && mu_ok && trace_ok && mult_ok;
            ok &= point_ok;
            details.push(format!(
                "N={grid} beta={beta:e}: identities {:.1e}/{:.1e}/{:.1e}, mu in [{:.6}, {:.4e}], trace gap {:.1e} \
                 (limit {:.1e}), eigenvalue 1: geometric {} / algebraic {} vs claimed 2n+2 = {}{}",
                id.omega_t_j,
                id.omega_t_v_minus_one,
                id.zt_kinv_nbe,
                r.mu_min,
                r.mu_max,
                r.trace_gap,
                1e-8 * r.total_dim as f64,
                r.multiplicity_one,
                r.algebraic_multiplicity_one,
                2 * r.n + 2,
                if point_ok { "" } else { " FAILED" }
            ));
        }
    }

    // Brute force: every value from the symmetric reduction must appear in
    // the spectrum of S S_hat^-1, and the remainder must be ones.
    let (eig, mu, n) = brute_force_spectrum(5, 1e-2);
    let max_imag = eig.iter().map(|e| e.1.abs()).fold(0.0, f64::max);
    let mut remaining: Vec<f64> = eig.iter().map(|e| e.0).collect();
    let mut worst = 0.0f64;
    for &m in &mu {
        let (k, d) = remaining
            .iter()
            .enumerate()
            .map(|(k, &v)| (k, (v - m).abs() / m.abs().max(1.0)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        worst = worst.max(d);
        remaining.swap_remove(k);
    }
    let ones_dev = remaining
        .iter()
        .map(|v| (v - 1.0).abs())
        .fold(0.0, f64::max);
    let bf_ok = worst <= 1e-8 && max_imag <= 1e-8 && remaining.len() == n + 1 && ones_dev <= 1e-6;
    ok &= bf_ok;
    details.push(format!(
        "brute force N=5 beta=1e-2: worst mu mismatch {worst:.1e}, max |imag| {max_imag:.1e}, {} remaining eigenvalues \
         within {ones_dev:.1e} of 1{}",
        remaining.len(),
        if bf_ok { "" } else { " FAILED" }
    ));
    verdict(6, ok, &details);
    assert!(ok, "{details:#?}");
}

#[test]
fn criterion_7_assembly_invariants() {
    let mut details = Vec::new();
    let mut ok = true;
    for grid in [3, 9, 33] {
        let mesh = build_mesh::<f64>(grid).unwrap();
        let ops = assemble_operators(&mesh, &ProblemInstance::example1(1e-2).unwrap());
        let k1 = ops.stiffness.spmv(&vec![1.0; ops.n]).unwrap();
        let k1_max = k1.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let omega_sum: f64 = ops.omega.iter().sum();
        let mb_sum = ops.boundary_mass.sum();
        let hit =
            k1_max <= 1e-12 && (omega_sum - 1.0).abs() <= 1e-12 && (mb_sum - 4.0).abs() <= 1e-12;
        ok &= hit;
        details.push(format!(
            "N={grid}: max|K 1| {k1_max:.1e}, sum omega - 1 = {:.1e}, sum M_b - 4 = {:.1e}",
            omega_sum - 1.0,
            mb_sum - 4.0
        ));
    }

    // Hand integration on the two triangle shapes of the mesh, h = 0.25.
    let h = 0.25f64;
    let lower = [[0.0, 0.0], [h, 0.0], [h, h]];
    let upper = [[0.0, 0.0], [h, h], [0.0, h]];
    let k_lower: [[f64; 3]; 3] = [[0.5, -0.5, 0.0], [-0.5, 1.0, -0.5], [0.0, -0.5, 0.5]];
    let k_upper: [[f64; 3]; 3] = [[0.5, 0.0, -0.5], [0.0, 0.5, -0.5], [-0.5, -0.5, 1.0]];
    let m_ref = |i: usize, j: usize| h * h / 24.0 * if i == j { 2.0 } else { 1.0 };
    let mut elem_err = 0.0f64;
    for (p, k_ref) in [(lower, k_lower), (upper, k_upper)] {
        let (k, m) = (element_stiffness(&p), element_mass(&p));
        for i in 0..3 {
            for j in 0..3 {
                elem_err = elem_err
                    .max((k[i][j] - k_ref[i][j]).abs())
                    .max((m[i][j] - m_ref(i, j)).abs());
            }
        }
    }
    ok &= elem_err <= 1e-14;
    details.push(format!(
        "element matrices vs hand integration: max error {elem_err:.1e}"
    ));

    for kind in PreconditionerKind::ALL {
        let out = run_single(&RunConfig::new(
            ExampleSpec::Constant { value: 0.7 },
            17,
            1e-2,
            kind,
        ))
        .unwrap();
        let u_norm = out.solution.u.iter().map(|v| v * v).sum::<f64>().sqrt();
        let y_dev = out
            .solution
            .y
            .iter()
            .map(|v| (v - 0.7).abs())
            .fold(0.0, f64::max);
        let hit = out.report.converged && u_norm <= 1e-8;
        ok &= hit;
        details.push(format!(
            "constant desired state 0.7, {kind}: ||u|| = {u_norm:.1e}, max|y - 0.7| = {y_dev:.1e}{}",
            if hit { "" } else { " FAILED" }
        ));
    }
    verdict(7, ok, &details);
    assert!(ok, "{details:#?}");
}

#[test]
fn criterion_8_recovered_solution_solves_the_original_system() {
    let mut ok = true;
    let mut details = Vec::new();
    for example in [ExampleSpec::Example1, ExampleSpec::Example2] {
        for beta in BETAS {
            let out = run_single(&RunConfig::new(
                example,
                33,
                beta,
                PreconditionerKind::Phat2,
            ))
            .unwrap();
            let hit = out.report.converged && out.original_residual <= 1e-5;
            ok &= hit;
            details.push(format!(
                "example {example}, beta={beta:e}: original KKT residual {:.2e}, lambda = {:.3e}{}",
                out.original_residual,
                out.solution.lambda,
                if hit { "" } else { " > 1e-5" }
            ));
        }
    }
    verdict(8, ok, &details);
    assert!(ok, "{details:#?}");
}
