use permsaddle::assembly::{assemble_operators, ProblemInstance};
use permsaddle::harness::{
    export_matrices, run_single, run_sweep, ExampleSpec, Method, RunConfig, SweepCell, SweepSpec,
};
use permsaddle::io::read_matrix_market;
use permsaddle::mesh::build_mesh;
use permsaddle::precond::{InnerSolveMode, PreconditionerKind};
use permsaddle::scalar::norm2;
use permsaddle::systems::build_extended_permuted;
use permsaddle::Csr;

#[test]
fn reports_are_deterministic_apart_from_timing() {
    for kind in PreconditionerKind::ALL {
        let config = RunConfig::new(ExampleSpec::Example2, 9, 1e-3, kind);
        let mut a = run_single(&config).unwrap().report;
        let mut b = run_single(&config).unwrap().report;
        a.wall_time_seconds = 0.0;
        b.wall_time_seconds = 0.0;
        assert_eq!(a, b, "{kind}");
    }
}

#[test]
fn report_json_has_the_documented_keys() {
    let outcome = run_single(&RunConfig::new(
        ExampleSpec::Example1,
        5,
        1e-2,
        PreconditionerKind::Phat2,
    ))
    .unwrap();
    let value: serde_json::Value = serde_json::from_str(&outcome.report_json().unwrap()).unwrap();
    for key in [
        "config",
        "n",
        "m_B",
        "dof",
        "iterations",
        "converged",
        "final_residual",
        "wall_time_seconds",
        "residual_history",
    ] {
        assert!(value.get(key).is_some(), "missing {key}");
    }
    assert_eq!(value["dof"], 2 * 25 + 16);
    assert_eq!(
        value["residual_history"].as_array().unwrap().len(),
        outcome.report.iterations + 1
    );
}

#[test]
fn outcome_files_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let outcome = run_single(&RunConfig::new(
        ExampleSpec::Example1,
        5,
        1e-2,
        PreconditionerKind::Rees,
    ))
    .unwrap();
    outcome.write_to(dir.path()).unwrap();
    let read = |f: &str| std::fs::read_to_string(dir.path().join(f)).unwrap();
    assert!(read("state.csv").starts_with("x,y,value\n"));
    assert_eq!(read("state.csv").lines().count(), 26);
    assert!(read("control.csv").starts_with("s,value\n"));
    assert_eq!(read("control.csv").lines().count(), 17);
    assert!(read("report.json").contains("\"m_B\": 16"));
    assert!(!read("history.csv").is_empty());
}

#[test]
fn sweep_cells_agree_with_single_runs() {
    let methods = vec![
        Method::new(PreconditionerKind::Phat2, InnerSolveMode::Exact),
        Method::new(PreconditionerKind::Pearson, InnerSolveMode::approx()),
    ];
    let spec = SweepSpec {
        example: ExampleSpec::Example1,
        grids: vec![5, 9],
        betas: vec![1e-2, 1e-4],
        methods: methods.clone(),
        tol: 1e-6,
        maxit: 500,
    };
    let tables = run_sweep(&spec).unwrap();
    assert_eq!(tables.len(), 2);
    for table in &tables {
        assert!(table
            .to_csv()
            .starts_with("dof,gmres+phat2/exact,minres+pearson/approx\n"));
        for row in &table.rows {
            for (cell, m) in row.cells.iter().zip(&methods) {
                let config = RunConfig::new(
                    ExampleSpec::Example1,
                    row.grid_side,
                    table.beta,
                    m.preconditioner,
                )
                .with_inner(m.inner);
                let single = run_single(&config).unwrap().report;
                assert!(matches!(cell, SweepCell::Converged { .. }));
                assert_eq!(cell.iterations(), Some(single.iterations));
            }
        }
    }
}

#[test]
fn exported_matrices_reproduce_the_operators() {
    let dir = tempfile::tempdir().unwrap();
    let (grid, beta) = (6, 1e-3);
    let manifest = export_matrices(
        &RunConfig::new(ExampleSpec::Example1, grid, beta, PreconditionerKind::Phat2),
        dir.path(),
    )
    .unwrap();
    let ops = assemble_operators(
        &build_mesh::<f64>(grid).unwrap(),
        &ProblemInstance::example1(beta).unwrap(),
    );
    let (system, _) = build_extended_permuted(&ops, beta).unwrap();
    assert_eq!(manifest.dof, 2 * ops.n + ops.m_b);
    assert_eq!(manifest.extended_dim, system.total_dim());
    assert_eq!(manifest.files.len(), 6);

    let check = |file: &str, reference: &Csr| {
        let a: Csr = read_matrix_market(&dir.path().join(file)).unwrap();
        assert_eq!(
            (a.rows(), a.cols()),
            (reference.rows(), reference.cols()),
            "{file}"
        );
        let x: Vec<f64> = (0..a.cols())
            .map(|j| ((j as f64 + 0.5) * 1.3).cos())
            .collect();
        let (ya, yr) = (a.spmv(&x).unwrap(), reference.spmv(&x).unwrap());
        let diff: Vec<f64> = ya.iter().zip(&yr).map(|(p, q)| p - q).collect();
        assert!(norm2(&diff) <= 1e-15 * norm2(&yr).max(1.0), "{file}");
    };
    check("M.mtx", &ops.mass);
    check("K.mtx", &ops.stiffness);
    check("Mb.mtx", &ops.boundary_mass);
    check("Nb.mtx", &ops.boundary_coupling);
    check("A_perm.mtx", &system.operator.assemble());

    let manifest_text = std::fs::read_to_string(dir.path().join("manifest.json")).unwrap();
    let value: serde_json::Value = serde_json::from_str(&manifest_text).unwrap();
    assert_eq!(value["m_B"], ops.m_b);
    assert!(value["files"]
        .as_array()
        .unwrap()
        .iter()
        .all(|f| f["sha256"].as_str().unwrap().len() == 64));
}
