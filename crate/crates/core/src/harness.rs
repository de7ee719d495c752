//! Experiment driver: single runs, iteration-count sweeps, spectral sweeps and
//! matrix export. Everything here works in `f64`.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::assembly::{assemble_operators, FemOperators, ProblemInstance};
use crate::error::{Error, Result};
use crate::io::{control_csv, matrix_market_string, state_csv, write_text, MatrixSymmetry};
use crate::krylov::{gmres, minres, KrylovOptions, SolveReport};
use crate::mesh::{build_mesh, TriMesh};
use crate::precond::{
    InnerSolveMode, MassSolve, PrecondOptions, Preconditioner, PreconditionerKind,
};
use crate::spectral::{bound_fit, spectral_report, BoundFit, SpectralReport};
use crate::systems::{
    build_extended_permuted, build_original_kkt, original_kkt_residual, recover_solution,
    BlockLayout, PhysicalSolution,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Gmres,
    Minres,
}

impl SolverKind {
    /// The solver paired with a preconditioner: GMRES for the triangular
    /// kinds on the permuted system, MINRES for the block-diagonal kinds.
    pub fn for_preconditioner(kind: PreconditionerKind) -> Self {
        if kind.uses_extended_system() {
            Self::Gmres
        } else {
            Self::Minres
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Gmres => "gmres",
            Self::Minres => "minres",
        })
    }
}

impl FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gmres" => Ok(Self::Gmres),
            "minres" => Ok(Self::Minres),
            other => Err(Error::Config(format!(
                "unknown solver '{other}' (expected gmres or minres)"
            ))),
        }
    }
}

/// Which optimal control problem to solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum ExampleSpec {
    Example1,
    Example2,
    /// Constant desired state and zero source.
    Constant {
        value: f64,
    },
}

impl ExampleSpec {
    pub fn problem(&self, beta: f64) -> Result<ProblemInstance<f64>> {
        match *self {
            Self::Example1 => ProblemInstance::example1(beta),
            Self::Example2 => ProblemInstance::example2(beta),
            Self::Constant { value } => ProblemInstance::constant(value, beta),
        }
    }
}

impl fmt::Display for ExampleSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Example1 => f.write_str("1"),
            Self::Example2 => f.write_str("2"),
            Self::Constant { value } => write!(f, "constant:{value}"),
        }
    }
}

impl FromStr for ExampleSpec {
    type Err = Error;

    /// Accepts `1`, `2`, `constant` (value 1) or `constant:<value>`.
    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        match lower.as_str() {
            "1" | "example1" => return Ok(Self::Example1),
            "2" | "example2" => return Ok(Self::Example2),
            "constant" => return Ok(Self::Constant { value: 1.0 }),
            _ => {}
        }
        if let Some(v) = lower.strip_prefix("constant:") {
            let value = v
                .parse()
                .map_err(|_| Error::Config(format!("invalid constant value '{v}'")))?;
            return Ok(Self::Constant { value });
        }
        Err(Error::Config(format!(
            "unknown example '{s}' (expected 1, 2 or constant[:value])"
        )))
    }
}

/// Complete description of one solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub example: ExampleSpec,
    pub grid_side: usize,
    pub beta: f64,
    pub preconditioner: PreconditionerKind,
    pub solver: SolverKind,
    pub inner: InnerSolveMode,
    /// Overrides the preconditioner's default mass solve.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mass: Option<MassSolve>,
    pub tol: f64,
    pub maxit: usize,
    /// Seed for randomized checks; the solves themselves are deterministic.
    pub seed: u64,
}

impl RunConfig {
    pub const DEFAULT_TOL: f64 = 1e-6;
    pub const DEFAULT_MAXIT: usize = 500;

    /// Exact inner solves, default tolerances, and the solver matching `preconditioner`.
    pub fn new(
        example: ExampleSpec,
        grid_side: usize,
        beta: f64,
        preconditioner: PreconditionerKind,
    ) -> Self {
        Self {
            example,
            grid_side,
            beta,
            preconditioner,
            solver: SolverKind::for_preconditioner(preconditioner),
            inner: InnerSolveMode::Exact,
            mass: None,
            tol: Self::DEFAULT_TOL,
            maxit: Self::DEFAULT_MAXIT,
            seed: 0,
        }
    }

    pub fn with_inner(mut self, inner: InnerSolveMode) -> Self {
        self.inner = inner;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid_side < 2 {
            return Err(Error::Config(format!(
                "grid side must be at least 2, got {}",
                self.grid_side
            )));
        }
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            return Err(Error::Config(format!(
                "beta must be positive and finite, got {}",
                self.beta
            )));
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::Config(format!(
                "tolerance must lie in (0, 1), got {}",
                self.tol
            )));
        }
        if self.maxit == 0 {
            return Err(Error::Config("maxit must be at least 1".into()));
        }
        let expected = SolverKind::for_preconditioner(self.preconditioner);
        if self.solver != expected {
            let why = if expected == SolverKind::Gmres {
                "it is a nonsymmetric block-triangular preconditioner for the permuted extended system"
            } else {
                "it is a symmetric positive definite block-diagonal preconditioner for the original KKT system"
            };
            return Err(Error::Config(format!(
                "preconditioner {} requires {expected}, not {}: {why}",
                self.preconditioner, self.solver
            )));
        }
        Ok(())
    }

    fn precond_options(&self) -> PrecondOptions {
        let mut opts = PrecondOptions::defaults(self.preconditioner, self.inner);
        if let Some(mass) = self.mass {
            opts.mass = mass;
        }
        opts
    }
}

/// Serialized summary of one solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: RunConfig,
    pub n: usize,
    #[serde(rename = "m_B")]
    pub m_b: usize,
    /// Dimension of the original KKT system, `2n + m_B`.
    pub dof: usize,
    pub iterations: usize,
    pub converged: bool,
    /// Relative true residual of the solved system.
    pub final_residual: f64,
    /// Krylov loop only; assembly and preconditioner setup are excluded.
    pub wall_time_seconds: f64,
    pub residual_history: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: RunReport,
    pub solve: SolveReport,
    pub solution: PhysicalSolution<f64>,
    pub mesh: TriMesh<f64>,
    /// Relative residual of `(y, u, p)` in the original KKT system.
    pub original_residual: f64,
}

impl RunOutcome {
    pub fn report_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.report)?)
    }

    pub fn state_csv(&self) -> String {
        state_csv(&self.mesh, &self.solution.y)
    }

    pub fn control_csv(&self) -> String {
        control_csv(&self.mesh, &self.solution.u)
    }

    /// Writes `report.json`, `state.csv`, `control.csv` and `history.csv`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        write_text(&dir.join("report.json"), &self.report_json()?)?;
        write_text(&dir.join("state.csv"), &self.state_csv())?;
        write_text(&dir.join("control.csv"), &self.control_csv())?;
        write_text(&dir.join("history.csv"), &self.solve.history_csv())
    }
}

fn setup(config: &RunConfig) -> Result<(TriMesh<f64>, FemOperators<f64>)> {
    config.validate()?;
    let mesh = build_mesh::<f64>(config.grid_side)?;
    let problem = config.example.problem(config.beta)?;
    let ops = assemble_operators(&mesh, &problem);
    Ok((mesh, ops))
}

/// Assembles, preconditions, solves and recovers `(y, u, p)`.
pub fn run_single(config: &RunConfig) -> Result<RunOutcome> {
    let (mesh, ops) = setup(config)?;
    let (n, m_b, beta) = (ops.n, ops.m_b, config.beta);
    let opts = KrylovOptions::new(config.tol, config.maxit);
    let precond_opts = config.precond_options();
    let (solve, solution) = match config.solver {
        SolverKind::Gmres => {
            let (system, blocks) = build_extended_permuted(&ops, beta)?;
            let p = Preconditioner::build(
                config.preconditioner,
                &ops,
                Some(&blocks),
                beta,
                precond_opts,
            )?;
            let (x, report) = gmres(&system.operator, &p, &system.rhs, opts)?;
            (report, recover_solution(n, m_b, &x)?)
        }
        SolverKind::Minres => {
            let system = build_original_kkt(&ops, beta)?;
            let p = Preconditioner::build(config.preconditioner, &ops, None, beta, precond_opts)?;
            let (x, report) = minres(&system.operator, &p, &system.rhs, opts)?;
            let y = x[..n].to_vec();
            let solution = PhysicalSolution {
                y0: y.clone(),
                y,
                u: x[n..n + m_b].to_vec(),
                p: x[n + m_b..].to_vec(),
                lambda: 0.0,
                c: 0.0,
                pi: 0.0,
            };
            (report, solution)
        }
    };
    let original_residual = original_kkt_residual(&ops, beta, &solution)?;
    let report = RunReport {
        config: config.clone(),
        n,
        m_b,
        dof: 2 * n + m_b,
        iterations: solve.iterations,
        converged: solve.converged,
        final_residual: solve.final_true_residual,
        wall_time_seconds: solve.wall_time_seconds,
        residual_history: solve.residual_history.clone(),
    };
    Ok(RunOutcome {
        report,
        solve,
        solution,
        mesh,
        original_residual,
    })
}

/// One column of a sweep table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Method {
    pub preconditioner: PreconditionerKind,
    pub solver: SolverKind,
    pub inner: InnerSolveMode,
}

impl Method {
    pub fn new(preconditioner: PreconditionerKind, inner: InnerSolveMode) -> Self {
        Self {
            preconditioner,
            solver: SolverKind::for_preconditioner(preconditioner),
            inner,
        }
    }

    pub fn label(&self) -> String {
        format!("{}+{}/{}", self.solver, self.preconditioner, self.inner)
    }
}

impl FromStr for Method {
    type Err = Error;

    /// `<precond>` or `<precond>/<inner>`, e.g. `phat2/exact`.
    fn from_str(s: &str) -> Result<Self> {
        let (p, inner) = match s.split_once('/') {
            Some((p, i)) => (p, i.parse()?),
            None => (s, InnerSolveMode::Exact),
        };
        Ok(Self::new(p.parse()?, inner))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "status")]
pub enum SweepCell {
    Converged {
        iterations: usize,
        seconds: f64,
    },
    /// Reached `maxit` without meeting the tolerance.
    NotConverged {
        iterations: usize,
    },
    Failed {
        reason: String,
    },
}

impl fmt::Display for SweepCell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Converged {
                iterations,
                seconds,
            } => write!(f, "{iterations}({seconds:.3})"),
            Self::NotConverged { .. } => f.write_str("-"),
            Self::Failed { .. } => f.write_str("ERR"),
        }
    }
}

impl SweepCell {
    pub fn iterations(&self) -> Option<usize> {
        match self {
            Self::Converged { iterations, .. } => Some(*iterations),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub grid_side: usize,
    pub dof: usize,
    pub cells: Vec<SweepCell>,
}

/// Iteration counts for one `(example, beta)` pair: rows are meshes, columns methods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub example: ExampleSpec,
    pub beta: f64,
    pub methods: Vec<String>,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    /// Header `dof,<method>...`; cells `ITER(SECONDS)`, `-` when `maxit`
    /// was reached, `ERR` when the run failed.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("dof");
        for m in &self.methods {
            out.push(',');
            out.push_str(m);
        }
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.dof.to_string());
            for c in &row.cells {
                out.push(',');
                out.push_str(&c.to_string());
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub example: ExampleSpec,
    pub grids: Vec<usize>,
    pub betas: Vec<f64>,
    pub methods: Vec<Method>,
    pub tol: f64,
    pub maxit: usize,
}

/// Runs every `(beta, grid, method)` combination; one table per `beta`.
/// Failing cells are recorded and the sweep continues.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SweepTable>> {
    if spec.grids.is_empty() || spec.betas.is_empty() || spec.methods.is_empty() {
        return Err(Error::Config(
            "sweep needs at least one grid, one beta and one method".into(),
        ));
    }
    let mut tables = Vec::with_capacity(spec.betas.len());
    for &beta in &spec.betas {
        let mut rows = Vec::with_capacity(spec.grids.len());
        for &grid_side in &spec.grids {
            let cells = spec
                .methods
                .iter()
                .map(|m| {
                    let config = RunConfig {
                        solver: m.solver,
                        inner: m.inner,
                        tol: spec.tol,
                        maxit: spec.maxit,
                        ..RunConfig::new(spec.example, grid_side, beta, m.preconditioner)
                    };
                    match run_single(&config) {
                        Ok(o) if o.report.converged => SweepCell::Converged {
                            iterations: o.report.iterations,
                            seconds: o.report.wall_time_seconds,
                        },
                        Ok(o) => SweepCell::NotConverged {
                            iterations: o.report.iterations,
                        },
                        Err(e) => {
                            log::warn!(
                                "sweep cell N={grid_side} beta={beta:e} {} failed: {e}",
                                m.label()
                            );
                            SweepCell::Failed {
                                reason: e.to_string(),
                            }
                        }
                    }
                })
                .collect();
            let n = grid_side * grid_side;
            rows.push(SweepRow {
                grid_side,
                dof: 2 * n + 4 * (grid_side - 1),
                cells,
            });
        }
        tables.push(SweepTable {
            example: spec.example,
            beta,
            methods: spec.methods.iter().map(Method::label).collect(),
            rows,
        });
    }
    Ok(tables)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedPoint {
    pub grid_side: usize,
    pub beta: f64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralSweep {
    pub reports: Vec<SpectralReport>,
    pub skipped: Vec<SkippedPoint>,
    /// Present when the evaluated points cover enough meshes and betas.
    pub bound_fit: Option<BoundFit>,
}

impl SpectralSweep {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Spectral reports for every `(N, beta)` pair plus the bound fit. Points
/// that fail (for example beyond the dense size limit) are skipped with a
/// reason.
pub fn run_spectral(grids: &[usize], betas: &[f64]) -> Result<SpectralSweep> {
    if grids.is_empty() || betas.is_empty() {
        return Err(Error::Config(
            "spectral sweep needs at least one grid and one beta".into(),
        ));
    }
    let mut reports = Vec::new();
    let mut skipped = Vec::new();
    for &grid_side in grids {
        for &beta in betas {
            match spectral_report(grid_side, beta) {
                Ok(r) => reports.push(r),
                Err(e) => skipped.push(SkippedPoint {
                    grid_side,
                    beta,
                    reason: e.to_string(),
                }),
            }
        }
    }
    let bound_fit = bound_fit(&reports).ok();
    Ok(SpectralSweep {
        reports,
        skipped,
        bound_fit,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportedFile {
    pub name: String,
    pub file: String,
    pub rows: usize,
    pub cols: usize,
    /// Stored entries (lower triangle for symmetric files).
    pub entries: usize,
    pub symmetric: bool,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExportManifest {
    pub grid_side: usize,
    pub n: usize,
    #[serde(rename = "m_B")]
    pub m_b: usize,
    pub h: f64,
    pub beta: f64,
    /// Dimension of the original KKT system, `2n + m_B`.
    pub dof: usize,
    pub extended_dim: usize,
    pub permuted_layout: BlockLayout,
    pub files: Vec<ExportedFile>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Writes `M`, `K`, `M_b`, `N_b`, `K_e` and the permuted extended matrix as
/// MatrixMarket files plus `manifest.json` into `dir`.
pub fn export_matrices(config: &RunConfig, dir: &Path) -> Result<ExportManifest> {
    let (_, ops) = setup(config)?;
    let (system, blocks) = build_extended_permuted(&ops, config.beta)?;
    let permuted = system.operator.assemble();
    let matrices = [
        ("M", "M.mtx", &ops.mass, MatrixSymmetry::Symmetric),
        ("K", "K.mtx", &ops.stiffness, MatrixSymmetry::Symmetric),
        (
            "M_b",
            "Mb.mtx",
            &ops.boundary_mass,
            MatrixSymmetry::Symmetric,
        ),
        (
            "N_b",
            "Nb.mtx",
            &ops.boundary_coupling,
            MatrixSymmetry::General,
        ),
        ("K_e", "Ke.mtx", &*blocks.k_e, MatrixSymmetry::Symmetric),
        ("A_perm", "A_perm.mtx", &permuted, MatrixSymmetry::General),
    ];
    let mut files = Vec::with_capacity(matrices.len());
    for (name, file, matrix, symmetry) in matrices {
        let text = matrix_market_string(matrix, symmetry)?;
        let path: PathBuf = dir.join(file);
        write_text(&path, &text)?;
        files.push(ExportedFile {
            name: name.into(),
            file: file.into(),
            rows: matrix.rows(),
            cols: matrix.cols(),
            entries: text.lines().count() - 2,
            symmetric: symmetry == MatrixSymmetry::Symmetric,
            sha256: sha256_hex(text.as_bytes()),
        });
    }
    let manifest = ExportManifest {
        grid_side: config.grid_side,
        n: ops.n,
        m_b: ops.m_b,
        h: ops.h,
        beta: config.beta,
        dof: 2 * ops.n + ops.m_b,
        extended_dim: system.total_dim(),
        permuted_layout: system.layout.clone(),
        files,
    };
    write_text(
        &dir.join("manifest.json"),
        &serde_json::to_string_pretty(&manifest)?,
    )?;
    Ok(manifest)
}
