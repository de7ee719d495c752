//! Preconditioners: the block upper-triangular `P2` for the permuted extended
//! system (and its identity-Schur variant `PI`), plus the block-diagonal Rees
//! and Pearson preconditioners for the original KKT system.
//!
//! Inner stiffness solves run either exactly (sparse factorization) or
//! approximately, replacing each multigrid-type solve with a fixed number of
//! symmetric Gauss-Seidel sweeps started from zero.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::assembly::FemOperators;
use crate::error::{Error, Result};
use crate::krylov::{ChebyshevMass, LinearOperator};
use crate::scalar::{dot, Real};
use crate::sparse::{factorize, CsrMatrix, FactorKind, Factorization, TripletBuilder};
use crate::systems::{BlockOperator, BlockRef, ExtendedBlocks};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum InnerSolveMode {
    /// Sparse direct factorizations.
    Exact,
    /// `sweeps` symmetric Gauss-Seidel sweeps per stiffness-type solve.
    Approx { sweeps: usize },
}

impl InnerSolveMode {
    pub const DEFAULT_SWEEPS: usize = 3;

    pub fn approx() -> Self {
        Self::Approx {
            sweeps: Self::DEFAULT_SWEEPS,
        }
    }
}

impl fmt::Display for InnerSolveMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Exact => f.write_str("exact"),
            Self::Approx {
                sweeps: Self::DEFAULT_SWEEPS,
            } => f.write_str("approx"),
            Self::Approx { sweeps } => write!(f, "approx:{sweeps}"),
        }
    }
}

impl FromStr for InnerSolveMode {
    type Err = Error;

    /// `exact`, `approx` or `approx:<sweeps>`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Self::Exact),
            "approx" => Ok(Self::approx()),
            other => match other.strip_prefix("approx:").map(str::parse::<usize>) {
                Some(Ok(sweeps)) if sweeps > 0 => Ok(Self::Approx { sweeps }),
                _ => Err(Error::Config(format!(
                    "unknown inner solve mode '{other}' (expected exact, approx or approx:<sweeps>)"
                ))),
            },
        }
    }
}

/// How mass-type blocks are inverted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum MassSolve {
    /// Cholesky factorization.
    Exact,
    /// Fixed number of Jacobi-preconditioned Chebyshev steps.
    Chebyshev { steps: usize },
    /// Inverse of the row-sum lumped matrix.
    Lumped,
}

impl MassSolve {
    pub const DEFAULT_STEPS: usize = 20;

    pub fn chebyshev() -> Self {
        Self::Chebyshev {
            steps: Self::DEFAULT_STEPS,
        }
    }
}

impl FromStr for MassSolve {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Self::Exact),
            "chebyshev" => Ok(Self::chebyshev()),
            "lumped" => Ok(Self::Lumped),
            other => Err(Error::Config(format!(
                "unknown mass solve '{other}' (expected exact, chebyshev or lumped)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PreconditionerKind {
    /// Block upper-triangular preconditioner with `K_e` as Schur block.
    Phat2,
    /// As `Phat2` with the identity as Schur block.
    #[serde(rename = "phatI")]
    PhatI,
    /// Block-diagonal with `K M^-1 K` Schur approximation.
    Rees,
    /// Block-diagonal with the matched Schur approximation.
    Pearson,
}

impl PreconditionerKind {
    pub const ALL: [Self; 4] = [Self::Phat2, Self::PhatI, Self::Rees, Self::Pearson];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Phat2 => "phat2",
            Self::PhatI => "phatI",
            Self::Rees => "rees",
            Self::Pearson => "pearson",
        }
    }

    /// Whether the preconditioner targets the permuted extended system (as
    /// opposed to the original symmetric KKT system).
    pub fn uses_extended_system(&self) -> bool {
        matches!(self, Self::Phat2 | Self::PhatI)
    }

    /// Mass solve used unless configured otherwise: exact for the triangular
    /// preconditioners in exact mode, Chebyshev everywhere else.
    pub fn default_mass_solve(&self, inner: InnerSolveMode) -> MassSolve {
        match (self, inner) {
            (Self::Phat2 | Self::PhatI, InnerSolveMode::Exact) => MassSolve::Exact,
            _ => MassSolve::chebyshev(),
        }
    }
}

impl fmt::Display for PreconditionerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PreconditionerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown preconditioner '{s}' (expected phat2, phatI, rees or pearson)"
                ))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrecondOptions {
    pub inner: InnerSolveMode,
    pub mass: MassSolve,
}

impl PrecondOptions {
    pub fn defaults(kind: PreconditionerKind, inner: InnerSolveMode) -> Self {
        Self {
            inner,
            mass: kind.default_mass_solve(inner),
        }
    }
}

/// `ν` symmetric Gauss-Seidel sweeps from a zero initial guess: a fixed,
/// symmetric positive definite approximation of `A^-1` for SPD `A`.
#[derive(Debug, Clone)]
pub struct SymmetricGaussSeidel<T> {
    matrix: Arc<CsrMatrix<T>>,
    diag: Vec<T>,
    sweeps: usize,
}

impl<T: Real> SymmetricGaussSeidel<T> {
    pub fn new(matrix: Arc<CsrMatrix<T>>, sweeps: usize) -> Result<Self> {
        if sweeps == 0 {
            return Err(Error::InvalidArgument(
                "Gauss-Seidel needs at least one sweep".into(),
            ));
        }
        let diag = matrix.diagonal();
        if let Some(i) = diag.iter().position(|&d| !(d > T::zero())) {
            return Err(Error::NotPositiveDefinite {
                column: i,
                pivot: diag[i].as_f64(),
            });
        }
        Ok(Self {
            matrix,
            diag,
            sweeps,
        })
    }

    fn relax(&self, i: usize, b: &[T], x: &mut [T]) {
        let (cols, vals) = self.matrix.row(i);
        let mut s = b[i];
        for (&j, &v) in cols.iter().zip(vals) {
            if j != i {
                s -= v * x[j];
            }
        }
        x[i] = s / self.diag[i];
    }
}

impl<T: Real> LinearOperator<T> for SymmetricGaussSeidel<T> {
    fn dim(&self) -> usize {
        self.diag.len()
    }

    fn apply(&self, b: &[T], x: &mut [T]) {
        x.iter_mut().for_each(|v| *v = T::zero());
        let n = self.diag.len();
        for _ in 0..self.sweeps {
            for i in 0..n {
                self.relax(i, b, x);
            }
            for i in (0..n).rev() {
                self.relax(i, b, x);
            }
        }
    }
}

/// An SPD solve realized either by a factorization or by SGS sweeps.
#[derive(Debug, Clone)]
pub enum SpdSolver<T> {
    Factorized(Arc<Factorization<T>>),
    GaussSeidel(SymmetricGaussSeidel<T>),
}

impl<T: Real> SpdSolver<T> {
    pub fn new(matrix: CsrMatrix<T>, mode: InnerSolveMode) -> Result<Self> {
        Ok(match mode {
            InnerSolveMode::Exact => {
                Self::Factorized(Arc::new(factorize(&matrix, FactorKind::Cholesky)?))
            }
            InnerSolveMode::Approx { sweeps } => {
                Self::GaussSeidel(SymmetricGaussSeidel::new(Arc::new(matrix), sweeps)?)
            }
        })
    }
}

impl<T: Real> LinearOperator<T> for SpdSolver<T> {
    fn dim(&self) -> usize {
        match self {
            Self::Factorized(f) => f.dim(),
            Self::GaussSeidel(g) => g.dim(),
        }
    }

    fn apply(&self, x: &[T], y: &mut [T]) {
        match self {
            Self::Factorized(f) => f.solve_into(x, y),
            Self::GaussSeidel(g) => g.apply(x, y),
        }
    }
}

/// `K` with its last row and column replaced by those of the identity.
pub fn khat<T: Real>(stiffness: &CsrMatrix<T>) -> CsrMatrix<T> {
    let n = stiffness.rows();
    let last = n - 1;
    let mut b = TripletBuilder::with_capacity(n, n, stiffness.nnz());
    for (i, j, v) in stiffness.triplets() {
        if i != last && j != last {
            b.push(i, j, v);
        }
    }
    b.push(last, last, T::one());
    b.build()
}

/// Inverse application of a mass-type SPD matrix.
#[derive(Debug, Clone)]
pub enum MassSolver<T> {
    Exact(Arc<Factorization<T>>),
    Chebyshev(ChebyshevMass<T>),
    Lumped(Vec<T>),
}

impl<T: Real> MassSolver<T> {
    pub fn new(matrix: CsrMatrix<T>, how: MassSolve) -> Result<Self> {
        Ok(match how {
            MassSolve::Exact => Self::Exact(Arc::new(factorize(&matrix, FactorKind::Cholesky)?)),
            MassSolve::Chebyshev { steps } => {
                Self::Chebyshev(ChebyshevMass::new(Arc::new(matrix), steps)?)
            }
            MassSolve::Lumped => {
                let sums = matrix.row_sums();
                if let Some(i) = sums.iter().position(|&d| !(d > T::zero())) {
                    return Err(Error::NotPositiveDefinite {
                        column: i,
                        pivot: sums[i].as_f64(),
                    });
                }
                Self::Lumped(sums.iter().map(|&d| T::one() / d).collect())
            }
        })
    }
}

impl<T: Real> LinearOperator<T> for MassSolver<T> {
    fn dim(&self) -> usize {
        match self {
            Self::Exact(f) => f.dim(),
            Self::Chebyshev(c) => c.dim(),
            Self::Lumped(d) => d.len(),
        }
    }

    fn apply(&self, x: &[T], y: &mut [T]) {
        match self {
            Self::Exact(f) => f.solve_into(x, y),
            Self::Chebyshev(c) => c.apply(x, y),
            Self::Lumped(d) => {
                for ((yi, &xi), &di) in y.iter_mut().zip(x).zip(d) {
                    *yi = xi * di;
                }
            }
        }
    }
}

/// Solver for the extended stiffness `K_e = [[K, omega], [omega^T, 0]]`.
#[derive(Debug, Clone)]
pub enum KeSolver<T> {
    /// LU factorization of `K_e`.
    Direct(Arc<Factorization<T>>),
    /// Bordered elimination through `Khat`:
    /// `x2 = (v1^T Khat^-1 omega - v2) / (omega^T Khat^-1 omega)`,
    /// `x1 = Khat^-1 v1 - x2 Khat^-1 omega`.
    Bordered {
        khat: SpdSolver<T>,
        khat_inv_omega: Vec<T>,
        denom: T,
    },
}

impl<T: Real> KeSolver<T> {
    pub fn new(ops: &FemOperators<T>, k_e: &CsrMatrix<T>, mode: InnerSolveMode) -> Result<Self> {
        match mode {
            InnerSolveMode::Exact => Ok(Self::Direct(Arc::new(factorize(
                k_e,
                FactorKind::SymmetricIndefinite,
            )?))),
            InnerSolveMode::Approx { .. } => {
                Self::bordered(ops, SpdSolver::new(khat(&ops.stiffness), mode)?)
            }
        }
    }

    /// Bordered solver around any `Khat` solve.
    pub fn bordered(ops: &FemOperators<T>, khat: SpdSolver<T>) -> Result<Self> {
        let khat_inv_omega = khat.apply_vec(&ops.omega);
        let denom = dot(&ops.omega, &khat_inv_omega);
        let scale: T = ops.omega.iter().map(|w| *w * *w).sum::<T>() * T::epsilon();
        if !(denom.abs() > scale) {
            return Err(Error::DegenerateRegularization(denom.as_f64()));
        }
        Ok(Self::Bordered {
            khat,
            khat_inv_omega,
            denom,
        })
    }
}

impl<T: Real> LinearOperator<T> for KeSolver<T> {
    fn dim(&self) -> usize {
        match self {
            Self::Direct(f) => f.dim(),
            Self::Bordered { khat_inv_omega, .. } => khat_inv_omega.len() + 1,
        }
    }

    fn apply(&self, v: &[T], x: &mut [T]) {
        match self {
            Self::Direct(f) => f.solve_into(v, x),
            Self::Bordered {
                khat,
                khat_inv_omega,
                denom,
            } => {
                let n = khat_inv_omega.len();
                let (v1, v2) = (&v[..n], v[n]);
                let x2 = (dot(v1, khat_inv_omega) - v2) / *denom;
                khat.apply(v1, &mut x[..n]);
                for (xi, &wi) in x[..n].iter_mut().zip(khat_inv_omega) {
                    *xi -= x2 * wi;
                }
                x[n] = x2;
            }
        }
    }
}

/// Inverse of `M_be = blkdiag(beta M_b, omega^T 1)`; the scalar block is
/// divided exactly.
#[derive(Debug, Clone)]
pub struct MbeSolver<T> {
    boundary: MassSolver<T>,
    scalar: T,
}

impl<T: Real> MbeSolver<T> {
    pub fn new(ops: &FemOperators<T>, beta: T, how: MassSolve) -> Result<Self> {
        let boundary = MassSolver::new(ops.boundary_mass.scaled(beta), how)?;
        Ok(Self {
            boundary,
            scalar: ops.omega.iter().copied().sum(),
        })
    }
}

impl<T: Real> LinearOperator<T> for MbeSolver<T> {
    fn dim(&self) -> usize {
        self.boundary.dim() + 1
    }

    fn apply(&self, x: &[T], y: &mut [T]) {
        let m = self.boundary.dim();
        self.boundary.apply(&x[..m], &mut y[..m]);
        y[m] = x[m] / self.scalar;
    }
}

/// Which Schur block the triangular preconditioner uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchurBlock {
    /// `K_e`, giving `P2`.
    ExtendedStiffness,
    /// The identity, giving `PI`.
    Identity,
}

/// Inverse of the block upper-triangular preconditioner
/// `[[K_e, -N_be, 0], [0, M_be, -N_be^T], [0, 0, S]]`, `S = K_e` or `I`.
#[derive(Debug, Clone)]
pub struct BlockTriangular<T> {
    ke: KeSolver<T>,
    mbe: MbeSolver<T>,
    n_be: Arc<CsrMatrix<T>>,
    schur: SchurBlock,
    sizes: [usize; 3],
}

impl<T: Real> BlockTriangular<T> {
    pub fn new(
        ops: &FemOperators<T>,
        blocks: &ExtendedBlocks<T>,
        schur: SchurBlock,
        opts: PrecondOptions,
    ) -> Result<Self> {
        Ok(Self {
            ke: KeSolver::new(ops, &blocks.k_e, opts.inner)?,
            mbe: MbeSolver::new(ops, blocks.beta, opts.mass)?,
            n_be: Arc::clone(&blocks.n_be),
            schur,
            sizes: blocks.block_sizes(),
        })
    }

    pub fn phat2(
        ops: &FemOperators<T>,
        blocks: &ExtendedBlocks<T>,
        opts: PrecondOptions,
    ) -> Result<Self> {
        Self::new(ops, blocks, SchurBlock::ExtendedStiffness, opts)
    }

    pub fn phat_i(
        ops: &FemOperators<T>,
        blocks: &ExtendedBlocks<T>,
        opts: PrecondOptions,
    ) -> Result<Self> {
        Self::new(ops, blocks, SchurBlock::Identity, opts)
    }

    pub fn ke_solver(&self) -> &KeSolver<T> {
        &self.ke
    }
}

impl<T: Real> LinearOperator<T> for BlockTriangular<T> {
    fn dim(&self) -> usize {
        self.sizes.iter().sum()
    }

    fn apply(&self, d: &[T], g: &mut [T]) {
        let [a, b, _] = self.sizes;
        let (g1, rest) = g.split_at_mut(a);
        let (g2, g3) = rest.split_at_mut(b);
        let (d1, d2, d3) = (&d[..a], &d[a..a + b], &d[a + b..]);
        match self.schur {
            SchurBlock::ExtendedStiffness => self.ke.apply(d3, g3),
            SchurBlock::Identity => g3.copy_from_slice(d3),
        }
        let mut t2 = d2.to_vec();
        self.n_be.transpose_mul_vec_add(T::one(), g3, &mut t2);
        self.mbe.apply(&t2, g2);
        let mut t1 = d1.to_vec();
        self.n_be.mul_vec_add(T::one(), g2, &mut t1);
        self.ke.apply(&t1, g1);
    }
}

/// The explicit triangular preconditioner as a block operator (for dense
/// checks): the block upper triangle of the permuted extended operator, with
/// the identity in place of `K_e` for [`SchurBlock::Identity`].
pub fn block_triangular_operator<T: Real>(
    blocks: &ExtendedBlocks<T>,
    schur: SchurBlock,
) -> BlockOperator<T> {
    let upper = blocks.permuted_operator().filter_blocks(|i, j| j >= i);
    match schur {
        SchurBlock::ExtendedStiffness => upper,
        SchurBlock::Identity => {
            let id = Arc::new(CsrMatrix::identity(blocks.n + 1));
            let sizes = blocks.block_sizes().to_vec();
            let mut grid: Vec<Vec<Option<BlockRef<T>>>> = (0..3)
                .map(|i| (0..3).map(|j| upper.block(i, j).cloned()).collect())
                .collect();
            grid[2][2] = Some(BlockRef::new(&id));
            BlockOperator::new(sizes.clone(), sizes, grid).expect("consistent sizes")
        }
    }
}

/// Block-diagonal preconditioner `blkdiag(M~^-1, (beta M_b~)^-1, S^-1)` for
/// the original KKT system, with the Schur inverse applied as `L^-1 W L^-1`.
#[derive(Debug, Clone)]
pub struct BlockDiagonal<T> {
    mass: MassSolver<T>,
    boundary: MassSolver<T>,
    stiff: SpdSolver<T>,
    /// Middle factor of the Schur inverse.
    weight: SchurWeight<T>,
    n: usize,
    m_b: usize,
}

#[derive(Debug, Clone)]
enum SchurWeight<T> {
    Matrix(Arc<CsrMatrix<T>>),
    Diagonal(Vec<T>),
}

impl<T: Real> BlockDiagonal<T> {
    /// `S = K~ M^-1 K~` with `K~ = Khat`.
    pub fn rees(ops: &FemOperators<T>, beta: T, opts: PrecondOptions) -> Result<Self> {
        Ok(Self {
            mass: MassSolver::new(ops.mass.clone(), opts.mass)?,
            boundary: MassSolver::new(ops.boundary_mass.scaled(beta), opts.mass)?,
            stiff: SpdSolver::new(khat(&ops.stiffness), opts.inner)?,
            weight: SchurWeight::Matrix(Arc::new(ops.mass.clone())),
            n: ops.n,
            m_b: ops.m_b,
        })
    }

    /// `S = (K + sqrt(h/beta) M_g) (h Mhat_g)^-1 (K + sqrt(h/beta) M_g)`.
    pub fn pearson(ops: &FemOperators<T>, beta: T, opts: PrecondOptions) -> Result<Self> {
        let h = ops.h;
        let matched = matched_stiffness(ops, beta)?;
        let stiff = SpdSolver::new(matched, opts.inner).map_err(|e| {
            Error::Internal(format!("matched stiffness is not positive definite: {e}"))
        })?;
        let weight = mhat_gamma(ops).into_iter().map(|d| h * d).collect();
        Ok(Self {
            mass: MassSolver::new(ops.mass.clone(), opts.mass)?,
            boundary: MassSolver::new(ops.boundary_mass.scaled(beta), opts.mass)?,
            stiff,
            weight: SchurWeight::Diagonal(weight),
            n: ops.n,
            m_b: ops.m_b,
        })
    }
}

/// `M_g = N_b Mb_lumped^-1 N_b^T`, nonzero only on boundary-boundary entries.
pub fn m_gamma<T: Real>(ops: &FemOperators<T>) -> CsrMatrix<T> {
    let inv: Vec<T> = ops
        .lumped_boundary_mass
        .iter()
        .map(|&d| T::one() / d)
        .collect();
    let scaled_t = CsrMatrix::from_diagonal(&inv)
        .matmul(&ops.boundary_coupling.transpose())
        .expect("compatible shapes");
    ops.boundary_coupling
        .matmul(&scaled_t)
        .expect("compatible shapes")
}

/// `K + sqrt(h/beta) M_g`.
pub fn matched_stiffness<T: Real>(ops: &FemOperators<T>, beta: T) -> Result<CsrMatrix<T>> {
    if !(beta > T::zero()) {
        return Err(Error::InvalidArgument(format!(
            "beta must be positive, got {beta}"
        )));
    }
    let coeff = (ops.h / beta).sqrt();
    ops.stiffness.add(T::one(), &m_gamma(ops), coeff)
}

/// Diagonal of `Mhat_g`: lumped `M_b` at boundary nodes, `h` elsewhere.
pub fn mhat_gamma<T: Real>(ops: &FemOperators<T>) -> Vec<T> {
    let mut d = vec![ops.h; ops.n];
    d[..ops.m_b].copy_from_slice(&ops.lumped_boundary_mass);
    d
}

impl<T: Real> LinearOperator<T> for BlockDiagonal<T> {
    fn dim(&self) -> usize {
        2 * self.n + self.m_b
    }

    fn apply(&self, d: &[T], g: &mut [T]) {
        let (n, m) = (self.n, self.m_b);
        let (g1, rest) = g.split_at_mut(n);
        let (g2, g3) = rest.split_at_mut(m);
        self.mass.apply(&d[..n], g1);
        self.boundary.apply(&d[n..n + m], g2);
        let mut t = vec![T::zero(); n];
        self.stiff.apply(&d[n + m..], &mut t);
        let mut wt = vec![T::zero(); n];
        match &self.weight {
            SchurWeight::Matrix(w) => w.mul_vec_into(&t, &mut wt),
            SchurWeight::Diagonal(w) => {
                for ((o, &ti), &wi) in wt.iter_mut().zip(&t).zip(w) {
                    *o = ti * wi;
                }
            }
        }
        self.stiff.apply(&wt, g3);
    }
}

/// A configured preconditioner of any kind.
#[derive(Debug, Clone)]
pub enum Preconditioner<T> {
    Triangular(BlockTriangular<T>),
    Diagonal(BlockDiagonal<T>),
}

impl<T: Real> Preconditioner<T> {
    /// `blocks` is required for the triangular kinds.
    pub fn build(
        kind: PreconditionerKind,
        ops: &FemOperators<T>,
        blocks: Option<&ExtendedBlocks<T>>,
        beta: T,
        opts: PrecondOptions,
    ) -> Result<Self> {
        let need_blocks = || {
            blocks.ok_or_else(|| {
                Error::InvalidArgument(format!("{kind} needs the extended system blocks"))
            })
        };
        Ok(match kind {
            PreconditionerKind::Phat2 => {
                Self::Triangular(BlockTriangular::phat2(ops, need_blocks()?, opts)?)
            }
            PreconditionerKind::PhatI => {
                Self::Triangular(BlockTriangular::phat_i(ops, need_blocks()?, opts)?)
            }
            PreconditionerKind::Rees => Self::Diagonal(BlockDiagonal::rees(ops, beta, opts)?),
            PreconditionerKind::Pearson => Self::Diagonal(BlockDiagonal::pearson(ops, beta, opts)?),
        })
    }
}

impl<T: Real> LinearOperator<T> for Preconditioner<T> {
    fn dim(&self) -> usize {
        match self {
            Self::Triangular(p) => p.dim(),
            Self::Diagonal(p) => p.dim(),
        }
    }

    fn apply(&self, x: &[T], y: &mut [T]) {
        match self {
            Self::Triangular(p) => p.apply(x, y),
            Self::Diagonal(p) => p.apply(x, y),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{assemble_operators, ProblemInstance};
    use crate::dense::DenseMatrix;
    use crate::krylov::symmetry_probe;
    use crate::mesh::build_mesh;
    use crate::scalar::norm2;
    use crate::systems::build_extended_permuted;

    fn setup(n: usize, beta: f64) -> (FemOperators<f64>, ExtendedBlocks<f64>) {
        let ops = assemble_operators(
            &build_mesh(n).unwrap(),
            &ProblemInstance::example1(beta).unwrap(),
        );
        let (_, blocks) = build_extended_permuted(&ops, beta).unwrap();
        (ops, blocks)
    }

    fn probe(n: usize, seed: u64) -> Vec<f64> {
        (0..n)
            .map(|i| ((i as f64 + 0.5) * (seed as f64 * 1.7 + 0.3)).sin())
            .collect()
    }

    fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
        let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        norm2(&d) / norm2(b).max(1e-300)
    }

    #[test]
    fn khat_differs_only_in_last_row_and_column() {
        let (ops, _) = setup(5, 1e-2);
        let kh = khat(&ops.stiffness);
        let last = ops.n - 1;
        for i in 0..ops.n {
            for j in 0..ops.n {
                let expect = if i == last || j == last {
                    if i == j {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    ops.stiffness.get(i, j)
                };
                assert_eq!(kh.get(i, j), expect);
            }
        }
        factorize(&kh, FactorKind::Cholesky).unwrap();
    }

    #[test]
    fn exact_ke_solver_round_trip() {
        let (ops, blocks) = setup(9, 1e-2);
        let exact = KeSolver::new(&ops, &blocks.k_e, InnerSolveMode::Exact).unwrap();
        let rhs = probe(ops.n + 1, 3);
        let x = exact.apply_vec(&rhs);
        assert!(rel_diff(&blocks.k_e.spmv(&x).unwrap(), &rhs) < 1e-10);
        let mut e = vec![0.0; ops.n + 1];
        e[4] = 1.0;
        let back = exact.apply_vec(&blocks.k_e.spmv(&e).unwrap());
        assert!(rel_diff(&back, &e) < 1e-10);
    }

    #[test]
    fn bordered_solver_inverts_the_khat_border() {
        // with an exact Khat solve the bordered elimination inverts
        // [[Khat, omega], [omega^T, 0]], which differs from K_e
        let (ops, blocks) = setup(9, 1e-2);
        let khat_exact = SpdSolver::new(khat(&ops.stiffness), InnerSolveMode::Exact).unwrap();
        let bordered = KeSolver::bordered(&ops, khat_exact).unwrap();
        let mut b = TripletBuilder::new(ops.n + 1, ops.n + 1);
        khat(&ops.stiffness).push_into(&mut b, 0, 0, 1.0, false);
        for (i, &w) in ops.omega.iter().enumerate() {
            b.push(i, ops.n, w);
            b.push(ops.n, i, w);
        }
        let khat_e = b.build();
        let rhs = probe(ops.n + 1, 3);
        let x = bordered.apply_vec(&rhs);
        assert!(rel_diff(&khat_e.spmv(&x).unwrap(), &rhs) < 1e-10);
        let exact = KeSolver::new(&ops, &blocks.k_e, InnerSolveMode::Exact)
            .unwrap()
            .apply_vec(&rhs);
        assert!(rel_diff(&x, &exact) > 1e-6);
    }

    #[test]
    fn triangular_round_trip_exact() {
        let (ops, blocks) = setup(6, 1e-4);
        for schur in [SchurBlock::ExtendedStiffness, SchurBlock::Identity] {
            let p = BlockTriangular::new(
                &ops,
                &blocks,
                schur,
                PrecondOptions::defaults(PreconditionerKind::Phat2, InnerSolveMode::Exact),
            )
            .unwrap();
            let explicit = block_triangular_operator(&blocks, schur);
            let d = probe(p.dim(), 5);
            let g = p.apply_vec(&d);
            assert!(rel_diff(&explicit.apply_vec(&g), &d) < 1e-10, "{schur:?}");
        }
    }

    #[test]
    fn triangular_matches_dense_inverse() {
        let (ops, blocks) = setup(4, 1e-2);
        let opts = PrecondOptions::defaults(PreconditionerKind::Phat2, InnerSolveMode::Exact);
        for schur in [SchurBlock::ExtendedStiffness, SchurBlock::Identity] {
            let p = BlockTriangular::new(&ops, &blocks, schur, opts).unwrap();
            let inv =
                DenseMatrix::from_sparse(&block_triangular_operator(&blocks, schur).assemble())
                    .unwrap()
                    .inverse()
                    .unwrap();
            let d = probe(p.dim(), 8);
            assert!(rel_diff(&p.apply_vec(&d), &inv.mul_vec(&d)) < 1e-10);
        }
    }

    #[test]
    fn approx_triangular_is_linear() {
        let (ops, blocks) = setup(9, 1e-2);
        let opts = PrecondOptions::defaults(PreconditionerKind::Phat2, InnerSolveMode::approx());
        let p = BlockTriangular::phat2(&ops, &blocks, opts).unwrap();
        let (a, b) = (probe(p.dim(), 1), probe(p.dim(), 2));
        let comb: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 2.0 * x - 0.5 * y).collect();
        let (pa, pb, pc) = (p.apply_vec(&a), p.apply_vec(&b), p.apply_vec(&comb));
        let expect: Vec<f64> = pa.iter().zip(&pb).map(|(x, y)| 2.0 * x - 0.5 * y).collect();
        assert!(rel_diff(&pc, &expect) < 1e-12);
    }

    #[test]
    fn block_diagonal_symmetric_positive() {
        let (ops, _) = setup(9, 1e-4);
        for inner in [InnerSolveMode::Exact, InnerSolveMode::approx()] {
            for kind in [PreconditionerKind::Rees, PreconditionerKind::Pearson] {
                let p = Preconditioner::build(
                    kind,
                    &ops,
                    None,
                    1e-4,
                    PrecondOptions::defaults(kind, inner),
                )
                .unwrap();
                assert!(symmetry_probe(&p) < 1e-11, "{kind} {inner}");
                let d = probe(p.dim(), 4);
                assert!(dot(&d, &p.apply_vec(&d)) > 0.0);
            }
        }
    }

    #[test]
    fn block_diagonal_matches_dense_oracle() {
        let (ops, _) = setup(4, 1e-2);
        let beta = 1e-2;
        let opts = PrecondOptions {
            inner: InnerSolveMode::Exact,
            mass: MassSolve::Exact,
        };
        let n = ops.n;
        let dense = |m: &CsrMatrix<f64>| DenseMatrix::from_sparse(m).unwrap();
        let d = probe(2 * n + ops.m_b, 6);
        let tail = &d[n + ops.m_b..];

        let rees = BlockDiagonal::rees(&ops, beta, opts).unwrap().apply_vec(&d);
        let kh = dense(&khat(&ops.stiffness));
        let s = kh.matmul(&dense(&ops.mass).inverse().unwrap()).matmul(&kh);
        assert!(rel_diff(&rees[n + ops.m_b..], &s.inverse().unwrap().mul_vec(tail)) < 1e-10);
        assert!(
            rel_diff(
                &rees[..n],
                &dense(&ops.mass).inverse().unwrap().mul_vec(&d[..n])
            ) < 1e-10
        );

        let pear = BlockDiagonal::pearson(&ops, beta, opts)
            .unwrap()
            .apply_vec(&d);
        let l = dense(&matched_stiffness(&ops, beta).unwrap());
        let w_inv = DenseMatrix::from_fn(n, n, |i, j| {
            if i == j {
                1.0 / (ops.h * mhat_gamma(&ops)[i])
            } else {
                0.0
            }
        });
        let s = l.matmul(&w_inv).matmul(&l);
        assert!(rel_diff(&pear[n + ops.m_b..], &s.inverse().unwrap().mul_vec(tail)) < 1e-10);
    }

    #[test]
    fn m_gamma_lives_on_boundary() {
        let (ops, _) = setup(6, 1e-2);
        let mg = m_gamma(&ops);
        for (i, j, v) in mg.triplets() {
            assert!(v == 0.0 || (i < ops.m_b && j < ops.m_b));
        }
        assert!(mg.symmetry_defect() <= 1e-14 * mg.max_abs());
    }

    #[test]
    fn parse_kinds() {
        assert_eq!(
            "phatI".parse::<PreconditionerKind>().unwrap(),
            PreconditionerKind::PhatI
        );
        assert_eq!(
            "phati".parse::<PreconditionerKind>().unwrap(),
            PreconditionerKind::PhatI
        );
        assert!("amg".parse::<PreconditionerKind>().is_err());
        assert_eq!(
            "approx".parse::<InnerSolveMode>().unwrap(),
            InnerSolveMode::Approx { sweeps: 3 }
        );
        assert_eq!("lumped".parse::<MassSolve>().unwrap(), MassSolve::Lumped);
    }

    #[test]
    fn sgs_is_symmetric_and_converges() {
        let (ops, _) = setup(7, 1e-2);
        let kh = Arc::new(khat(&ops.stiffness));
        let sgs = SymmetricGaussSeidel::new(kh.clone(), 3).unwrap();
        assert!(symmetry_probe(&sgs) < 1e-13);
        let many = SymmetricGaussSeidel::new(kh.clone(), 2000).unwrap();
        let b = probe(ops.n, 2);
        let x = many.apply_vec(&b);
        assert!(rel_diff(&kh.spmv(&x).unwrap(), &b) < 1e-8);
    }
}
