//! Original and extended KKT systems, the row-permuted extended system, and
//! recovery of the physical solution.
//!
//! The extended system regularizes the pure Neumann state equation with the
//! zero-mean constraint `omega^T y0 = 0` (multiplier `lambda`) and writes the
//! state as `y = y0 + c 1`. Its unknowns are ordered
//! `y_e = (y0, lambda)`, `u_e = (u, c)`, `p_e = (p, pi)`.

use std::ops::Range;
use std::sync::Arc;

use serde::Serialize;

use crate::assembly::FemOperators;
use crate::error::{Error, Result};
use crate::krylov::LinearOperator;
use crate::scalar::{norm2, Real};
use crate::sparse::{factorize, CsrMatrix, FactorKind, TripletBuilder};

/// A shared sparse block, optionally scaled and transposed.
#[derive(Debug, Clone)]
pub struct BlockRef<T> {
    pub matrix: Arc<CsrMatrix<T>>,
    pub scale: T,
    pub transposed: bool,
}

impl<T: Real> BlockRef<T> {
    pub fn new(matrix: &Arc<CsrMatrix<T>>) -> Self {
        Self {
            matrix: Arc::clone(matrix),
            scale: T::one(),
            transposed: false,
        }
    }

    pub fn scaled(mut self, alpha: T) -> Self {
        self.scale *= alpha;
        self
    }

    pub fn transposed(mut self) -> Self {
        self.transposed = !self.transposed;
        self
    }

    fn shape(&self) -> (usize, usize) {
        let (r, c) = (self.matrix.rows(), self.matrix.cols());
        if self.transposed {
            (c, r)
        } else {
            (r, c)
        }
    }

    /// `y += scale * B x` (or `B^T x`).
    fn apply_add(&self, x: &[T], y: &mut [T]) {
        if self.transposed {
            self.matrix.transpose_mul_vec_add(self.scale, x, y);
        } else {
            self.matrix.mul_vec_add(self.scale, x, y);
        }
    }
}

/// Square block matrix whose blocks reference shared sparse matrices.
#[derive(Debug, Clone)]
pub struct BlockOperator<T> {
    row_sizes: Vec<usize>,
    col_sizes: Vec<usize>,
    blocks: Vec<Vec<Option<BlockRef<T>>>>,
}

fn offsets(sizes: &[usize]) -> Vec<usize> {
    let mut off = vec![0];
    for &s in sizes {
        off.push(off.last().unwrap() + s);
    }
    off
}

impl<T: Real> BlockOperator<T> {
    /// Validates that every block fits its block row and column sizes.
    pub fn new(
        row_sizes: Vec<usize>,
        col_sizes: Vec<usize>,
        blocks: Vec<Vec<Option<BlockRef<T>>>>,
    ) -> Result<Self> {
        if blocks.len() != row_sizes.len() || blocks.iter().any(|r| r.len() != col_sizes.len()) {
            return Err(Error::InvalidArgument(
                "block grid does not match block sizes".into(),
            ));
        }
        if row_sizes.iter().sum::<usize>() != col_sizes.iter().sum::<usize>() {
            return Err(Error::InvalidArgument(
                "block operator must be square".into(),
            ));
        }
        for (i, row) in blocks.iter().enumerate() {
            for (j, b) in row.iter().enumerate() {
                if let Some(b) = b {
                    if b.shape() != (row_sizes[i], col_sizes[j]) {
                        return Err(Error::InvalidArgument(format!(
                            "block ({i}, {j}) has shape {:?}, expected {:?}",
                            b.shape(),
                            (row_sizes[i], col_sizes[j])
                        )));
                    }
                }
            }
        }
        Ok(Self {
            row_sizes,
            col_sizes,
            blocks,
        })
    }

    pub fn block(&self, i: usize, j: usize) -> Option<&BlockRef<T>> {
        self.blocks[i][j].as_ref()
    }

    pub fn row_sizes(&self) -> &[usize] {
        &self.row_sizes
    }

    pub fn col_sizes(&self) -> &[usize] {
        &self.col_sizes
    }

    /// Reorders block rows: new block row `k` is old block row `order[k]`.
    /// Only references move; no matrix is copied.
    pub fn permute_block_rows(&self, order: &[usize]) -> Self {
        Self {
            row_sizes: order.iter().map(|&k| self.row_sizes[k]).collect(),
            col_sizes: self.col_sizes.clone(),
            blocks: order.iter().map(|&k| self.blocks[k].clone()).collect(),
        }
    }

    /// Keeps only the blocks selected by `keep(i, j)`; the rest become zero.
    pub fn filter_blocks(&self, keep: impl Fn(usize, usize) -> bool) -> Self {
        let blocks = self
            .blocks
            .iter()
            .enumerate()
            .map(|(i, row)| {
                row.iter()
                    .enumerate()
                    .map(|(j, b)| if keep(i, j) { b.clone() } else { None })
                    .collect()
            })
            .collect();
        Self {
            row_sizes: self.row_sizes.clone(),
            col_sizes: self.col_sizes.clone(),
            blocks,
        }
    }

    /// Assembles the full sparse matrix.
    pub fn assemble(&self) -> CsrMatrix<T> {
        let (ro, co) = (offsets(&self.row_sizes), offsets(&self.col_sizes));
        let n = *ro.last().unwrap();
        let mut b = TripletBuilder::new(n, n);
        for (i, row) in self.blocks.iter().enumerate() {
            for (j, blk) in row.iter().enumerate() {
                if let Some(blk) = blk {
                    blk.matrix
                        .push_into(&mut b, ro[i], co[j], blk.scale, blk.transposed);
                }
            }
        }
        b.build()
    }
}

impl<T: Real> LinearOperator<T> for BlockOperator<T> {
    fn dim(&self) -> usize {
        self.row_sizes.iter().sum()
    }

    fn apply(&self, x: &[T], y: &mut [T]) {
        let (ro, co) = (offsets(&self.row_sizes), offsets(&self.col_sizes));
        y.iter_mut().for_each(|v| *v = T::zero());
        for (i, row) in self.blocks.iter().enumerate() {
            let yi = &mut y[ro[i]..ro[i + 1]];
            for (j, blk) in row.iter().enumerate() {
                if let Some(blk) = blk {
                    blk.apply_add(&x[co[j]..co[j + 1]], yi);
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SystemKind {
    Original,
    Extended,
    Permuted,
}

/// Named index range of one group of unknowns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NamedRange {
    pub name: &'static str,
    pub start: usize,
    pub end: usize,
}

/// Unknown layout plus the order of the block rows (equations).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BlockLayout {
    pub unknowns: Vec<NamedRange>,
    /// Names of the block rows in storage order.
    pub equations: Vec<&'static str>,
}

impl BlockLayout {
    fn from_sizes(named: &[(&'static str, usize)], equations: Vec<&'static str>) -> Self {
        let mut start = 0;
        let unknowns = named
            .iter()
            .map(|&(name, len)| {
                let r = NamedRange {
                    name,
                    start,
                    end: start + len,
                };
                start += len;
                r
            })
            .collect();
        Self {
            unknowns,
            equations,
        }
    }

    pub fn range(&self, name: &str) -> Option<Range<usize>> {
        self.unknowns
            .iter()
            .find(|r| r.name == name)
            .map(|r| r.start..r.end)
    }

    pub fn total_dim(&self) -> usize {
        self.unknowns.last().map_or(0, |r| r.end)
    }
}

#[derive(Debug, Clone)]
pub struct BlockSystem<T> {
    pub kind: SystemKind,
    pub layout: BlockLayout,
    pub operator: BlockOperator<T>,
    pub rhs: Vec<T>,
}

impl<T: Real> BlockSystem<T> {
    pub fn total_dim(&self) -> usize {
        self.rhs.len()
    }
}

/// Blocks of the extended system.
#[derive(Debug, Clone)]
pub struct ExtendedBlocks<T> {
    pub n: usize,
    pub m_b: usize,
    pub beta: T,
    /// `[[K, omega], [omega^T, 0]]`
    pub k_e: Arc<CsrMatrix<T>>,
    /// `blkdiag(M, 0)`
    pub m_e: Arc<CsrMatrix<T>>,
    /// `(n+1) x (m_B+1)`, only the last column `(omega; 0)` is nonzero.
    pub z_e: Arc<CsrMatrix<T>>,
    /// `blkdiag(beta M_b, omega^T 1)`
    pub m_be: Arc<CsrMatrix<T>>,
    /// `blkdiag(N_b, 0)`
    pub n_be: Arc<CsrMatrix<T>>,
}

fn check_beta<T: Real>(beta: T) -> Result<()> {
    if !(beta > T::zero()) {
        return Err(Error::InvalidArgument(format!(
            "beta must be positive, got {beta}"
        )));
    }
    Ok(())
}

/// `[[K, omega], [omega^T, 0]]`
pub fn extended_stiffness<T: Real>(ops: &FemOperators<T>) -> CsrMatrix<T> {
    let n = ops.n;
    let mut b = TripletBuilder::with_capacity(n + 1, n + 1, ops.stiffness.nnz() + 2 * n);
    ops.stiffness.push_into(&mut b, 0, 0, T::one(), false);
    for (i, &w) in ops.omega.iter().enumerate() {
        b.push(i, n, w);
        b.push(n, i, w);
    }
    b.build()
}

impl<T: Real> ExtendedBlocks<T> {
    pub fn new(ops: &FemOperators<T>, beta: T) -> Result<Self> {
        check_beta(beta)?;
        let (n, m_b) = (ops.n, ops.m_b);
        let k_e = extended_stiffness(ops);

        let mut b = TripletBuilder::with_capacity(n + 1, n + 1, ops.mass.nnz());
        ops.mass.push_into(&mut b, 0, 0, T::one(), false);
        let m_e = b.build();

        let mut b = TripletBuilder::with_capacity(n + 1, m_b + 1, n);
        for (i, &w) in ops.omega.iter().enumerate() {
            b.push(i, m_b, w);
        }
        let z_e = b.build();

        let mut b = TripletBuilder::with_capacity(m_b + 1, m_b + 1, ops.boundary_mass.nnz() + 1);
        ops.boundary_mass.push_into(&mut b, 0, 0, beta, false);
        b.push(m_b, m_b, ops.omega.iter().copied().sum());
        let m_be = b.build();

        let mut b = TripletBuilder::with_capacity(n + 1, m_b + 1, ops.boundary_coupling.nnz());
        ops.boundary_coupling
            .push_into(&mut b, 0, 0, T::one(), false);
        let n_be = b.build();

        Ok(Self {
            n,
            m_b,
            beta,
            k_e: Arc::new(k_e),
            m_e: Arc::new(m_e),
            z_e: Arc::new(z_e),
            m_be: Arc::new(m_be),
            n_be: Arc::new(n_be),
        })
    }

    pub fn total_dim(&self) -> usize {
        2 * (self.n + 1) + self.m_b + 1
    }

    /// Block sizes `(n+1, m_B+1, n+1)` of `(y_e, u_e, p_e)`.
    pub fn block_sizes(&self) -> [usize; 3] {
        [self.n + 1, self.m_b + 1, self.n + 1]
    }

    /// Symmetric extended operator with block rows `(y_e, u_e, p_e)`:
    /// `[[M_e, Z_e, K_e], [Z_e^T, M_be, -N_be^T], [K_e, -N_be, 0]]`.
    pub fn extended_operator(&self) -> BlockOperator<T> {
        let neg = -T::one();
        let sizes = self.block_sizes().to_vec();
        BlockOperator::new(
            sizes.clone(),
            sizes,
            vec![
                vec![
                    Some(BlockRef::new(&self.m_e)),
                    Some(BlockRef::new(&self.z_e)),
                    Some(BlockRef::new(&self.k_e)),
                ],
                vec![
                    Some(BlockRef::new(&self.z_e).transposed()),
                    Some(BlockRef::new(&self.m_be)),
                    Some(BlockRef::new(&self.n_be).transposed().scaled(neg)),
                ],
                vec![
                    Some(BlockRef::new(&self.k_e)),
                    Some(BlockRef::new(&self.n_be).scaled(neg)),
                    None,
                ],
            ],
        )
        .expect("extended block sizes are consistent")
    }

    /// The extended operator with its block rows in reverse order:
    /// `[[K_e, -N_be, 0], [Z_e^T, M_be, -N_be^T], [M_e, Z_e, K_e]]`.
    pub fn permuted_operator(&self) -> BlockOperator<T> {
        self.extended_operator()
            .permute_block_rows(&PERMUTED_ROW_ORDER)
    }
}

/// Block-row order of the permuted system relative to the extended one.
pub const PERMUTED_ROW_ORDER: [usize; 3] = [2, 1, 0];

fn extended_layout(n: usize, m_b: usize, kind: SystemKind) -> BlockLayout {
    let equations = match kind {
        SystemKind::Permuted => vec!["state", "control", "adjoint"],
        _ => vec!["adjoint", "control", "state"],
    };
    BlockLayout::from_sizes(
        &[
            ("y0", n),
            ("lambda", 1),
            ("u", m_b),
            ("c", 1),
            ("p", n),
            ("pi", 1),
        ],
        equations,
    )
}

/// `[[M, 0, K], [0, beta M_b, -N_b^T], [K, -N_b, 0]]` with rhs `(b, 0, f)`.
pub fn build_original_kkt<T: Real>(ops: &FemOperators<T>, beta: T) -> Result<BlockSystem<T>> {
    check_beta(beta)?;
    let (n, m_b) = (ops.n, ops.m_b);
    let mass = Arc::new(ops.mass.clone());
    let stiff = Arc::new(ops.stiffness.clone());
    let mb = Arc::new(ops.boundary_mass.clone());
    let nb = Arc::new(ops.boundary_coupling.clone());
    let sizes = vec![n, m_b, n];
    let operator = BlockOperator::new(
        sizes.clone(),
        sizes,
        vec![
            vec![
                Some(BlockRef::new(&mass)),
                None,
                Some(BlockRef::new(&stiff)),
            ],
            vec![
                None,
                Some(BlockRef::new(&mb).scaled(beta)),
                Some(BlockRef::new(&nb).transposed().scaled(-T::one())),
            ],
            vec![
                Some(BlockRef::new(&stiff)),
                Some(BlockRef::new(&nb).scaled(-T::one())),
                None,
            ],
        ],
    )?;
    let mut rhs = Vec::with_capacity(2 * n + m_b);
    rhs.extend_from_slice(&ops.desired_load);
    rhs.extend(std::iter::repeat(T::zero()).take(m_b));
    rhs.extend_from_slice(&ops.source_load);
    Ok(BlockSystem {
        kind: SystemKind::Original,
        layout: BlockLayout::from_sizes(
            &[("y", n), ("u", m_b), ("p", n)],
            vec!["adjoint", "control", "state"],
        ),
        operator,
        rhs,
    })
}

/// Right-hand side blocks `b_e = (b, 0)`, `z_e = (0, b^T 1)`, `f_e = (f, 0)`.
fn extended_rhs_blocks<T: Real>(ops: &FemOperators<T>) -> [Vec<T>; 3] {
    let mut b_e = ops.desired_load.clone();
    b_e.push(T::zero());
    let mut z_e = vec![T::zero(); ops.m_b];
    z_e.push(ops.desired_load.iter().copied().sum());
    let mut f_e = ops.source_load.clone();
    f_e.push(T::zero());
    [b_e, z_e, f_e]
}

/// The symmetric extended system with rhs `(b_e, z_e, f_e)`.
pub fn build_extended<T: Real>(
    ops: &FemOperators<T>,
    beta: T,
) -> Result<(BlockSystem<T>, ExtendedBlocks<T>)> {
    let blocks = ExtendedBlocks::new(ops, beta)?;
    let rhs = extended_rhs_blocks(ops).concat();
    let system = BlockSystem {
        kind: SystemKind::Extended,
        layout: extended_layout(ops.n, ops.m_b, SystemKind::Extended),
        operator: blocks.extended_operator(),
        rhs,
    };
    Ok((system, blocks))
}

/// The row-permuted extended system with rhs `(f_e, z_e, b_e)`.
pub fn build_extended_permuted<T: Real>(
    ops: &FemOperators<T>,
    beta: T,
) -> Result<(BlockSystem<T>, ExtendedBlocks<T>)> {
    let blocks = ExtendedBlocks::new(ops, beta)?;
    let [b_e, z_e, f_e] = extended_rhs_blocks(ops);
    let rhs = [f_e, z_e, b_e].concat();
    let system = BlockSystem {
        kind: SystemKind::Permuted,
        layout: extended_layout(ops.n, ops.m_b, SystemKind::Permuted),
        operator: blocks.permuted_operator(),
        rhs,
    };
    Ok((system, blocks))
}

/// Solves the regularized Neumann problem `K y0 + lambda omega = f + N_b u`,
/// `omega^T y0 = 0`.
pub fn solve_regularized_neumann<T: Real>(ops: &FemOperators<T>, u: &[T]) -> Result<(Vec<T>, T)> {
    if u.len() != ops.m_b {
        return Err(Error::InvalidArgument(format!(
            "control has length {}, expected {}",
            u.len(),
            ops.m_b
        )));
    }
    let k_e = extended_stiffness(ops);
    let lu = factorize(&k_e, FactorKind::SymmetricIndefinite)
        .map_err(|e| Error::Internal(format!("extended stiffness factorization failed: {e}")))?;
    let mut rhs = ops.source_load.clone();
    ops.boundary_coupling.mul_vec_add(T::one(), u, &mut rhs);
    rhs.push(T::zero());
    let mut x = lu.solve(&rhs)?;
    let lambda = x.pop().expect("non-empty solution");
    Ok((x, lambda))
}

/// Physical solution recovered from an extended solve.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalSolution<T> {
    pub y: Vec<T>,
    pub u: Vec<T>,
    pub p: Vec<T>,
    pub y0: Vec<T>,
    pub lambda: T,
    pub c: T,
    pub pi: T,
}

/// Splits an extended (or permuted) solution and forms `y = y0 + c 1`.
pub fn recover_solution<T: Real>(n: usize, m_b: usize, x: &[T]) -> Result<PhysicalSolution<T>> {
    let layout = extended_layout(n, m_b, SystemKind::Extended);
    if x.len() != layout.total_dim() {
        return Err(Error::InvalidArgument(format!(
            "extended solution has length {}, expected {}",
            x.len(),
            layout.total_dim()
        )));
    }
    let get = |name: &str| &x[layout.range(name).expect("known block")];
    let y0 = get("y0").to_vec();
    let c = get("c")[0];
    Ok(PhysicalSolution {
        y: y0.iter().map(|&v| v + c).collect(),
        u: get("u").to_vec(),
        p: get("p").to_vec(),
        y0,
        lambda: get("lambda")[0],
        c,
        pi: get("pi")[0],
    })
}

/// Relative residual `||rhs - A x|| / ||rhs||` of a system.
pub fn relative_residual<T: Real>(system: &BlockSystem<T>, x: &[T]) -> T {
    let ax = system.operator.apply_vec(x);
    let r: Vec<T> = system.rhs.iter().zip(&ax).map(|(&b, &a)| b - a).collect();
    let nb = norm2(&system.rhs);
    if nb > T::zero() {
        norm2(&r) / nb
    } else {
        norm2(&r)
    }
}

/// Relative residual of `(y, u, p)` in the original KKT system.
pub fn original_kkt_residual<T: Real>(
    ops: &FemOperators<T>,
    beta: T,
    sol: &PhysicalSolution<T>,
) -> Result<T> {
    let system = build_original_kkt(ops, beta)?;
    let x = [sol.y.as_slice(), &sol.u, &sol.p].concat();
    Ok(relative_residual(&system, &x))
}
