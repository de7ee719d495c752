//! Dense verification of the spectrum of the permuted, triangularly
//! preconditioned extended system.
//!
//! With the partition `K_e^-1 = [[J, v], [v^T, a]]`, the preconditioned
//! matrix `P2^-1 A_perm` has eigenvalue 1 except for the `m_B` values
//! `mu = 1 + nu`, where `nu` solves the symmetric generalized problem
//! `G x = nu M_be x`, `G = N_be^T K_e^-1 M_e K_e^-1 N_be`.

use serde::{Deserialize, Serialize};

use crate::assembly::{assemble_operators, FemOperators, ProblemInstance};
use crate::dense::{check_dense_size, DenseMatrix};
use crate::error::{Error, Result};
use crate::mesh::build_mesh;
use crate::precond::{block_triangular_operator, SchurBlock};
use crate::scalar::{dot, norm2, Real};
use crate::systems::{build_original_kkt, ExtendedBlocks};

/// Relative rank cutoff used for kernel dimensions.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Dense copies of the extended blocks together with `K_e^-1`.
#[derive(Debug, Clone)]
pub struct DenseBlocks<T> {
    pub n: usize,
    pub m_b: usize,
    pub k_e: DenseMatrix<T>,
    pub k_e_inv: DenseMatrix<T>,
    pub m_e: DenseMatrix<T>,
    pub z_e: DenseMatrix<T>,
    pub m_be: DenseMatrix<T>,
    pub n_be: DenseMatrix<T>,
}

impl<T: Real> DenseBlocks<T> {
    pub fn new(blocks: &ExtendedBlocks<T>) -> Result<Self> {
        check_dense_size(blocks.total_dim())?;
        let k_e = DenseMatrix::from_sparse(&blocks.k_e)?;
        let k_e_inv = k_e.inverse()?;
        Ok(Self {
            n: blocks.n,
            m_b: blocks.m_b,
            k_e,
            k_e_inv,
            m_e: DenseMatrix::from_sparse(&blocks.m_e)?,
            z_e: DenseMatrix::from_sparse(&blocks.z_e)?,
            m_be: DenseMatrix::from_sparse(&blocks.m_be)?,
            n_be: DenseMatrix::from_sparse(&blocks.n_be)?,
        })
    }
}

/// `K_e^-1 = [[J, v], [v^T, a]]`.
#[derive(Debug, Clone)]
pub struct KeInverseBlocks<T> {
    pub j: DenseMatrix<T>,
    pub v: Vec<T>,
    pub a: T,
}

/// Residuals of the identities satisfied by the blocks of `K_e^-1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityResiduals {
    /// `||omega^T J||_2 / ||J||_F`
    pub omega_t_j: f64,
    /// `|omega^T v - 1|`
    pub omega_t_v_minus_one: f64,
    /// `max |Z_e^T K_e^-1 N_be|`
    pub zt_kinv_nbe: f64,
    /// `max |K_e K_e^-1 - I|`
    pub inverse: f64,
}

impl IdentityResiduals {
    pub fn max(&self) -> f64 {
        self.omega_t_j
            .max(self.omega_t_v_minus_one)
            .max(self.zt_kinv_nbe)
            .max(self.inverse)
    }
}

/// Outcome of the reciprocal-eigenvalue check between `K_e` and `J`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReciprocalCheck {
    /// Eigenpairs of `K_e` with vanishing last component and nonzero eigenvalue.
    pub pairs_checked: usize,
    /// Worst `||J x1 - x1/lambda|| / ||x1/lambda||`.
    pub max_mismatch: f64,
    /// Worst `|omega^T x1| / ||x1||`.
    pub max_omega_dot: f64,
    /// Worst `|v^T x1| / ||x1||`.
    pub max_v_dot: f64,
}

/// Spectral summary of one `(N, beta)` point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    pub grid_side: usize,
    pub n: usize,
    pub m_b: usize,
    pub total_dim: usize,
    pub h: f64,
    pub beta: f64,
    pub identity_residuals: IdentityResiduals,
    /// The `m_B` eigenvalues different from one, ascending.
    pub nontrivial_mu: Vec<f64>,
    pub mu_min: f64,
    pub mu_max: f64,
    /// Geometric multiplicity of the eigenvalue 1, `dim ker(A_perm - P2)`.
    pub multiplicity_one: usize,
    /// Algebraic multiplicity implied by the eigenvalue count, `total_dim - m_B`.
    pub algebraic_multiplicity_one: usize,
    pub trace: f64,
    /// `|trace(P2^-1 A_perm) - total_dim - sum(mu_i - 1)|`.
    pub trace_gap: f64,
    pub reciprocal_check: ReciprocalCheck,
}

impl SpectralReport {
    /// Computes every check for the extended system of `ops`.
    pub fn compute<T: Real>(
        grid_side: usize,
        ops: &FemOperators<T>,
        blocks: &ExtendedBlocks<T>,
    ) -> Result<Self> {
        let dense = DenseBlocks::new(blocks)?;
        let inv = split_inverse(&dense);
        let identity_residuals = identity_residuals_dense(&dense, &inv, &ops.omega);
        let mu = nontrivial_from_dense(&dense)?;
        let nontrivial = drop_constant_mode(&mu.values, &mu.constant_mode);
        let (multiplicity_one, trace) = multiplicity_and_trace(blocks)?;
        let total_dim = blocks.total_dim();
        let excess: T = nontrivial.iter().map(|&m| m - T::one()).sum();
        let trace_gap = (trace - T::from_usize_lossy(total_dim) - excess).abs();
        let reciprocal_check = reciprocal_dense(&dense, &inv, &ops.omega)?;
        let nontrivial_mu: Vec<f64> = nontrivial.iter().map(|m| m.as_f64()).collect();
        Ok(Self {
            grid_side,
            n: blocks.n,
            m_b: blocks.m_b,
            total_dim,
            h: ops.h.as_f64(),
            beta: blocks.beta.as_f64(),
            identity_residuals,
            mu_min: nontrivial_mu.first().copied().unwrap_or(1.0),
            mu_max: nontrivial_mu.last().copied().unwrap_or(1.0),
            nontrivial_mu,
            multiplicity_one,
            algebraic_multiplicity_one: total_dim - blocks.m_b,
            trace: trace.as_f64(),
            trace_gap: trace_gap.as_f64(),
            reciprocal_check,
        })
    }

    /// `index,mu` rows of the nontrivial eigenvalues.
    pub fn mu_csv(&self) -> String {
        let mut out = String::from("index,mu\n");
        for (i, m) in self.nontrivial_mu.iter().enumerate() {
            out.push_str(&format!("{i},{m:.16e}\n"));
        }
        out
    }
}

/// Builds the extended system on an `N x N` grid and computes its report.
/// The spectrum does not depend on the data, so Example 1 is used.
pub fn spectral_report<T: Real>(grid_side: usize, beta: T) -> Result<SpectralReport> {
    let mesh = build_mesh::<T>(grid_side)?;
    check_dense_size(2 * (mesh.n() + 1) + mesh.m_b() + 1)?;
    let problem = ProblemInstance::example1(beta)?;
    let ops = assemble_operators(&mesh, &problem);
    let blocks = ExtendedBlocks::new(&ops, beta)?;
    SpectralReport::compute(grid_side, &ops, &blocks)
}

fn split_inverse<T: Real>(dense: &DenseBlocks<T>) -> KeInverseBlocks<T> {
    let n = dense.n;
    let inv = &dense.k_e_inv;
    KeInverseBlocks {
        j: inv.block(0, 0, n, n),
        v: (0..n).map(|i| inv[(i, n)]).collect(),
        a: inv[(n, n)],
    }
}

fn frobenius<T: Real>(a: &DenseMatrix<T>) -> T {
    norm2(a.as_slice())
}

fn identity_residuals_dense<T: Real>(
    dense: &DenseBlocks<T>,
    inv: &KeInverseBlocks<T>,
    omega: &[T],
) -> IdentityResiduals {
    let n = dense.n;
    let omega_t_j: Vec<T> = (0..n).map(|c| dot(omega, &inv.j.column(c))).collect();
    let zt = dense
        .z_e
        .transpose()
        .matmul(&dense.k_e_inv)
        .matmul(&dense.n_be);
    let id = dense
        .k_e
        .matmul(&dense.k_e_inv)
        .sub(&DenseMatrix::identity(n + 1));
    IdentityResiduals {
        omega_t_j: (norm2(&omega_t_j) / frobenius(&inv.j)).as_f64(),
        omega_t_v_minus_one: (dot(omega, &inv.v) - T::one()).abs().as_f64(),
        zt_kinv_nbe: zt.max_abs().as_f64(),
        inverse: id.max_abs().as_f64(),
    }
}

/// Partitions `K_e^-1` and evaluates the identities its blocks satisfy.
pub fn compute_ke_inverse_blocks<T: Real>(
    ops: &FemOperators<T>,
    blocks: &ExtendedBlocks<T>,
) -> Result<(KeInverseBlocks<T>, IdentityResiduals)> {
    let dense = DenseBlocks::new(blocks)?;
    let inv = split_inverse(&dense);
    let res = identity_residuals_dense(&dense, &inv, &ops.omega);
    Ok((inv, res))
}

struct MuSpectrum<T> {
    values: Vec<T>,
    /// `true` for the eigenvector concentrated on the constant-shift unknown.
    constant_mode: Vec<bool>,
}

/// Solves `L X = B` for lower triangular `L`.
fn lower_solve<T: Real>(l: &DenseMatrix<T>, b: &DenseMatrix<T>) -> DenseMatrix<T> {
    let (n, m) = (l.rows(), b.cols());
    let mut x = b.clone();
    for c in 0..m {
        for i in 0..n {
            let mut s = x[(i, c)];
            for k in 0..i {
                s -= l[(i, k)] * x[(k, c)];
            }
            x[(i, c)] = s / l[(i, i)];
        }
    }
    x
}

fn nontrivial_from_dense<T: Real>(dense: &DenseBlocks<T>) -> Result<MuSpectrum<T>> {
    let w = dense.k_e_inv.matmul(&dense.n_be);
    let g = w.transpose().matmul(&dense.m_e).matmul(&w);
    let l = dense.m_be.cholesky()?;
    let x = lower_solve(&l, &g);
    let c = lower_solve(&l, &x.transpose());
    let eig = c.symmetric_eigen()?;
    let last = dense.m_b;
    let half = T::lit(0.5);
    Ok(MuSpectrum {
        values: eig.values.iter().map(|&nu| T::one() + nu).collect(),
        constant_mode: (0..eig.values.len())
            .map(|k| eig.vectors[(last, k)].abs() > half)
            .collect(),
    })
}

fn drop_constant_mode<T: Real>(values: &[T], constant: &[bool]) -> Vec<T> {
    values
        .iter()
        .zip(constant)
        .filter(|(_, &c)| !c)
        .map(|(&v, _)| v)
        .collect()
}

/// The `m_B + 1` values `mu = 1 + nu` of `G x = nu M_be x`, ascending.
/// The constant-shift unknown contributes `mu = 1` exactly.
pub fn nontrivial_eigenvalues<T: Real>(blocks: &ExtendedBlocks<T>) -> Result<Vec<T>> {
    let dense = DenseBlocks::new(blocks)?;
    Ok(nontrivial_from_dense(&dense)?.values)
}

fn multiplicity_and_trace<T: Real>(blocks: &ExtendedBlocks<T>) -> Result<(usize, T)> {
    let a = DenseMatrix::from_sparse(&blocks.permuted_operator().assemble())?;
    let p = DenseMatrix::from_sparse(
        &block_triangular_operator(blocks, SchurBlock::ExtendedStiffness).assemble(),
    )?;
    let total = a.rows();
    let multiplicity = total - a.sub(&p).rank(T::lit(RANK_TOLERANCE));
    let lu = p.lu()?;
    let trace = (0..total).map(|j| lu.solve(&a.column(j))[j]).sum();
    Ok((multiplicity, trace))
}

/// `(dim ker(A_perm - P2), trace_gap)` where the gap compares
/// `trace(P2^-1 A_perm)` with `total_dim + sum(mu_i - 1)` over the `m_B`
/// nontrivial eigenvalues.
pub fn multiplicity_and_trace_check<T: Real>(blocks: &ExtendedBlocks<T>) -> Result<(usize, T)> {
    let dense = DenseBlocks::new(blocks)?;
    let mu = nontrivial_from_dense(&dense)?;
    let excess: T = drop_constant_mode(&mu.values, &mu.constant_mode)
        .iter()
        .map(|&m| m - T::one())
        .sum();
    let (multiplicity, trace) = multiplicity_and_trace(blocks)?;
    Ok((
        multiplicity,
        (trace - T::from_usize_lossy(blocks.total_dim()) - excess).abs(),
    ))
}

fn reciprocal_dense<T: Real>(
    dense: &DenseBlocks<T>,
    inv: &KeInverseBlocks<T>,
    omega: &[T],
) -> Result<ReciprocalCheck> {
    let n = dense.n;
    let eig = dense.k_e.symmetric_eigen()?;
    let scale = eig.values.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    let mut out = ReciprocalCheck {
        pairs_checked: 0,
        max_mismatch: 0.0,
        max_omega_dot: 0.0,
        max_v_dot: 0.0,
    };
    for (k, &lambda) in eig.values.iter().enumerate() {
        let x = eig.vectors.column(k);
        let (x1, x2) = (&x[..n], x[n]);
        let nx1 = norm2(x1);
        if !(x2.abs() <= T::lit(1e-10) * nx1) || lambda.abs() <= T::lit(1e-10) * scale {
            continue;
        }
        let jx = inv.j.mul_vec(x1);
        let diff: Vec<T> = jx.iter().zip(x1).map(|(&a, &b)| a - b / lambda).collect();
        let mismatch = norm2(&diff) / (nx1 / lambda.abs());
        out.pairs_checked += 1;
        out.max_mismatch = out.max_mismatch.max(mismatch.as_f64());
        out.max_omega_dot = out.max_omega_dot.max((dot(omega, x1).abs() / nx1).as_f64());
        out.max_v_dot = out.max_v_dot.max((dot(&inv.v, x1).abs() / nx1).as_f64());
    }
    Ok(out)
}

/// Checks `J x1 = x1 / lambda` on the eigenpairs of `K_e` whose last
/// component vanishes.
pub fn reciprocal_eigen_check<T: Real>(
    ops: &FemOperators<T>,
    blocks: &ExtendedBlocks<T>,
) -> Result<ReciprocalCheck> {
    let dense = DenseBlocks::new(blocks)?;
    let inv = split_inverse(&dense);
    reciprocal_dense(&dense, &inv, &ops.omega)
}

/// One swept point of the bound fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundPoint {
    pub grid_side: usize,
    pub h: f64,
    pub beta: f64,
    pub mu_min: f64,
    pub mu_max: f64,
    /// `(mu_min - 1) / (h^3 / beta)`
    pub lower_ratio: f64,
    /// `(mu_max - 1) / (h^-1 / beta)`
    pub upper_ratio: f64,
}

/// Fitted constants of `1 + c h^3/beta <= mu <= 1 + d h^-1/beta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundFit {
    pub points: Vec<BoundPoint>,
    /// Least-squares slope of `mu_min - 1` against `h^3/beta`.
    pub c_fit: f64,
    /// Least-squares slope of `mu_max - 1` against `h^-1/beta`.
    pub d_fit: f64,
    /// Relative 2-norm residuals of the two fits.
    pub c_fit_residual: f64,
    pub d_fit_residual: f64,
    /// Conservative constants: the smallest lower and largest upper ratio.
    pub c_lo: f64,
    pub d_hi: f64,
    /// Every point lies in `[1 + c_lo h^3/beta, 1 + d_hi h^-1/beta]`.
    pub inclusion_holds: bool,
}

fn slope_through_origin(x: &[f64], y: &[f64]) -> (f64, f64) {
    let sxx: f64 = x.iter().map(|a| a * a).sum();
    let c = x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() / sxx;
    let res: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - c * a).powi(2))
        .sum::<f64>()
        .sqrt();
    let ny: f64 = y.iter().map(|b| b * b).sum::<f64>().sqrt();
    (c, res / ny)
}

/// Fits the eigenvalue bound constants over a sweep of reports covering at
/// least three mesh sizes and three values of `beta`.
pub fn bound_fit(reports: &[SpectralReport]) -> Result<BoundFit> {
    let mut grids: Vec<usize> = reports.iter().map(|r| r.grid_side).collect();
    grids.sort_unstable();
    grids.dedup();
    let mut betas: Vec<f64> = reports.iter().map(|r| r.beta).collect();
    betas.sort_by(f64::total_cmp);
    betas.dedup();
    if grids.len() < 3 || betas.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "bound fit needs at least 3 mesh sizes and 3 beta values, got {} and {}",
            grids.len(),
            betas.len()
        )));
    }
    let points: Vec<BoundPoint> = reports
        .iter()
        .map(|r| BoundPoint {
            grid_side: r.grid_side,
            h: r.h,
            beta: r.beta,
            mu_min: r.mu_min,
            mu_max: r.mu_max,
            lower_ratio: (r.mu_min - 1.0) / (r.h.powi(3) / r.beta),
            upper_ratio: (r.mu_max - 1.0) / (1.0 / (r.h * r.beta)),
        })
        .collect();
    let xl: Vec<f64> = points.iter().map(|p| p.h.powi(3) / p.beta).collect();
    let yl: Vec<f64> = points.iter().map(|p| p.mu_min - 1.0).collect();
    let xu: Vec<f64> = points.iter().map(|p| 1.0 / (p.h * p.beta)).collect();
    let yu: Vec<f64> = points.iter().map(|p| p.mu_max - 1.0).collect();
    let (c_fit, c_fit_residual) = slope_through_origin(&xl, &yl);
    let (d_fit, d_fit_residual) = slope_through_origin(&xu, &yu);
    let c_lo = points
        .iter()
        .map(|p| p.lower_ratio)
        .fold(f64::INFINITY, f64::min);
    let d_hi = points
        .iter()
        .map(|p| p.upper_ratio)
        .fold(f64::NEG_INFINITY, f64::max);
    let inclusion_holds = reports
        .iter()
        .zip(xl.iter().zip(&xu))
        .all(|(r, (&lo, &hi))| {
            let (lower, upper) = (1.0 + c_lo * lo, 1.0 + d_hi * hi);
            r.nontrivial_mu
                .iter()
                .all(|&m| m >= lower * (1.0 - 1e-12) && m <= upper * (1.0 + 1e-12))
        });
    Ok(BoundFit {
        points,
        c_fit,
        d_fit,
        c_fit_residual,
        d_fit_residual,
        c_lo,
        d_hi,
        inclusion_holds,
    })
}

/// Dense Schur complement `S` of the permuted system and its approximation
/// `S_hat = [[M_be, -N_be^T], [0, K_e]]`.
pub fn schur_complements<T: Real>(
    blocks: &ExtendedBlocks<T>,
) -> Result<(DenseMatrix<T>, DenseMatrix<T>)> {
    let d = DenseBlocks::new(blocks)?;
    let (n1, m1) = (d.n + 1, d.m_b + 1);
    let kinv_nbe = d.k_e_inv.matmul(&d.n_be);
    let mut s_hat = DenseMatrix::zeros(m1 + n1, m1 + n1);
    s_hat.set_block(0, 0, &d.m_be);
    s_hat.set_block(0, m1, &d.n_be.transpose().scaled(-T::one()));
    s_hat.set_block(m1, m1, &d.k_e);
    let mut s = s_hat.clone();
    let top = d
        .m_be
        .sub(&d.z_e.transpose().matmul(&kinv_nbe).scaled(-T::one()));
    s.set_block(0, 0, &top);
    let bottom = d.z_e.sub(&d.m_e.matmul(&kinv_nbe).scaled(-T::one()));
    s.set_block(m1, 0, &bottom);
    Ok((s, s_hat))
}

/// `[[K_e, [-N_be, 0]], [0, S]]`: the triangular preconditioner with the
/// exact Schur complement, in the permuted ordering.
pub fn exact_schur_triangular<T: Real>(blocks: &ExtendedBlocks<T>) -> Result<DenseMatrix<T>> {
    let (s, _) = schur_complements(blocks)?;
    let d = DenseBlocks::new(blocks)?;
    let n1 = d.n + 1;
    let total = blocks.total_dim();
    let mut p = DenseMatrix::zeros(total, total);
    p.set_block(0, 0, &d.k_e);
    p.set_block(0, n1, &d.n_be.scaled(-T::one()));
    p.set_block(n1, n1, &s);
    Ok(p)
}

/// `blkdiag(A, B A^-1 B^T)` for the original KKT system with
/// `A = blkdiag(M, beta M_b)` and `B = [K, -N_b]`.
pub fn optimal_block_diagonal<T: Real>(ops: &FemOperators<T>, beta: T) -> Result<DenseMatrix<T>> {
    let (n, m_b) = (ops.n, ops.m_b);
    check_dense_size(2 * n + m_b)?;
    let kkt = DenseMatrix::from_sparse(&build_original_kkt(ops, beta)?.operator.assemble())?;
    let a = kkt.block(0, 0, n + m_b, n + m_b);
    let b = kkt.block(n + m_b, 0, n, n + m_b);
    let schur = b.matmul(&a.inverse()?).matmul(&b.transpose());
    let mut p = DenseMatrix::zeros(2 * n + m_b, 2 * n + m_b);
    p.set_block(0, 0, &a);
    p.set_block(n + m_b, n + m_b, &schur);
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(grid: usize, beta: f64) -> (FemOperators<f64>, ExtendedBlocks<f64>) {
        let mesh = build_mesh::<f64>(grid).unwrap();
        let ops = assemble_operators(&mesh, &ProblemInstance::example1(beta).unwrap());
        let blocks = ExtendedBlocks::new(&ops, beta).unwrap();
        (ops, blocks)
    }

    #[test]
    fn inverse_block_identities() {
        let (ops, blocks) = setup(5, 1e-2);
        let (inv, res) = compute_ke_inverse_blocks(&ops, &blocks).unwrap();
        assert_eq!(inv.j.rows(), ops.n);
        assert!(res.max() < 1e-10, "{res:?}");
        assert!(inv.a.abs() < 1e-10, "a = {}", inv.a);
    }

    #[test]
    fn eigenvalues_are_at_least_one_and_include_the_constant_mode() {
        let (_, blocks) = setup(4, 1e-4);
        let mu = nontrivial_eigenvalues(&blocks).unwrap();
        assert_eq!(mu.len(), blocks.m_b + 1);
        assert!(mu.iter().all(|&m| m >= 1.0 - 1e-10));
        assert!(mu.iter().any(|&m| m == 1.0));
    }

    #[test]
    fn spread_grows_as_beta_shrinks() {
        let a = spectral_report(4, 1e-2).unwrap();
        let b = spectral_report(4, 1e-4).unwrap();
        assert!(b.mu_max > a.mu_max);
        assert_eq!(a.nontrivial_mu.len(), a.m_b);
    }

    #[test]
    fn trace_accounting_closes() {
        let r = spectral_report(5, 1e-2).unwrap();
        assert!(r.trace_gap <= 1e-8 * r.total_dim as f64, "{}", r.trace_gap);
        assert!(r.multiplicity_one >= r.n + 1);
    }

    #[test]
    fn reciprocal_relation_holds_on_checked_pairs() {
        let (ops, blocks) = setup(5, 1e-2);
        let rc = reciprocal_eigen_check(&ops, &blocks).unwrap();
        assert!(rc.pairs_checked > 0);
        assert!(rc.max_mismatch < 1e-8, "{rc:?}");
        assert!(rc.max_omega_dot < 1e-8 && rc.max_v_dot < 1e-8, "{rc:?}");
    }

    #[test]
    fn bound_fit_needs_enough_points() {
        let r = spectral_report(4, 1e-2).unwrap();
        assert!(bound_fit(&[r]).is_err());
    }

    #[test]
    fn dense_path_refuses_large_meshes() {
        assert!(matches!(
            spectral_report(40, 1e-2),
            Err(Error::TooLarge { .. })
        ));
    }
}
