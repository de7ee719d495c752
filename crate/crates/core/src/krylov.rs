//! Krylov solvers and the Chebyshev-accelerated Jacobi mass solve.
//!
//! Both solvers start from the zero vector. GMRES is full (never restarted)
//! and right-preconditioned, so its monitored residual is the true,
//! unpreconditioned one. MINRES monitors the preconditioned residual and
//! records the true residual alongside.

use std::fmt::Write as _;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dense::{DenseLu, DenseMatrix};
use crate::error::{Error, Result};
use crate::scalar::{axpy, dot, norm2, Real};
use crate::sparse::CsrMatrix;

/// A square linear map applied out of place.
pub trait LinearOperator<T: Real>: Send + Sync {
    fn dim(&self) -> usize;

    /// `y = Op x`; `y` is overwritten.
    fn apply(&self, x: &[T], y: &mut [T]);

    fn apply_vec(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.dim()];
        self.apply(x, &mut y);
        y
    }
}

impl<T: Real> LinearOperator<T> for CsrMatrix<T> {
    fn dim(&self) -> usize {
        assert_eq!(self.rows(), self.cols(), "operator must be square");
        self.rows()
    }

    fn apply(&self, x: &[T], y: &mut [T]) {
        self.mul_vec_into(x, y);
    }
}

impl<T: Real> LinearOperator<T> for DenseMatrix<T> {
    fn dim(&self) -> usize {
        assert_eq!(self.rows(), self.cols(), "operator must be square");
        self.rows()
    }

    fn apply(&self, x: &[T], y: &mut [T]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = dot(self.row(i), x);
        }
    }
}

/// Applies the inverse of the factored matrix.
impl<T: Real> LinearOperator<T> for DenseLu<T> {
    fn dim(&self) -> usize {
        self.dim()
    }

    fn apply(&self, x: &[T], y: &mut [T]) {
        y.copy_from_slice(&self.solve(x));
    }
}

impl<T: Real, Op: LinearOperator<T> + ?Sized> LinearOperator<T> for Arc<Op> {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn apply(&self, x: &[T], y: &mut [T]) {
        (**self).apply(x, y)
    }
}

impl<T: Real, Op: LinearOperator<T> + ?Sized> LinearOperator<T> for &Op {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn apply(&self, x: &[T], y: &mut [T]) {
        (**self).apply(x, y)
    }
}

/// Wraps a closure `(x, y) -> ()` as an operator.
pub struct FnOperator<F> {
    dim: usize,
    f: F,
}

impl<F> FnOperator<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<T: Real, F: Fn(&[T], &mut [T]) + Send + Sync> LinearOperator<T> for FnOperator<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &[T], y: &mut [T]) {
        (self.f)(x, y)
    }
}

/// The identity map, i.e. no preconditioning.
#[derive(Debug, Clone, Copy)]
pub struct IdentityOperator(pub usize);

impl<T: Real> LinearOperator<T> for IdentityOperator {
    fn dim(&self) -> usize {
        self.0
    }

    fn apply(&self, x: &[T], y: &mut [T]) {
        y.copy_from_slice(x);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResidualKind {
    /// `||b - A x|| / ||b||`
    True,
    /// `||r||_{P^-1} / ||b||_{P^-1}`
    Preconditioned,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub solver: String,
    pub iterations: usize,
    /// Relative residual after every iteration, starting with the initial
    /// one; this is the quantity compared against the tolerance.
    pub residual_history: Vec<f64>,
    pub monitored: ResidualKind,
    /// Relative true residuals, recorded when they differ from the monitored
    /// quantity.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub true_residual_history: Vec<f64>,
    pub converged: bool,
    pub tolerance: f64,
    pub wall_time_seconds: f64,
    pub final_true_residual: f64,
}

impl SolveReport {
    /// Residual history as CSV with header `iteration,residual` (plus
    /// `true_residual` when recorded separately).
    pub fn history_csv(&self) -> String {
        let with_true = !self.true_residual_history.is_empty();
        let mut out = String::from(if with_true {
            "iteration,residual,true_residual\n"
        } else {
            "iteration,residual\n"
        });
        for (k, r) in self.residual_history.iter().enumerate() {
            if with_true {
                let t = self
                    .true_residual_history
                    .get(k)
                    .copied()
                    .unwrap_or(f64::NAN);
                let _ = writeln!(out, "{k},{r:.6e},{t:.6e}");
            } else {
                let _ = writeln!(out, "{k},{r:.6e}");
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KrylovOptions {
    pub tol: f64,
    pub maxit: usize,
}

impl Default for KrylovOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            maxit: 500,
        }
    }
}

impl KrylovOptions {
    pub fn new(tol: f64, maxit: usize) -> Self {
        Self { tol, maxit }
    }

    fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "tolerance must be positive, got {}",
                self.tol
            )));
        }
        if self.maxit == 0 {
            return Err(Error::InvalidArgument("maxit must be at least 1".into()));
        }
        Ok(())
    }
}

fn check_dims<T: Real>(
    a: &dyn LinearOperator<T>,
    p: &dyn LinearOperator<T>,
    rhs: &[T],
) -> Result<()> {
    if a.dim() != rhs.len() || p.dim() != rhs.len() {
        return Err(Error::InvalidArgument(format!(
            "dimension mismatch: operator {}, preconditioner {}, rhs {}",
            a.dim(),
            p.dim(),
            rhs.len()
        )));
    }
    Ok(())
}

fn relative_true_residual<T: Real>(
    a: &dyn LinearOperator<T>,
    x: &[T],
    rhs: &[T],
    rhs_norm: T,
) -> T {
    let mut r = a.apply_vec(x);
    for (ri, &bi) in r.iter_mut().zip(rhs) {
        *ri = bi - *ri;
    }
    if rhs_norm > T::zero() {
        norm2(&r) / rhs_norm
    } else {
        norm2(&r)
    }
}

fn givens<T: Real>(a: T, b: T) -> (T, T) {
    if b == T::zero() {
        (T::one(), T::zero())
    } else {
        let r = a.hypot(b);
        (a / r, b / r)
    }
}

/// Full right-preconditioned GMRES: solves `A x = rhs` through
/// `A P^-1 t = rhs`, `x = P^-1 t`.
///
/// The iteration stops once the true relative residual meets `tol`. When the
/// recurrence residual claims convergence but the recomputed residual does not
/// agree, iterating continues.
pub fn gmres<T: Real>(
    a: &dyn LinearOperator<T>,
    precond: &dyn LinearOperator<T>,
    rhs: &[T],
    opts: KrylovOptions,
) -> Result<(Vec<T>, SolveReport)> {
    opts.validate()?;
    check_dims(a, precond, rhs)?;
    let start = Instant::now();
    let n = rhs.len();
    let tol = T::lit(opts.tol);
    let beta = norm2(rhs);
    let mut report = SolveReport {
        solver: "gmres".into(),
        iterations: 0,
        residual_history: vec![1.0],
        monitored: ResidualKind::True,
        true_residual_history: Vec::new(),
        converged: false,
        tolerance: opts.tol,
        wall_time_seconds: 0.0,
        final_true_residual: 1.0,
    };
    if beta == T::zero() {
        report.residual_history = vec![0.0];
        report.converged = true;
        report.final_true_residual = 0.0;
        report.wall_time_seconds = start.elapsed().as_secs_f64();
        return Ok((vec![T::zero(); n], report));
    }

    let mut basis: Vec<Vec<T>> = vec![rhs.iter().map(|&v| v / beta).collect()];
    // Hessenberg columns after rotation (upper triangular part)
    let mut r_cols: Vec<Vec<T>> = Vec::new();
    let mut rotations: Vec<(T, T)> = Vec::new();
    let mut g = vec![beta];
    let mut z = vec![T::zero(); n];
    let mut w = vec![T::zero(); n];
    let mut zs: Vec<Vec<T>> = Vec::new();

    let assemble = |r_cols: &[Vec<T>], g: &[T], basis: &[Vec<T>]| -> Vec<T> {
        let k = r_cols.len();
        let mut y = vec![T::zero(); k];
        for i in (0..k).rev() {
            let mut s = g[i];
            for j in i + 1..k {
                s -= r_cols[j][i] * y[j];
            }
            y[i] = s / r_cols[i][i];
        }
        let mut t = vec![T::zero(); n];
        for (yj, vj) in y.iter().zip(basis) {
            axpy(*yj, vj, &mut t);
        }
        t
    };

    let mut x = vec![T::zero(); n];
    for k in 0..opts.maxit {
        precond.apply(&basis[k], &mut z);
        a.apply(&z, &mut w);
        zs.push(z.clone());
        let w_norm0 = norm2(&w);
        let mut h = vec![T::zero(); k + 2];
        // modified Gram-Schmidt with one conditional reorthogonalization pass
        for pass in 0..2 {
            let before = norm2(&w);
            for (i, vi) in basis.iter().enumerate() {
                let c = dot(&w, vi);
                h[i] += c;
                axpy(-c, vi, &mut w);
            }
            if pass == 0 && norm2(&w) > T::lit(0.7) * before {
                break;
            }
        }
        let h_next = norm2(&w);
        h[k + 1] = h_next;
        for (i, &(c, s)) in rotations.iter().enumerate() {
            let (hi, hj) = (h[i], h[i + 1]);
            h[i] = c * hi + s * hj;
            h[i + 1] = -s * hi + c * hj;
        }
        let (c, s) = givens(h[k], h[k + 1]);
        h[k] = c * h[k] + s * h[k + 1];
        h.truncate(k + 1);
        rotations.push((c, s));
        let gk = g[k];
        g[k] = c * gk;
        g.push(-s * gk);
        r_cols.push(h);
        report.iterations = k + 1;
        let implicit = (g[k + 1].abs() / beta).as_f64();
        report.residual_history.push(implicit);

        let breakdown =
            h_next <= T::epsilon() * T::lit(16.0) * w_norm0.max(T::min_positive_value());
        if implicit <= opts.tol || breakdown {
            x = assemble(&r_cols, &g, &zs);
            let true_res = relative_true_residual(a, &x, rhs, beta);
            report.final_true_residual = true_res.as_f64();
            if true_res <= tol {
                *report
                    .residual_history
                    .last_mut()
                    .expect("non-empty history") = true_res.as_f64();
                report.converged = true;
                break;
            }
            if breakdown {
                return Err(Error::Internal(format!(
                    "GMRES breakdown at iteration {} with relative residual {:.3e}",
                    k + 1,
                    true_res.as_f64()
                )));
            }
            log::debug!(
                "gmres: recurrence residual {implicit:.3e} but true residual {:.3e}",
                true_res.as_f64()
            );
        }
        if k + 1 < opts.maxit {
            basis.push(w.iter().map(|&v| v / h_next).collect());
        }
    }
    if !report.converged {
        x = assemble(&r_cols, &g, &zs);
        let true_res = relative_true_residual(a, &x, rhs, beta).as_f64();
        report.final_true_residual = true_res;
        *report
            .residual_history
            .last_mut()
            .expect("non-empty history") = true_res;
    }
    report.wall_time_seconds = start.elapsed().as_secs_f64();
    log::debug!(
        "gmres: {} iterations, converged={}, residual {:.3e}",
        report.iterations,
        report.converged,
        report.final_true_residual
    );
    Ok((x, report))
}

// Deterministic probe vector with entries in (-1, 1).
fn probe_vector<T: Real>(n: usize, seed: u64) -> Vec<T> {
    let mut state = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ 0xD1B5_4A32_D192_ED03;
    (0..n)
        .map(|_| {
            state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
            let mut z = state;
            z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
            z ^= z >> 31;
            T::lit((z >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0)
        })
        .collect()
}

/// Relative mismatch `|x.Ay - y.Ax| / (|x||Ay| + |y||Ax|)` on two fixed probes.
pub fn symmetry_probe<T: Real>(op: &dyn LinearOperator<T>) -> f64 {
    let n = op.dim();
    let x = probe_vector::<T>(n, 1);
    let y = probe_vector::<T>(n, 2);
    let ax = op.apply_vec(&x);
    let ay = op.apply_vec(&y);
    let scale = norm2(&x) * norm2(&ay) + norm2(&y) * norm2(&ax);
    if scale == T::zero() {
        return 0.0;
    }
    ((dot(&x, &ay) - dot(&y, &ax)).abs() / scale).as_f64()
}

/// Preconditioned MINRES. Both `a` and `precond` must be symmetric and the
/// preconditioner positive definite; a deterministic probe rejects operators
/// that are visibly unsymmetric.
pub fn minres<T: Real>(
    a: &dyn LinearOperator<T>,
    precond: &dyn LinearOperator<T>,
    rhs: &[T],
    opts: KrylovOptions,
) -> Result<(Vec<T>, SolveReport)> {
    opts.validate()?;
    check_dims(a, precond, rhs)?;
    let sym_tol = T::epsilon().sqrt().as_f64();
    for op in [a, precond] {
        let defect = symmetry_probe(op);
        if defect > sym_tol {
            return Err(Error::NotSymmetric(defect));
        }
    }
    let start = Instant::now();
    let n = rhs.len();
    let b_norm = norm2(rhs);
    let mut report = SolveReport {
        solver: "minres".into(),
        iterations: 0,
        residual_history: vec![1.0],
        monitored: ResidualKind::Preconditioned,
        true_residual_history: vec![1.0],
        converged: false,
        tolerance: opts.tol,
        wall_time_seconds: 0.0,
        final_true_residual: 1.0,
    };
    let mut x = vec![T::zero(); n];
    if b_norm == T::zero() {
        report.residual_history = vec![0.0];
        report.true_residual_history = vec![0.0];
        report.converged = true;
        report.final_true_residual = 0.0;
        return Ok((x, report));
    }

    let mut v_prev = vec![T::zero(); n];
    let mut v = rhs.to_vec();
    let mut z = precond.apply_vec(&v);
    let gamma_sq = dot(&z, &v);
    if !(gamma_sq > T::zero()) {
        return Err(Error::InvalidArgument(
            "MINRES preconditioner is not positive definite".into(),
        ));
    }
    let mut gamma = gamma_sq.sqrt();
    let gamma1 = gamma;
    let mut eta = gamma;
    let (mut c_prev, mut c) = (T::one(), T::one());
    let (mut s_prev, mut s) = (T::zero(), T::zero());
    let mut w_prev = vec![T::zero(); n];
    let mut w = vec![T::zero(); n];
    let mut az = vec![T::zero(); n];
    let mut v_next = vec![T::zero(); n];

    for j in 0..opts.maxit {
        for (zi, vi) in z.iter_mut().zip(v.iter_mut()) {
            *zi /= gamma;
            *vi /= gamma;
        }
        a.apply(&z, &mut az);
        let delta = dot(&az, &z);
        for i in 0..n {
            v_next[i] = az[i] - delta * v[i] - gamma * v_prev[i];
        }
        let z_next = precond.apply_vec(&v_next);
        let gamma_next_sq = dot(&z_next, &v_next);
        if gamma_next_sq < T::zero() {
            return Err(Error::InvalidArgument(
                "MINRES preconditioner is not positive definite".into(),
            ));
        }
        let gamma_next = gamma_next_sq.sqrt();

        let alpha0 = c * delta - c_prev * s * gamma;
        let alpha1 = alpha0.hypot(gamma_next);
        let alpha2 = s * delta + c_prev * c * gamma;
        let alpha3 = s_prev * gamma;
        if alpha1 == T::zero() {
            return Err(Error::Internal(format!(
                "MINRES breakdown at iteration {}",
                j + 1
            )));
        }
        let c_next = alpha0 / alpha1;
        let s_next = gamma_next / alpha1;
        let mut w_next = vec![T::zero(); n];
        for i in 0..n {
            w_next[i] = (z[i] - alpha3 * w_prev[i] - alpha2 * w[i]) / alpha1;
        }
        axpy(c_next * eta, &w_next, &mut x);
        eta = -s_next * eta;

        report.iterations = j + 1;
        let prec_res = (eta.abs() / gamma1).as_f64();
        report.residual_history.push(prec_res);
        let true_res = relative_true_residual(a, &x, rhs, b_norm).as_f64();
        report.true_residual_history.push(true_res);
        report.final_true_residual = true_res;
        if prec_res <= opts.tol {
            report.converged = true;
            break;
        }
        if gamma_next == T::zero() {
            // invariant subspace found; the iterate is exact in exact arithmetic
            report.converged = true;
            break;
        }

        std::mem::swap(&mut w_prev, &mut w);
        w = w_next;
        std::mem::swap(&mut v_prev, &mut v);
        std::mem::swap(&mut v, &mut v_next);
        z = z_next;
        gamma = gamma_next;
        c_prev = c;
        c = c_next;
        s_prev = s;
        s = s_next;
    }
    report.wall_time_seconds = start.elapsed().as_secs_f64();
    log::debug!(
        "minres: {} iterations, converged={}, true residual {:.3e}",
        report.iterations,
        report.converged,
        report.final_true_residual
    );
    Ok((x, report))
}

/// Fixed number of Jacobi-preconditioned Chebyshev steps for an SPD matrix
/// whose Jacobi-scaled spectrum lies in `[lo, hi]`.
///
/// The result is a fixed polynomial in `D^-1 M` applied to `D^-1 rhs`, hence
/// linear, symmetric and positive definite.
#[derive(Debug, Clone)]
pub struct ChebyshevMass<T> {
    matrix: Arc<CsrMatrix<T>>,
    inv_diag: Vec<T>,
    steps: usize,
    lo: T,
    hi: T,
}

impl<T: Real> ChebyshevMass<T> {
    /// Default interval `[1/2, 2]` for P1 mass matrices; a diagonal matrix
    /// gets the degenerate interval `[1, 1]`, which makes one step exact.
    pub fn new(matrix: Arc<CsrMatrix<T>>, steps: usize) -> Result<Self> {
        let (lo, hi) = if matrix.is_diagonal() {
            (T::one(), T::one())
        } else {
            (T::lit(0.5), T::lit(2.0))
        };
        Self::with_interval(matrix, steps, lo, hi)
    }

    pub fn with_interval(matrix: Arc<CsrMatrix<T>>, steps: usize, lo: T, hi: T) -> Result<Self> {
        if steps == 0 {
            return Err(Error::InvalidArgument(
                "Chebyshev needs at least one step".into(),
            ));
        }
        if matrix.rows() != matrix.cols() {
            return Err(Error::InvalidArgument(
                "Chebyshev matrix must be square".into(),
            ));
        }
        if !(lo > T::zero() && hi >= lo) {
            return Err(Error::InvalidArgument(format!(
                "invalid Chebyshev interval [{lo}, {hi}]"
            )));
        }
        let diag = matrix.diagonal();
        if let Some(i) = diag.iter().position(|&d| !(d > T::zero())) {
            return Err(Error::NotPositiveDefinite {
                column: i,
                pivot: diag[i].as_f64(),
            });
        }
        let inv_diag = diag.iter().map(|&d| T::one() / d).collect();
        Ok(Self {
            matrix,
            inv_diag,
            steps,
            lo,
            hi,
        })
    }

    pub fn steps(&self) -> usize {
        self.steps
    }
}

impl<T: Real> LinearOperator<T> for ChebyshevMass<T> {
    fn dim(&self) -> usize {
        self.inv_diag.len()
    }

    fn apply(&self, rhs: &[T], x: &mut [T]) {
        let theta = (self.hi + self.lo) * T::lit(0.5);
        let delta = (self.hi - self.lo) * T::lit(0.5);
        let mut r: Vec<T> = rhs
            .iter()
            .zip(&self.inv_diag)
            .map(|(&b, &d)| b * d)
            .collect();
        let mut d: Vec<T> = r.iter().map(|&v| v / theta).collect();
        x.iter_mut().for_each(|v| *v = T::zero());
        let mut md = vec![T::zero(); r.len()];
        let sigma = if delta > T::zero() {
            theta / delta
        } else {
            T::infinity()
        };
        let mut rho = T::one() / sigma;
        for k in 0..self.steps {
            axpy(T::one(), &d, x);
            if k + 1 == self.steps {
                break;
            }
            self.matrix.mul_vec_into(&d, &mut md);
            for ((ri, &mi), &di) in r.iter_mut().zip(&md).zip(&self.inv_diag) {
                *ri -= mi * di;
            }
            if delta > T::zero() {
                let rho_next = T::one() / (T::lit(2.0) * sigma - rho);
                let c_d = rho_next * rho;
                let c_r = T::lit(2.0) * rho_next / delta;
                for (di, &ri) in d.iter_mut().zip(&r) {
                    *di = c_d * *di + c_r * ri;
                }
                rho = rho_next;
            } else {
                for (di, &ri) in d.iter_mut().zip(&r) {
                    *di = ri / theta;
                }
            }
        }
    }
}
