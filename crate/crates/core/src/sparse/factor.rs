//! Sparse direct factorizations.
//!
//! Both factorizations first apply a symmetric bandwidth-reducing permutation
//! (reverse Cuthill–McKee by default). Cholesky is up-looking with an
//! elimination tree; LU is left-looking (Gilbert–Peierls) with threshold
//! partial pivoting that prefers the diagonal.

use serde::{Deserialize, Serialize};

use super::ordering::reverse_cuthill_mckee;
use super::CsrMatrix;
use crate::error::{Error, Result};
use crate::scalar::Real;

const NONE: usize = usize::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FactorKind {
    /// `A = L L^T`; fails with [`Error::NotPositiveDefinite`] on a non-positive pivot.
    Cholesky,
    /// `P A = L U` with partial pivoting.
    GeneralLu,
    /// Symmetric indefinite matrices; realized by the pivoted LU.
    SymmetricIndefinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FillOrdering {
    Natural,
    ReverseCuthillMcKee,
}

#[derive(Debug, Clone, Copy)]
pub struct FactorOptions {
    pub ordering: FillOrdering,
    /// A diagonal entry is accepted as LU pivot when it is at least this
    /// fraction of the largest candidate. `1.0` is plain partial pivoting.
    pub pivot_threshold: f64,
}

impl Default for FactorOptions {
    fn default() -> Self {
        Self {
            ordering: FillOrdering::ReverseCuthillMcKee,
            pivot_threshold: 1.0,
        }
    }
}

#[derive(Debug, Clone)]
struct CscFactor<T> {
    col_offsets: Vec<usize>,
    row_indices: Vec<usize>,
    values: Vec<T>,
}

impl<T> CscFactor<T> {
    fn col(&self, j: usize) -> (&[usize], &[T]) {
        let (s, e) = (self.col_offsets[j], self.col_offsets[j + 1]);
        (&self.row_indices[s..e], &self.values[s..e])
    }
}

#[derive(Debug, Clone)]
enum Factors<T> {
    /// Lower factor; the diagonal is the first entry of every column.
    Cholesky(CscFactor<T>),
    /// Unit lower factor (diagonal first, stored as 1) and upper factor
    /// (diagonal last). `row_perm[k]` is the permuted row pivoted at step `k`.
    Lu {
        l: CscFactor<T>,
        u: CscFactor<T>,
        row_perm: Vec<usize>,
    },
}

/// An immutable factorization; `solve` may be called concurrently.
#[derive(Debug, Clone)]
pub struct Factorization<T> {
    kind: FactorKind,
    dim: usize,
    /// `perm[new] = old` symmetric fill-reducing permutation.
    perm: Vec<usize>,
    factors: Factors<T>,
}

pub fn factorize<T: Real>(a: &CsrMatrix<T>, kind: FactorKind) -> Result<Factorization<T>> {
    factorize_with(a, kind, FactorOptions::default())
}

pub fn factorize_with<T: Real>(
    a: &CsrMatrix<T>,
    kind: FactorKind,
    opts: FactorOptions,
) -> Result<Factorization<T>> {
    if a.rows() != a.cols() {
        return Err(Error::InvalidArgument(format!(
            "factorize: matrix is {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    let n = a.rows();
    let perm = match opts.ordering {
        FillOrdering::Natural => (0..n).collect(),
        FillOrdering::ReverseCuthillMcKee => reverse_cuthill_mckee(a),
    };
    let c = a.permute_symmetric(&perm);
    let factors = match kind {
        FactorKind::Cholesky => Factors::Cholesky(cholesky(&c, &perm)?),
        FactorKind::GeneralLu | FactorKind::SymmetricIndefinite => {
            lu(&c, T::lit(opts.pivot_threshold))?
        }
    };
    Ok(Factorization {
        kind,
        dim: n,
        perm,
        factors,
    })
}

impl<T: Real> Factorization<T> {
    pub fn kind(&self) -> FactorKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Stored entries in the factors.
    pub fn factor_nnz(&self) -> usize {
        match &self.factors {
            Factors::Cholesky(l) => l.values.len(),
            Factors::Lu { l, u, .. } => l.values.len() + u.values.len(),
        }
    }

    pub fn solve(&self, rhs: &[T]) -> Result<Vec<T>> {
        if rhs.len() != self.dim {
            return Err(Error::InvalidArgument(format!(
                "solve: factorization has dimension {}, rhs has length {}",
                self.dim,
                rhs.len()
            )));
        }
        let mut x = vec![T::zero(); self.dim];
        self.solve_into(rhs, &mut x);
        Ok(x)
    }

    /// `x = A^{-1} rhs`; lengths are only debug-checked.
    pub fn solve_into(&self, rhs: &[T], x: &mut [T]) {
        debug_assert_eq!(rhs.len(), self.dim);
        debug_assert_eq!(x.len(), self.dim);
        let n = self.dim;
        let mut y: Vec<T> = match &self.factors {
            Factors::Cholesky(_) => self.perm.iter().map(|&old| rhs[old]).collect(),
            Factors::Lu { row_perm, .. } => row_perm.iter().map(|&r| rhs[self.perm[r]]).collect(),
        };
        match &self.factors {
            Factors::Cholesky(l) => {
                for j in 0..n {
                    let (rows, vals) = l.col(j);
                    y[j] /= vals[0];
                    let yj = y[j];
                    for (&i, &v) in rows[1..].iter().zip(&vals[1..]) {
                        y[i] -= v * yj;
                    }
                }
                for j in (0..n).rev() {
                    let (rows, vals) = l.col(j);
                    let mut acc = y[j];
                    for (&i, &v) in rows[1..].iter().zip(&vals[1..]) {
                        acc -= v * y[i];
                    }
                    y[j] = acc / vals[0];
                }
            }
            Factors::Lu { l, u, .. } => {
                for j in 0..n {
                    let (rows, vals) = l.col(j);
                    let yj = y[j];
                    if yj != T::zero() {
                        for (&i, &v) in rows[1..].iter().zip(&vals[1..]) {
                            y[i] -= v * yj;
                        }
                    }
                }
                for j in (0..n).rev() {
                    let (rows, vals) = u.col(j);
                    let last = rows.len() - 1;
                    y[j] /= vals[last];
                    let yj = y[j];
                    if yj != T::zero() {
                        for (&i, &v) in rows[..last].iter().zip(&vals[..last]) {
                            y[i] -= v * yj;
                        }
                    }
                }
            }
        }
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
    }
}

fn cholesky<T: Real>(c: &CsrMatrix<T>, perm: &[usize]) -> Result<CscFactor<T>> {
    let n = c.rows();
    let tiny = T::epsilon() * T::from_usize_lossy(n.max(1));
    let mut parent = vec![NONE; n];
    let mut ancestor = vec![NONE; n];
    for k in 0..n {
        let (cols, _) = c.row(k);
        for &j in cols.iter().take_while(|&&j| j < k) {
            let mut i = j;
            while i != NONE && i < k {
                let next = ancestor[i];
                ancestor[i] = k;
                if next == NONE {
                    parent[i] = k;
                }
                i = next;
            }
        }
    }

    let mut col_rows: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut col_vals: Vec<Vec<T>> = vec![Vec::new(); n];
    let mut x = vec![T::zero(); n];
    let mut flag = vec![NONE; n];
    let mut path = Vec::new();
    let mut pattern = Vec::new();
    for k in 0..n {
        pattern.clear();
        flag[k] = k;
        let (cols, vals) = c.row(k);
        for (&j, &v) in cols.iter().zip(vals) {
            if j > k {
                break;
            }
            x[j] = v;
            if j == k {
                continue;
            }
            let mut i = j;
            path.clear();
            while flag[i] != k {
                path.push(i);
                flag[i] = k;
                i = parent[i];
            }
            pattern.extend_from_slice(&path);
        }
        // etree parents have larger indices than their children, so
        // ascending order processes every column after the ones updating it
        pattern.sort_unstable();
        let mut d = x[k];
        let akk = d.abs();
        x[k] = T::zero();
        for &j in &pattern {
            let lkj = x[j] / col_vals[j][0];
            x[j] = T::zero();
            for (&i, &lij) in col_rows[j][1..].iter().zip(&col_vals[j][1..]) {
                x[i] -= lij * lkj;
            }
            d -= lkj * lkj;
            col_rows[j].push(k);
            col_vals[j].push(lkj);
        }
        // a pivot lost to cancellation means A is singular up to rounding
        if !(d > tiny * akk) {
            return Err(Error::NotPositiveDefinite {
                column: perm[k],
                pivot: d.as_f64(),
            });
        }
        col_rows[k].push(k);
        col_vals[k].push(d.sqrt());
    }
    Ok(flatten(col_rows, col_vals))
}

fn flatten<T: Real>(col_rows: Vec<Vec<usize>>, col_vals: Vec<Vec<T>>) -> CscFactor<T> {
    let nnz = col_rows.iter().map(Vec::len).sum();
    let mut col_offsets = Vec::with_capacity(col_rows.len() + 1);
    let mut row_indices = Vec::with_capacity(nnz);
    let mut values = Vec::with_capacity(nnz);
    col_offsets.push(0);
    for (r, v) in col_rows.into_iter().zip(col_vals) {
        row_indices.extend(r);
        values.extend(v);
        col_offsets.push(row_indices.len());
    }
    CscFactor {
        col_offsets,
        row_indices,
        values,
    }
}

fn lu<T: Real>(c: &CsrMatrix<T>, threshold: T) -> Result<Factors<T>> {
    let n = c.rows();
    let tiny = T::epsilon() * T::from_usize_lossy(n.max(1)) * c.max_abs();
    let ct = c.transpose();
    let mut lp = Vec::with_capacity(n + 1);
    let mut li: Vec<usize> = Vec::new();
    let mut lx: Vec<T> = Vec::new();
    let mut up = Vec::with_capacity(n + 1);
    let mut ui: Vec<usize> = Vec::new();
    let mut ux: Vec<T> = Vec::new();
    let mut pinv = vec![NONE; n];
    let mut x = vec![T::zero(); n];
    let mut marked = vec![false; n];
    let mut post = Vec::new();
    let mut stack: Vec<(usize, usize)> = Vec::new();

    for k in 0..n {
        lp.push(li.len());
        up.push(ui.len());
        let (a_rows, a_vals) = ct.row(k);

        // Nonzero pattern of L \ A(:,k), reverse postorder of a DFS over L.
        post.clear();
        for &start in a_rows {
            if marked[start] {
                continue;
            }
            marked[start] = true;
            stack.push((start, col_start(&lp, &pinv, start)));
            while let Some(&mut (node, ref mut pos)) = stack.last_mut() {
                let end = col_end(&lp, &pinv, node);
                let mut pushed = None;
                while *pos < end {
                    let i = li[*pos];
                    *pos += 1;
                    if !marked[i] {
                        pushed = Some(i);
                        break;
                    }
                }
                match pushed {
                    Some(i) => {
                        marked[i] = true;
                        stack.push((i, col_start(&lp, &pinv, i)));
                    }
                    None => {
                        post.push(node);
                        stack.pop();
                    }
                }
            }
        }

        for (&i, &v) in a_rows.iter().zip(a_vals) {
            x[i] = v;
        }
        for &j in post.iter().rev() {
            let jj = pinv[j];
            if jj == NONE {
                continue;
            }
            let xj = x[j];
            if xj == T::zero() {
                continue;
            }
            for q in lp[jj] + 1..lp[jj + 1] {
                x[li[q]] -= lx[q] * xj;
            }
        }

        let mut ipiv = NONE;
        let mut amax = T::zero();
        for &i in post.iter().rev() {
            if pinv[i] == NONE {
                let a = x[i].abs();
                if ipiv == NONE || a > amax {
                    amax = a;
                    ipiv = i;
                }
            } else {
                ui.push(pinv[i]);
                ux.push(x[i]);
            }
        }
        if ipiv == NONE || !(amax > tiny) {
            return Err(Error::Singular(k));
        }
        if pinv[k] == NONE && x[k].abs() >= threshold * amax && marked[k] {
            ipiv = k;
        }
        let pivot = x[ipiv];
        ui.push(k);
        ux.push(pivot);
        pinv[ipiv] = k;
        li.push(ipiv);
        lx.push(T::one());
        for &i in post.iter().rev() {
            if pinv[i] == NONE {
                li.push(i);
                lx.push(x[i] / pivot);
            }
            x[i] = T::zero();
            marked[i] = false;
        }
    }
    lp.push(li.len());
    up.push(ui.len());
    for r in li.iter_mut() {
        *r = pinv[*r];
    }
    let mut row_perm = vec![0usize; n];
    for (row, &pos) in pinv.iter().enumerate() {
        row_perm[pos] = row;
    }
    // U columns hold earlier pivots in DFS order; keep the diagonal last.
    Ok(Factors::Lu {
        l: CscFactor {
            col_offsets: lp,
            row_indices: li,
            values: lx,
        },
        u: CscFactor {
            col_offsets: up,
            row_indices: ui,
            values: ux,
        },
        row_perm,
    })
}

#[inline]
fn col_start(lp: &[usize], pinv: &[usize], row: usize) -> usize {
    match pinv[row] {
        NONE => 0,
        j => lp[j],
    }
}

#[inline]
fn col_end(lp: &[usize], pinv: &[usize], row: usize) -> usize {
    match pinv[row] {
        NONE => 0,
        j => lp[j + 1],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::TripletBuilder;

    fn residual(a: &CsrMatrix<f64>, x: &[f64], b: &[f64]) -> f64 {
        let ax = a.spmv(x).unwrap();
        let r: f64 = ax
            .iter()
            .zip(b)
            .map(|(p, q)| (p - q).powi(2))
            .sum::<f64>()
            .sqrt();
        r / b.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    #[test]
    fn identity_solves() {
        let i = CsrMatrix::<f64>::identity(6);
        let b = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        for kind in [FactorKind::Cholesky, FactorKind::GeneralLu] {
            assert_eq!(factorize(&i, kind).unwrap().solve(&b).unwrap(), b);
        }
    }

    #[test]
    fn two_by_two_hand_inverse() {
        let a = CsrMatrix::from_dense(2, 2, &[2.0f64, 1.0, 1.0, 2.0]);
        for kind in [
            FactorKind::Cholesky,
            FactorKind::GeneralLu,
            FactorKind::SymmetricIndefinite,
        ] {
            let x = factorize(&a, kind).unwrap().solve(&[1.0, 1.0]).unwrap();
            assert!((x[0] - 1.0 / 3.0).abs() < 1e-15 && (x[1] - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = CsrMatrix::from_dense(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        match factorize(&a, FactorKind::Cholesky) {
            Err(Error::NotPositiveDefinite { .. }) => {}
            other => panic!("expected definiteness violation, got {other:?}"),
        }
    }

    #[test]
    fn lu_needs_pivoting() {
        // zero leading diagonal forces a row interchange
        let a = CsrMatrix::from_dense(3, 3, &[0.0, 2.0, 1.0, 1.0, 1.0, 0.0, 3.0, 0.0, 1.0]);
        let b = [1.0, 2.0, 3.0];
        let f = factorize_with(
            &a,
            FactorKind::GeneralLu,
            FactorOptions {
                ordering: FillOrdering::Natural,
                pivot_threshold: 1.0,
            },
        )
        .unwrap();
        assert!(residual(&a, &f.solve(&b).unwrap(), &b) < 1e-15);
    }

    #[test]
    fn lu_reports_singular() {
        let a = CsrMatrix::from_dense(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(matches!(
            factorize(&a, FactorKind::GeneralLu),
            Err(Error::Singular(_))
        ));
    }

    #[test]
    fn bordered_singular_block_factorizes() {
        // [[L, 1], [1^T, 0]] with L a path-graph Laplacian (singular)
        let n = 30;
        let mut b = TripletBuilder::new(n + 1, n + 1);
        for i in 0..n {
            let deg = if i == 0 || i == n - 1 { 1.0 } else { 2.0 };
            b.push(i, i, deg);
            if i + 1 < n {
                b.push(i, i + 1, -1.0);
                b.push(i + 1, i, -1.0);
            }
            b.push(i, n, 1.0 / n as f64);
            b.push(n, i, 1.0 / n as f64);
        }
        let a = b.build();
        let rhs: Vec<f64> = (0..=n).map(|i| (i as f64 * 0.37).sin()).collect();
        let f = factorize(&a, FactorKind::SymmetricIndefinite).unwrap();
        assert!(residual(&a, &f.solve(&rhs).unwrap(), &rhs) < 1e-12);
    }

    #[test]
    fn solve_rejects_wrong_length() {
        let f = factorize(&CsrMatrix::<f64>::identity(3), FactorKind::Cholesky).unwrap();
        assert!(f.solve(&[1.0]).is_err());
    }
}
