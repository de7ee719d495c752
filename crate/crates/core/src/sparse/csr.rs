use crate::error::{Error, Result};
use crate::scalar::Real;

/// Compressed sparse row matrix.
///
/// Column indices are sorted and unique within each row. Explicit zeros are
/// allowed (assembly keeps structurally symmetric patterns), NaN is not.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix<T> {
    rows: usize,
    cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<T>,
}

/// Coordinate-format accumulator; duplicates are summed on conversion.
#[derive(Debug, Clone)]
pub struct TripletBuilder<T> {
    rows: usize,
    cols: usize,
    entries: Vec<(usize, usize, T)>,
}

impl<T: Real> TripletBuilder<T> {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            entries: Vec::new(),
        }
    }

    pub fn with_capacity(rows: usize, cols: usize, capacity: usize) -> Self {
        Self {
            rows,
            cols,
            entries: Vec::with_capacity(capacity),
        }
    }

    /// Adds `value` at `(row, col)`. Panics when out of bounds.
    pub fn push(&mut self, row: usize, col: usize, value: T) {
        assert!(
            row < self.rows && col < self.cols,
            "triplet ({row}, {col}) out of bounds"
        );
        self.entries.push((row, col, value));
    }

    pub fn build(mut self) -> CsrMatrix<T> {
        // stable: duplicates are summed in insertion order, so symmetric
        // contributions pushed in pairs produce bitwise symmetric sums
        self.entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_offsets = vec![0usize; self.rows + 1];
        let mut col_indices = Vec::with_capacity(self.entries.len());
        let mut values: Vec<T> = Vec::with_capacity(self.entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in self.entries {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                row_offsets[r + 1] += 1;
                col_indices.push(c);
                values.push(v);
                last = Some((r, c));
            }
        }
        for i in 0..self.rows {
            row_offsets[i + 1] += row_offsets[i];
        }
        CsrMatrix {
            rows: self.rows,
            cols: self.cols,
            row_offsets,
            col_indices,
            values,
        }
    }
}

impl<T: Real> CsrMatrix<T> {
    /// Builds a matrix from raw CSR arrays, validating every structural invariant.
    pub fn try_from_parts(
        rows: usize,
        cols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<T>,
    ) -> Result<Self> {
        let m = Self {
            rows,
            cols,
            row_offsets,
            col_indices,
            values,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.row_offsets.len() != self.rows + 1 {
            return bad(format!(
                "row_offsets has length {}, expected {}",
                self.row_offsets.len(),
                self.rows + 1
            ));
        }
        if self.row_offsets[0] != 0 || *self.row_offsets.last().unwrap() != self.col_indices.len() {
            return bad("row_offsets must start at 0 and end at nnz".into());
        }
        if self.col_indices.len() != self.values.len() {
            return bad("col_indices and values differ in length".into());
        }
        for i in 0..self.rows {
            let (s, e) = (self.row_offsets[i], self.row_offsets[i + 1]);
            if s > e {
                return bad(format!("row_offsets decrease at row {i}"));
            }
            let cols = &self.col_indices[s..e];
            if cols.windows(2).any(|w| w[0] >= w[1]) {
                return bad(format!("column indices of row {i} not strictly increasing"));
            }
            if cols.last().is_some_and(|&c| c >= self.cols) {
                return bad(format!("column index out of range in row {i}"));
            }
        }
        if self.values.iter().any(|v| v.is_nan()) {
            return bad("matrix stores a NaN value".into());
        }
        Ok(())
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            row_offsets: vec![0; rows + 1],
            col_indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![T::one(); n])
    }

    pub fn from_diagonal(diag: &[T]) -> Self {
        let n = diag.len();
        Self {
            rows: n,
            cols: n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: diag.to_vec(),
        }
    }

    /// Dense row-major input; exact zeros are dropped.
    pub fn from_dense(rows: usize, cols: usize, data: &[T]) -> Self {
        assert_eq!(data.len(), rows * cols);
        let mut b = TripletBuilder::new(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                let v = data[i * cols + j];
                if v != T::zero() {
                    b.push(i, j, v);
                }
            }
        }
        b.build()
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Column indices and values of row `i`.
    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[T]) {
        let (s, e) = (self.row_offsets[i], self.row_offsets[i + 1]);
        (&self.col_indices[s..e], &self.values[s..e])
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(p) => vals[p],
            Err(_) => T::zero(),
        }
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.rows).flat_map(move |i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).map(move |(&j, &v)| (i, j, v))
        })
    }

    /// Checked matrix-vector product.
    pub fn spmv(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.cols {
            return Err(Error::InvalidArgument(format!(
                "spmv: matrix is {}x{}, vector has length {}",
                self.rows,
                self.cols,
                x.len()
            )));
        }
        let mut y = vec![T::zero(); self.rows];
        self.mul_vec_into(x, &mut y);
        Ok(y)
    }

    /// `y = A x`. Lengths are only debug-checked.
    #[inline]
    pub fn mul_vec_into(&self, x: &[T], y: &mut [T]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(y.len(), self.rows);
        for (i, yi) in y.iter_mut().enumerate() {
            let (s, e) = (self.row_offsets[i], self.row_offsets[i + 1]);
            let mut acc = T::zero();
            for p in s..e {
                acc += self.values[p] * x[self.col_indices[p]];
            }
            *yi = acc;
        }
    }

    /// `y += alpha A x`
    #[inline]
    pub fn mul_vec_add(&self, alpha: T, x: &[T], y: &mut [T]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(y.len(), self.rows);
        for (i, yi) in y.iter_mut().enumerate() {
            let (s, e) = (self.row_offsets[i], self.row_offsets[i + 1]);
            let mut acc = T::zero();
            for p in s..e {
                acc += self.values[p] * x[self.col_indices[p]];
            }
            *yi += alpha * acc;
        }
    }

    /// `y += alpha A^T x`
    pub fn transpose_mul_vec_add(&self, alpha: T, x: &[T], y: &mut [T]) {
        debug_assert_eq!(x.len(), self.rows);
        debug_assert_eq!(y.len(), self.cols);
        for (i, &xi) in x.iter().enumerate() {
            if xi == T::zero() {
                continue;
            }
            let axi = alpha * xi;
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                y[j] += axi * v;
            }
        }
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.cols + 1];
        for &j in &self.col_indices {
            counts[j + 1] += 1;
        }
        for j in 0..self.cols {
            counts[j + 1] += counts[j];
        }
        let row_offsets = counts.clone();
        let mut next = counts;
        let mut col_indices = vec![0usize; self.nnz()];
        let mut values = vec![T::zero(); self.nnz()];
        for i in 0..self.rows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                let p = next[j];
                col_indices[p] = i;
                values[p] = v;
                next[j] += 1;
            }
        }
        Self {
            rows: self.cols,
            cols: self.rows,
            row_offsets,
            col_indices,
            values,
        }
    }

    pub fn scaled(&self, alpha: T) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= alpha);
        out
    }

    /// `alpha A + beta B` on the union pattern.
    pub fn add(&self, alpha: T, other: &Self, beta: T) -> Result<Self> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::InvalidArgument(format!(
                "add: {}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut b = TripletBuilder::with_capacity(self.rows, self.cols, self.nnz() + other.nnz());
        for (i, j, v) in self.triplets() {
            b.push(i, j, alpha * v);
        }
        for (i, j, v) in other.triplets() {
            b.push(i, j, beta * v);
        }
        Ok(b.build())
    }

    /// Sparse product `A B`.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::InvalidArgument(format!(
                "matmul: {}x{} times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut acc = vec![T::zero(); other.cols];
        let mut mark = vec![usize::MAX; other.cols];
        let mut pattern = Vec::new();
        let mut row_offsets = vec![0usize];
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        for i in 0..self.rows {
            pattern.clear();
            let (ac, av) = self.row(i);
            for (&k, &a) in ac.iter().zip(av) {
                let (bc, bv) = other.row(k);
                for (&j, &b) in bc.iter().zip(bv) {
                    if mark[j] != i {
                        mark[j] = i;
                        acc[j] = T::zero();
                        pattern.push(j);
                    }
                    acc[j] += a * b;
                }
            }
            pattern.sort_unstable();
            for &j in &pattern {
                col_indices.push(j);
                values.push(acc[j]);
            }
            row_offsets.push(col_indices.len());
        }
        Ok(Self {
            rows: self.rows,
            cols: other.cols,
            row_offsets,
            col_indices,
            values,
        })
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.rows.min(self.cols))
            .map(|i| self.get(i, i))
            .collect()
    }

    pub fn row_sums(&self) -> Vec<T> {
        (0..self.rows)
            .map(|i| self.row(i).1.iter().copied().sum())
            .collect()
    }

    pub fn sum(&self) -> T {
        self.values.iter().copied().sum()
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> T {
        (0..self.rows)
            .map(|i| self.row(i).1.iter().fold(T::zero(), |s, v| s + v.abs()))
            .fold(T::zero(), T::max)
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    /// Largest `|A_ij - A_ji|` over stored entries.
    pub fn symmetry_defect(&self) -> T {
        if self.rows != self.cols {
            return T::infinity();
        }
        self.triplets()
            .map(|(i, j, v)| (v - self.get(j, i)).abs())
            .fold(T::zero(), T::max)
    }

    pub fn is_diagonal(&self) -> bool {
        self.triplets().all(|(i, j, v)| i == j || v == T::zero())
    }

    /// Symmetric permutation `P A P^T` with `perm[new] = old`.
    pub fn permute_symmetric(&self, perm: &[usize]) -> Self {
        assert_eq!(self.rows, self.cols);
        assert_eq!(perm.len(), self.rows);
        let mut inv = vec![0usize; perm.len()];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut b = TripletBuilder::with_capacity(self.rows, self.cols, self.nnz());
        for (i, j, v) in self.triplets() {
            b.push(inv[i], inv[j], v);
        }
        b.build()
    }

    pub fn to_dense(&self) -> Vec<T> {
        let mut d = vec![T::zero(); self.rows * self.cols];
        for (i, j, v) in self.triplets() {
            d[i * self.cols + j] += v;
        }
        d
    }

    /// Embeds the matrix into a larger one at offset `(r0, c0)`.
    pub fn push_into(
        &self,
        builder: &mut TripletBuilder<T>,
        r0: usize,
        c0: usize,
        alpha: T,
        transpose: bool,
    ) {
        for (i, j, v) in self.triplets() {
            if transpose {
                builder.push(r0 + j, c0 + i, alpha * v);
            } else {
                builder.push(r0 + i, c0 + j, alpha * v);
            }
        }
    }

    pub fn cast<U: Real>(&self) -> CsrMatrix<U> {
        CsrMatrix {
            rows: self.rows,
            cols: self.cols,
            row_offsets: self.row_offsets.clone(),
            col_indices: self.col_indices.clone(),
            values: self.values.iter().map(|v| U::lit(v.as_f64())).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> CsrMatrix<f64> {
        let mut b = TripletBuilder::new(3, 4);
        b.push(0, 1, 2.0);
        b.push(2, 3, -1.0);
        b.push(0, 1, 1.0);
        b.push(1, 0, 4.0);
        b.push(2, 0, 5.0);
        b.build()
    }

    #[test]
    fn triplets_sum_duplicates() {
        let a = sample();
        a.validate().unwrap();
        assert_eq!(a.nnz(), 4);
        assert_eq!(a.get(0, 1), 3.0);
        assert_eq!(a.row_offsets(), &[0, 1, 2, 4]);
    }

    #[test]
    fn identity_spmv() {
        let i = CsrMatrix::<f64>::identity(5);
        let x = vec![1.0, -2.0, 3.5, 0.0, 7.0];
        assert_eq!(i.spmv(&x).unwrap(), x);
    }

    #[test]
    fn spmv_dimension_mismatch() {
        let a = sample();
        assert!(matches!(
            a.spmv(&[1.0, 2.0]),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn transpose_matches_dense() {
        let a = sample();
        let t = a.transpose();
        for i in 0..3 {
            for j in 0..4 {
                assert_eq!(a.get(i, j), t.get(j, i));
            }
        }
        let x = [1.0, 2.0, 3.0];
        let mut y = vec![0.0; 4];
        a.transpose_mul_vec_add(1.0, &x, &mut y);
        assert_eq!(y, t.spmv(&x).unwrap());
    }

    #[test]
    fn matmul_matches_dense() {
        let a = sample();
        let p = a.matmul(&a.transpose()).unwrap();
        let d = a.to_dense();
        for i in 0..3 {
            for j in 0..3 {
                let e: f64 = (0..4).map(|k| d[i * 4 + k] * d[j * 4 + k]).sum();
                assert_eq!(p.get(i, j), e);
            }
        }
    }

    #[test]
    fn validation_rejects_bad_parts() {
        assert!(
            CsrMatrix::<f64>::try_from_parts(2, 2, vec![0, 2, 1], vec![0, 1], vec![1.0, 1.0])
                .is_err()
        );
        assert!(
            CsrMatrix::<f64>::try_from_parts(1, 2, vec![0, 2], vec![1, 0], vec![1.0, 1.0]).is_err()
        );
        assert!(
            CsrMatrix::<f64>::try_from_parts(1, 2, vec![0, 1], vec![0], vec![f64::NAN]).is_err()
        );
        assert!(CsrMatrix::<f64>::try_from_parts(1, 2, vec![0, 1], vec![2], vec![1.0]).is_err());
    }

    #[test]
    fn permute_symmetric_roundtrip() {
        let a = CsrMatrix::from_dense(3, 3, &[4.0, 1.0, 0.0, 1.0, 3.0, 2.0, 0.0, 2.0, 5.0]);
        let p = [2, 0, 1];
        let b = a.permute_symmetric(&p);
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(b.get(i, j), a.get(p[i], p[j]));
            }
        }
    }
}
