//! Compressed sparse row matrices and a small dense Cholesky factorization.

use crate::error::{invalid, Error, Result};
use crate::exec::Exec;

/// Sparse matrix in CSR layout with sorted, duplicate-free column indices.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Build from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: impl IntoIterator<Item = (usize, usize, f64)>) -> Self {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nrows];
        for (i, j, v) in triplets {
            assert!(i < nrows && j < ncols, "triplet ({i}, {j}) out of bounds");
            rows[i].push((j, v));
        }
        Self::from_rows(ncols, rows)
    }

    /// Build from per-row `(col, value)` lists; duplicates are summed.
    pub fn from_rows(ncols: usize, rows: Vec<Vec<(usize, f64)>>) -> Self {
        let nrows = rows.len();
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(j, _)| j);
            let mut last: Option<usize> = None;
            for (j, v) in row {
                if last == Some(j) {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_idx.push(j);
                    values.push(v);
                    last = Some(j);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            row_ptr: vec![0; nrows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Column indices and values of row `i`.
    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    /// Entry `(i, j)`, zero if not stored.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    /// Largest absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.nrows)
            .map(|i| self.row(i).1.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `y = A x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.mul_vec_into(x, &mut y, Exec::Serial);
        y
    }

    /// `y = A x`, rows distributed according to `exec`.
    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64], exec: Exec) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        const ROWS: usize = 2048;
        exec.chunks(y, ROWS, |c, out| {
            let base = c * ROWS;
            for (k, yi) in out.iter_mut().enumerate() {
                *yi = self.row_dot(base + k, x);
            }
        });
    }

    #[inline]
    pub fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        let (cols, vals) = self.row(i);
        cols.iter().zip(vals).map(|(&j, &v)| v * x[j]).sum()
    }

    /// `xᵀ A x`.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        assert_eq!(self.nrows, self.ncols);
        (0..self.nrows).map(|i| x[i] * self.row_dot(i, x)).sum()
    }

    pub fn scale(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= c);
        out
    }

    /// `a·self + b·other`.
    pub fn lin_comb(&self, a: f64, other: &CsrMatrix, b: f64) -> Self {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let rows = (0..self.nrows)
            .map(|i| {
                let (c1, v1) = self.row(i);
                let (c2, v2) = other.row(i);
                c1.iter()
                    .zip(v1)
                    .map(|(&j, &v)| (j, a * v))
                    .chain(c2.iter().zip(v2).map(|(&j, &v)| (j, b * v)))
                    .collect()
            })
            .collect();
        Self::from_rows(self.ncols, rows)
    }

    /// Kronecker product: entry `(i·rb + k, j·cb + l) = A_ij B_kl`.
    pub fn kron(a: &CsrMatrix, b: &CsrMatrix) -> Self {
        let (rb, cb) = (b.nrows, b.ncols);
        let nrows = a.nrows * rb;
        let ncols = a.ncols * cb;
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::with_capacity(a.nnz() * b.nnz());
        let mut values = Vec::with_capacity(a.nnz() * b.nnz());
        row_ptr.push(0);
        for i in 0..a.nrows {
            let (ac, av) = a.row(i);
            for k in 0..rb {
                let (bc, bv) = b.row(k);
                for (&j, &x) in ac.iter().zip(av) {
                    for (&l, &y) in bc.iter().zip(bv) {
                        col_idx.push(j * cb + l);
                        values.push(x * y);
                    }
                }
                row_ptr.push(col_idx.len());
            }
        }
        Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn transpose(&self) -> Self {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.ncols];
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                rows[j].push((i, v));
            }
        }
        Self::from_rows(self.nrows, rows)
    }

    /// Sparse product `self · other`.
    pub fn matmul(&self, other: &CsrMatrix) -> Self {
        assert_eq!(self.ncols, other.nrows);
        let mut acc = vec![0.0; other.ncols];
        let mut touched = vec![false; other.ncols];
        let mut rows = Vec::with_capacity(self.nrows);
        for i in 0..self.nrows {
            let mut pattern = Vec::new();
            let (ac, av) = self.row(i);
            for (&k, &x) in ac.iter().zip(av) {
                let (bc, bv) = other.row(k);
                for (&j, &y) in bc.iter().zip(bv) {
                    if !touched[j] {
                        touched[j] = true;
                        pattern.push(j);
                    }
                    acc[j] += x * y;
                }
            }
            let row: Vec<(usize, f64)> = pattern
                .iter()
                .map(|&j| {
                    let v = acc[j];
                    acc[j] = 0.0;
                    touched[j] = false;
                    (j, v)
                })
                .collect();
            rows.push(row);
        }
        Self::from_rows(other.ncols, rows)
    }

    /// Largest `|A_ij − A_ji|` relative to `max |A|`.
    pub fn asymmetry(&self) -> f64 {
        if self.nrows != self.ncols {
            return f64::INFINITY;
        }
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        let mut worst: f64 = 0.0;
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst / scale
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                d[(i, j)] += v;
            }
        }
        d
    }
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            data: vec![0.0; nrows * ncols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        let data = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Self { nrows, ncols, data }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.nrows)
            .map(|i| {
                self.data[i * self.ncols..(i + 1) * self.ncols]
                    .iter()
                    .zip(x)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }
}

impl std::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.ncols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.ncols + j]
    }
}

/// Dense Cholesky factor `A = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    n: usize,
    l: Vec<f64>,
}

impl Cholesky {
    /// Factor a symmetric positive definite matrix (lower triangle is read).
    pub fn factor(a: &DenseMatrix) -> Result<Self> {
        if a.nrows != a.ncols {
            return invalid("Cholesky needs a square matrix");
        }
        let n = a.nrows;
        let mut l = vec![0.0; n * n];
        for j in 0..n {
            let mut d = a[(j, j)];
            for k in 0..j {
                d -= l[j * n + k] * l[j * n + k];
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::SingularBlock(format!(
                    "non-positive pivot {d:e} at row {j} of {n}"
                )));
            }
            let d = d.sqrt();
            l[j * n + j] = d;
            for i in j + 1..n {
                let mut v = a[(i, j)];
                for k in 0..j {
                    v -= l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = v / d;
            }
        }
        Ok(Self { n, l })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    /// `x ← L⁻¹ x`.
    pub fn forward_in_place(&self, x: &mut [f64]) {
        let n = self.n;
        assert_eq!(x.len(), n);
        for i in 0..n {
            let mut v = x[i];
            for k in 0..i {
                v -= self.l[i * n + k] * x[k];
            }
            x[i] = v / self.l[i * n + i];
        }
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.n;
        self.forward_in_place(x);
        for i in (0..n).rev() {
            let mut v = x[i];
            for k in i + 1..n {
                v -= self.l[k * n + i] * x[k];
            }
            x[i] = v / self.l[i * n + i];
        }
    }
}

/// Factored symmetric tridiagonal matrix (LDLᵀ).
#[derive(Debug, Clone)]
pub struct Tridiagonal {
    /// Pivots `d_i`.
    d: Vec<f64>,
    /// Multipliers `l_i` (subdiagonal of the unit lower factor).
    l: Vec<f64>,
}

impl Tridiagonal {
    /// Factor from diagonal and sub-diagonal (`sub[i] = A[i+1][i]`).
    pub fn factor(diag: &[f64], sub: &[f64]) -> Result<Self> {
        let n = diag.len();
        assert_eq!(sub.len(), n.saturating_sub(1));
        let mut d = Vec::with_capacity(n);
        let mut l = Vec::with_capacity(n.saturating_sub(1));
        for i in 0..n {
            let mut p = diag[i];
            if i > 0 {
                let li = sub[i - 1] / d[i - 1];
                p -= li * sub[i - 1];
                l.push(li);
            }
            if !(p > 0.0) || !p.is_finite() {
                return Err(Error::SingularBlock(format!(
                    "tridiagonal pivot {p:e} at row {i} of {n}"
                )));
            }
            d.push(p);
        }
        Ok(Self { d, l })
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.d.len();
        for i in 1..n {
            x[i] -= self.l[i - 1] * x[i - 1];
        }
        for i in 0..n {
            x[i] /= self.d[i];
        }
        for i in (0..n.saturating_sub(1)).rev() {
            x[i] -= self.l[i] * x[i + 1];
        }
    }
}

/// Cholesky factor of a symmetric positive definite band matrix with
/// half-bandwidth `p`; row `i` of the factor stores columns `i−p..=i`.
#[derive(Debug, Clone)]
pub struct BandedCholesky {
    n: usize,
    p: usize,
    l: Vec<f64>,
}

impl BandedCholesky {
    /// Factor the lower band of `a`; entries outside the band are rejected.
    pub fn factor(a: &CsrMatrix, p: usize) -> Result<Self> {
        let n = a.nrows();
        let w = p + 1;
        let mut l = vec![0.0; n * w];
        for i in 0..n {
            let (cols, vals) = a.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                if j <= i {
                    if i - j > p {
                        return invalid(format!("entry ({i},{j}) lies outside half-bandwidth {p}"));
                    }
                    l[i * w + (p - (i - j))] = v;
                }
            }
        }
        // row i, column j ↦ l[i*w + p − (i − j)]
        for i in 0..n {
            let lo = i.saturating_sub(p);
            for j in lo..=i {
                let mut v = l[i * w + p - (i - j)];
                let klo = lo.max(j.saturating_sub(p));
                for k in klo..j {
                    v -= l[i * w + p - (i - k)] * l[j * w + p - (j - k)];
                }
                if j == i {
                    if !(v > 0.0) || !v.is_finite() {
                        return Err(Error::SingularBlock(format!(
                            "non-positive band pivot {v:e} at row {i} of {n}"
                        )));
                    }
                    l[i * w + p] = v.sqrt();
                } else {
                    l[i * w + p - (i - j)] = v / l[j * w + p];
                }
            }
        }
        Ok(Self { n, p, l })
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let (n, p, w) = (self.n, self.p, self.p + 1);
        for i in 0..n {
            let mut v = x[i];
            for k in i.saturating_sub(p)..i {
                v -= self.l[i * w + p - (i - k)] * x[k];
            }
            x[i] = v / self.l[i * w + p];
        }
        for i in (0..n).rev() {
            let mut v = x[i];
            for k in i + 1..(i + p + 1).min(n) {
                v -= self.l[k * w + p - (k - i)] * x[k];
            }
            x[i] = v / self.l[i * w + p];
        }
    }
}

/// Eigen-decomposition of a small symmetric matrix by cyclic Jacobi
/// rotations. Returns eigenvalues and the orthogonal matrix whose columns are
/// the eigenvectors.
pub fn symmetric_eigen(a: &DenseMatrix) -> (Vec<f64>, DenseMatrix) {
    let n = a.nrows;
    let mut m = a.clone();
    let mut v = DenseMatrix::zeros(n, n);
    for i in 0..n {
        v[(i, i)] = 1.0;
    }
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)] * m[(i, j)])
            .sum();
        let scale: f64 = (0..n).map(|i| m[(i, i)] * m[(i, i)]).sum();
        if off <= 1e-32 * scale || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[(k, p)], m[(k, q)]);
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[(p, k)], m[(q, k)]);
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| m[(i, i)]).collect(), v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> CsrMatrix {
        CsrMatrix::from_triplets(
            3,
            3,
            [
                (0, 0, 4.0),
                (0, 1, -1.0),
                (1, 0, -1.0),
                (1, 1, 4.0),
                (1, 2, -1.0),
                (2, 1, -1.0),
                (2, 2, 3.0),
                (2, 2, 1.0),
            ],
        )
    }

    #[test]
    fn triplets_sum_duplicates() {
        let a = small();
        assert_eq!(a.get(2, 2), 4.0);
        assert_eq!(a.nnz(), 7);
        assert_eq!(a.asymmetry(), 0.0);
        assert_eq!(a.mul_vec(&[1.0, 1.0, 1.0]), vec![3.0, 2.0, 3.0]);
    }

    #[test]
    fn kron_matches_dense_definition() {
        let a = CsrMatrix::from_triplets(2, 2, [(0, 0, 1.0), (0, 1, 2.0), (1, 1, 3.0)]);
        let b = small();
        let k = CsrMatrix::kron(&a, &b);
        for i in 0..2 {
            for j in 0..2 {
                for p in 0..3 {
                    for q in 0..3 {
                        assert_eq!(k.get(i * 3 + p, j * 3 + q), a.get(i, j) * b.get(p, q));
                    }
                }
            }
        }
    }

    #[test]
    fn matmul_and_transpose() {
        let a = small();
        let p = CsrMatrix::from_triplets(3, 2, [(0, 0, 1.0), (1, 0, 0.5), (1, 1, 0.5), (2, 1, 1.0)]);
        let c = p.transpose().matmul(&a).matmul(&p);
        let x = [0.3, -1.2];
        let direct = p.transpose().mul_vec(&a.mul_vec(&p.mul_vec(&x)));
        let via = c.mul_vec(&x);
        for (u, v) in direct.iter().zip(&via) {
            assert!((u - v).abs() < 1e-14);
        }
    }

    #[test]
    fn cholesky_and_tridiagonal_solve() {
        let a = small();
        let b = [1.0, 2.0, 3.0];
        let x = Cholesky::factor(&a.to_dense()).unwrap().solve(&b);
        let r = a.mul_vec(&x);
        assert!(r.iter().zip(&b).all(|(u, v)| (u - v).abs() < 1e-14));

        let t = Tridiagonal::factor(&[4.0, 4.0, 4.0], &[-1.0, -1.0]).unwrap();
        let mut y = b.to_vec();
        t.solve_in_place(&mut y);
        let at = CsrMatrix::from_triplets(
            3,
            3,
            [
                (0, 0, 4.0),
                (0, 1, -1.0),
                (1, 0, -1.0),
                (1, 1, 4.0),
                (1, 2, -1.0),
                (2, 1, -1.0),
                (2, 2, 4.0),
            ],
        );
        let r = at.mul_vec(&y);
        assert!(r.iter().zip(&b).all(|(u, v)| (u - v).abs() < 1e-14));

        let bad = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]);
        assert!(matches!(Cholesky::factor(&bad), Err(Error::SingularBlock(_))));
    }

    #[test]
    fn parallel_matvec_is_bitwise_serial() {
        let n = 10_000;
        let mut trip = Vec::new();
        for i in 0..n {
            trip.push((i, i, 2.0 + (i as f64).sin()));
            if i + 1 < n {
                trip.push((i, i + 1, -0.3));
                trip.push((i + 1, i, -0.3));
            }
        }
        let a = CsrMatrix::from_triplets(n, n, trip);
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.1).cos()).collect();
        let mut y1 = vec![0.0; n];
        let mut y2 = vec![0.0; n];
        a.mul_vec_into(&x, &mut y1, Exec::Serial);
        a.mul_vec_into(&x, &mut y2, Exec::Parallel);
        assert_eq!(y1, y2);
    }

    #[test]
    fn banded_cholesky_matches_dense() {
        // pentadiagonal SPD
        let n = 9;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 6.0 + i as f64));
            if i + 1 < n {
                t.push((i, i + 1, -1.5));
                t.push((i + 1, i, -1.5));
            }
            if i + 2 < n {
                t.push((i, i + 2, 0.7));
                t.push((i + 2, i, 0.7));
            }
        }
        let a = CsrMatrix::from_triplets(n, n, t);
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let mut x = b.clone();
        BandedCholesky::factor(&a, 2).unwrap().solve_in_place(&mut x);
        let want = Cholesky::factor(&a.to_dense()).unwrap().solve(&b);
        for (u, v) in x.iter().zip(&want) {
            assert!((u - v).abs() < 1e-14);
        }
        assert!(BandedCholesky::factor(&a, 1).is_err());
    }

    #[test]
    fn jacobi_eigen_reconstructs() {
        let a = DenseMatrix::from_rows(&[vec![4.0, 1.0, -2.0], vec![1.0, 2.0, 0.5], vec![-2.0, 0.5, 3.0]]);
        let (lam, q) = symmetric_eigen(&a);
        for i in 0..3 {
            for j in 0..3 {
                let r: f64 = (0..3).map(|k| q[(i, k)] * lam[k] * q[(j, k)]).sum();
                assert!((r - a[(i, j)]).abs() < 1e-13);
                let o: f64 = (0..3).map(|k| q[(k, i)] * q[(k, j)]).sum();
                assert!((o - if i == j { 1.0 } else { 0.0 }).abs() < 1e-14);
            }
        }
        assert!((lam.iter().sum::<f64>() - 9.0).abs() < 1e-13);
    }
}
