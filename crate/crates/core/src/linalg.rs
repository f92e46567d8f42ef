//! Sparse and dense linear algebra helpers.
//!
//! Sparse operators are compressed-row complex matrices. Dense symmetric
//! eigenproblems are delegated to `faer`.

use faer::{Mat, Side};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::io::Write;

/// Complex vector.
pub type CVec = Vec<Complex64>;

/// Compressed sparse row matrix with complex entries.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<Complex64>,
}

impl SparseMatrix {
    /// Builds a matrix from `(row, col, value)` triplets; duplicates are summed
    /// and explicit zeros are dropped.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        mut triplets: Vec<(usize, usize, Complex64)>,
    ) -> Self {
        triplets.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<Complex64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        let mut rows = Vec::with_capacity(triplets.len());
        for (r, c, v) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r},{c}) out of bounds");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                rows.push(r);
                last = Some((r, c));
            }
        }
        let mut keep_cols = Vec::with_capacity(col_idx.len());
        let mut keep_vals = Vec::with_capacity(values.len());
        for ((r, c), v) in rows.into_iter().zip(col_idx).zip(values) {
            if v != Complex64::new(0.0, 0.0) {
                row_ptr[r + 1] += 1;
                keep_cols.push(c);
                keep_vals.push(v);
            }
        }
        for r in 0..nrows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self {
            nrows,
            ncols,
            row_ptr,
            col_idx: keep_cols,
            values: keep_vals,
        }
    }

    /// Number of stored entries.
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Entries of row `r` as `(col, value)` pairs.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (self.col_idx[k], self.values[k]))
    }

    /// Entry `(r, c)`, zero if not stored.
    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.row(r)
            .find(|&(cc, _)| cc == c)
            .map(|(_, v)| v)
            .unwrap_or_default()
    }

    /// `y = A x`.
    pub fn matvec_into(&self, x: &[Complex64], y: &mut [Complex64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for (r, yr) in y.iter_mut().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *yr = acc;
        }
    }

    /// Returns `A x`.
    pub fn matvec(&self, x: &[Complex64]) -> CVec {
        let mut y = vec![Complex64::new(0.0, 0.0); self.nrows];
        self.matvec_into(x, &mut y);
        y
    }

    /// `y = A x` for a real matrix acting on a real vector (imaginary parts ignored).
    pub fn matvec_real(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows)
            .map(|r| {
                (self.row_ptr[r]..self.row_ptr[r + 1])
                    .map(|k| self.values[k].re * x[self.col_idx[k]])
                    .sum()
            })
            .collect()
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> SparseMatrix {
        let mut t = Vec::with_capacity(self.nnz());
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                t.push((c, r, v.conj()));
            }
        }
        SparseMatrix::from_triplets(self.ncols, self.nrows, t)
    }

    /// Largest entry modulus of `A - A^*`.
    pub fn hermitian_defect(&self) -> f64 {
        let adj = self.adjoint();
        self.max_abs_diff(&adj)
    }

    /// Largest entry modulus of `A - B`.
    pub fn max_abs_diff(&self, other: &SparseMatrix) -> f64 {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut m: f64 = 0.0;
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                m = m.max((v - other.get(r, c)).norm());
            }
            for (c, v) in other.row(r) {
                m = m.max((v - self.get(r, c)).norm());
            }
        }
        m
    }

    /// `A + s I`.
    pub fn shifted(&self, s: Complex64) -> SparseMatrix {
        let mut t: Vec<_> = (0..self.nrows)
            .flat_map(|r| self.row(r).map(move |(c, v)| (r, c, v)))
            .collect();
        t.extend((0..self.nrows.min(self.ncols)).map(|k| (k, k, s)));
        SparseMatrix::from_triplets(self.nrows, self.ncols, t)
    }

    /// Dense real matrix from the real parts of the entries.
    pub fn to_dense_real(&self) -> Mat<f64> {
        let mut m = Mat::<f64>::zeros(self.nrows, self.ncols);
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                m[(r, c)] += v.re;
            }
        }
        m
    }

    /// Largest imaginary part among the stored entries.
    pub fn max_imag(&self) -> f64 {
        self.values.iter().map(|v| v.im.abs()).fold(0.0, f64::max)
    }

    /// Gershgorin bound on the spectral radius: the largest absolute row sum.
    pub fn gershgorin_bound(&self) -> f64 {
        (0..self.nrows)
            .map(|r| self.row(r).map(|(_, v)| v.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Writes `row,col,re,im` triplets, one stored entry per line.
    pub fn write_triplets<W: Write>(&self, out: W) -> crate::Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["row", "col", "re", "im"])?;
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                wtr.write_record([
                    r.to_string(),
                    c.to_string(),
                    format!("{:e}", v.re),
                    format!("{:e}", v.im),
                ])?;
            }
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Hermitian inner product `<x, y> = sum conj(x) y`.
pub fn dot(x: &[Complex64], y: &[Complex64]) -> Complex64 {
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

/// Euclidean norm.
pub fn norm(x: &[Complex64]) -> f64 {
    x.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
}

/// Largest entry modulus of `x - y`.
pub fn max_abs_diff(x: &[Complex64], y: &[Complex64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
}

/// Deterministic random complex vector with standard normal-like entries in `[-1, 1]^2`.
pub fn random_cvec(n: usize, seed: u64) -> CVec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect()
}

/// Power iteration on `A^* A` for the largest singular value of a linear map
/// given as a closure pair `(apply, apply_adjoint)`.
pub fn power_singular_value<F, G>(
    n: usize,
    mut apply: F,
    mut apply_adj: G,
    rel_tol: f64,
    max_iter: usize,
    seed: u64,
) -> crate::Result<f64>
where
    F: FnMut(&[Complex64]) -> crate::Result<CVec>,
    G: FnMut(&[Complex64]) -> crate::Result<CVec>,
{
    let mut x = random_cvec(n, seed);
    let nx = norm(&x);
    x.iter_mut().for_each(|v| *v /= nx);
    let mut sigma = 0.0;
    for _ in 0..max_iter {
        let y = apply(&x)?;
        let s = norm(&y);
        let z = apply_adj(&y)?;
        let nz = norm(&z);
        if nz == 0.0 {
            return Ok(0.0);
        }
        let done = (s - sigma).abs() <= rel_tol * s;
        sigma = s;
        x = z.into_iter().map(|v| v / nz).collect();
        if done {
            return Ok(sigma);
        }
    }
    Ok(sigma)
}

/// Largest eigenvalue modulus of a Hermitian sparse matrix by power iteration.
pub fn power_norm(a: &SparseMatrix, iters: usize, seed: u64) -> f64 {
    let mut x = random_cvec(a.ncols, seed);
    let mut est = 0.0;
    for _ in 0..iters {
        let nx = norm(&x);
        x.iter_mut().for_each(|v| *v /= nx);
        let y = a.matvec(&x);
        est = norm(&y);
        x = y;
        if est == 0.0 {
            break;
        }
    }
    est
}

/// Eigenvalues (ascending) and orthonormal eigenvectors of a real symmetric matrix.
pub fn sym_eigen(a: &Mat<f64>) -> (Vec<f64>, Mat<f64>) {
    let e = a
        .self_adjoint_eigen(Side::Lower)
        .expect("symmetric eigensolver failed to converge");
    let s = e.S();
    let vals: Vec<f64> = (0..a.nrows()).map(|k| s[k]).collect();
    (vals, e.U().to_owned())
}

/// Eigenvalues (ascending) of a real symmetric matrix.
pub fn sym_eigenvalues(a: &Mat<f64>) -> Vec<f64> {
    let mut v = a
        .self_adjoint_eigenvalues(Side::Lower)
        .expect("symmetric eigensolver failed to converge");
    v.sort_by(f64::total_cmp);
    v
}

/// Largest entry modulus of `A - A^T`.
pub fn symmetry_defect(a: &Mat<f64>) -> f64 {
    let mut m: f64 = 0.0;
    for i in 0..a.nrows() {
        for j in 0..i {
            m = m.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn triplets_merge_and_drop_zeros() {
        let m = SparseMatrix::from_triplets(
            2,
            2,
            vec![(0, 1, c(1.0)), (0, 1, c(2.0)), (1, 0, c(1.0)), (1, 0, c(-1.0))],
        );
        assert_eq!(m.nnz(), 1);
        assert_eq!(m.get(0, 1), c(3.0));
        assert_eq!(m.matvec(&[c(1.0), c(2.0)]), vec![c(6.0), c(0.0)]);
    }

    #[test]
    fn adjoint_and_defect() {
        let m = SparseMatrix::from_triplets(
            2,
            2,
            vec![(0, 1, Complex64::new(0.0, 1.0)), (1, 0, Complex64::new(0.0, -1.0))],
        );
        assert!(m.hermitian_defect() < 1e-15);
        assert_eq!(m.gershgorin_bound(), 1.0);
    }

    #[test]
    fn dense_eigen_of_small_matrix() {
        let a = Mat::<f64>::from_fn(2, 2, |i, j| if i == j { 2.0 } else { 1.0 });
        let (v, u) = sym_eigen(&a);
        assert!((v[0] - 1.0).abs() < 1e-14 && (v[1] - 3.0).abs() < 1e-14);
        assert!((u[(0, 1)].abs() - 0.5f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn power_singular_value_of_diagonal() {
        let d = [c(1.0), c(-3.0), c(2.0)];
        let s = power_singular_value(
            3,
            |x| Ok(x.iter().zip(&d).map(|(a, b)| a * b).collect()),
            |x| Ok(x.iter().zip(&d).map(|(a, b)| a * b.conj()).collect()),
            1e-12,
            500,
            1,
        )
        .unwrap();
        assert!((s - 3.0).abs() < 1e-8);
    }
}
