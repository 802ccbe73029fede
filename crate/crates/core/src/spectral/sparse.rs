//! Compressed sparse row matrices over ℂ.

use crate::error::{Error, Result};
use crate::special::C64;
use nalgebra::DMatrix;

#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub values: Vec<C64>,
}

impl CsrMatrix {
    /// Build from (row, col, value) triplets; duplicates are summed in
    /// input order and explicit zeros are kept.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, C64)]) -> Result<CsrMatrix> {
        let mut counts = vec![0usize; nrows + 1];
        for &(r, c, _) in triplets {
            if r >= nrows || c >= ncols {
                return Err(Error::InvalidInput(format!("triplet ({r}, {c}) outside a {nrows}x{ncols} matrix")));
            }
            counts[r + 1] += 1;
        }
        for i in 0..nrows {
            counts[i + 1] += counts[i];
        }
        let mut order = vec![0usize; triplets.len()];
        let mut next = counts.clone();
        for (k, &(r, _, _)) in triplets.iter().enumerate() {
            order[next[r]] = k;
            next[r] += 1;
        }
        let mut indptr = Vec::with_capacity(nrows + 1);
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        indptr.push(0);
        for r in 0..nrows {
            let mut row: Vec<(usize, C64)> = order[counts[r]..counts[r + 1]].iter().map(|&k| (triplets[k].1, triplets[k].2)).collect();
            row.sort_by_key(|e| e.0);
            let mut last: Option<usize> = None;
            for (c, v) in row {
                if last == Some(c) {
                    *values.last_mut().expect("entry exists") += v;
                } else {
                    indices.push(c);
                    values.push(v);
                    last = Some(c);
                }
            }
            indptr.push(indices.len());
        }
        Ok(CsrMatrix { nrows, ncols, indptr, indices, values })
    }

    pub fn identity(n: usize) -> CsrMatrix {
        CsrMatrix { nrows: n, ncols: n, indptr: (0..=n).collect(), indices: (0..n).collect(), values: vec![C64::new(1.0, 0.0); n] }
    }

    pub fn from_dense(a: &DMatrix<C64>) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..a.nrows() {
            for j in 0..a.ncols() {
                if a[(i, j)] != C64::new(0.0, 0.0) {
                    t.push((i, j, a[(i, j)]));
                }
            }
        }
        CsrMatrix::from_triplets(a.nrows(), a.ncols(), &t).expect("indices in range")
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn max_row_nnz(&self) -> usize {
        self.indptr.windows(2).map(|w| w[1] - w[0]).max().unwrap_or(0)
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        (self.indptr[i]..self.indptr[i + 1]).map(move |k| (self.indices[k], self.values[k]))
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.row(i).find(|e| e.0 == j).map(|e| e.1).unwrap_or_default()
    }

    pub fn matvec(&self, x: &[C64]) -> Vec<C64> {
        (0..self.nrows).map(|i| self.row(i).map(|(j, v)| v * x[j]).sum()).collect()
    }

    /// y = Aᴴx.
    pub fn matvec_adjoint(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![C64::new(0.0, 0.0); self.ncols];
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                y[j] += v.conj() * x[i];
            }
        }
        y
    }

    pub fn transpose_conj(&self) -> CsrMatrix {
        let mut t = Vec::with_capacity(self.nnz());
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                t.push((j, i, v.conj()));
            }
        }
        CsrMatrix::from_triplets(self.ncols, self.nrows, &t).expect("indices in range")
    }

    /// Sparse product self · other.
    pub fn mul(&self, other: &CsrMatrix) -> Result<CsrMatrix> {
        if self.ncols != other.nrows {
            return Err(Error::InvalidInput("dimension mismatch in sparse product".into()));
        }
        let mut indptr = vec![0usize];
        let mut indices = Vec::new();
        let mut values = Vec::new();
        let mut acc = vec![C64::new(0.0, 0.0); other.ncols];
        let mut mark = vec![usize::MAX; other.ncols];
        for i in 0..self.nrows {
            let mut cols = Vec::new();
            for (k, a) in self.row(i) {
                for (j, b) in other.row(k) {
                    if mark[j] != i {
                        mark[j] = i;
                        acc[j] = C64::new(0.0, 0.0);
                        cols.push(j);
                    }
                    acc[j] += a * b;
                }
            }
            cols.sort_unstable();
            for j in cols {
                indices.push(j);
                values.push(acc[j]);
            }
            indptr.push(indices.len());
        }
        Ok(CsrMatrix { nrows: self.nrows, ncols: other.ncols, indptr, indices, values })
    }

    pub fn scale(&self, s: C64) -> CsrMatrix {
        CsrMatrix { values: self.values.iter().map(|v| v * s).collect(), ..self.clone() }
    }

    /// self − z·I, keeping the sparsity pattern plus the diagonal.
    pub fn shifted(&self, z: C64) -> CsrMatrix {
        let mut t = Vec::with_capacity(self.nnz() + self.nrows);
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                t.push((i, j, v));
            }
            t.push((i, i, -z));
        }
        CsrMatrix::from_triplets(self.nrows, self.ncols, &t).expect("indices in range")
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut a = DMatrix::zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                a[(i, j)] += v;
            }
        }
        a
    }

    /// Remove stored entries that are exactly zero.
    pub fn drop_zeros(&mut self) {
        let mut indptr = Vec::with_capacity(self.nrows + 1);
        let mut indices = Vec::with_capacity(self.nnz());
        let mut values = Vec::with_capacity(self.nnz());
        indptr.push(0);
        for i in 0..self.nrows {
            for k in self.indptr[i]..self.indptr[i + 1] {
                if self.values[k] != C64::new(0.0, 0.0) {
                    indices.push(self.indices[k]);
                    values.push(self.values[k]);
                }
            }
            indptr.push(indices.len());
        }
        self.indptr = indptr;
        self.indices = indices;
        self.values = values;
    }

    /// Largest |a_ij − conj(a_ji)|.
    pub fn hermitian_defect(&self) -> f64 {
        let t = self.transpose_conj();
        let mut worst: f64 = 0.0;
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                worst = worst.max((v - t.get(i, j)).norm());
            }
            for (j, v) in t.row(i) {
                worst = worst.max((v - self.get(i, j)).norm());
            }
        }
        worst
    }

    /// max_i Σ_j |a_ij|, an upper bound for the spectral radius.
    pub fn inf_norm(&self) -> f64 {
        (0..self.nrows).map(|i| self.row(i).map(|(_, v)| v.norm()).sum::<f64>()).fold(0.0, f64::max)
    }
}

pub(crate) fn norm2(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn duplicates_are_summed_and_sorted() {
        let a = CsrMatrix::from_triplets(2, 3, &[(0, 2, c(1.0)), (0, 0, c(2.0)), (0, 2, c(3.0)), (1, 1, c(-1.0))]).unwrap();
        assert_eq!(a.indices, vec![0, 2, 1]);
        assert_eq!(a.values, vec![c(2.0), c(4.0), c(-1.0)]);
    }

    #[test]
    fn product_matches_dense() {
        let a = DMatrix::from_fn(4, 4, |i, j| C64::new((i * 3 + j) as f64 % 5.0 - 2.0, (i + 2 * j) as f64 % 3.0));
        let b = DMatrix::from_fn(4, 4, |i, j| C64::new(if (i + j) % 2 == 0 { 1.0 } else { 0.0 }, j as f64));
        let p = CsrMatrix::from_dense(&a).mul(&CsrMatrix::from_dense(&b)).unwrap().to_dense();
        assert!((p - a * b).iter().all(|z| z.norm() < 1e-13));
    }

    #[test]
    fn shift_and_adjoint() {
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 1, C64::new(0.0, 1.0))]).unwrap();
        let s = a.shifted(C64::new(1.0, 0.0));
        assert_eq!(s.get(0, 0), c(-1.0));
        assert_eq!(a.matvec_adjoint(&[c(1.0), c(0.0)]), vec![c(0.0), C64::new(0.0, -1.0)]);
        assert!(a.hermitian_defect() > 0.9);
    }
}
