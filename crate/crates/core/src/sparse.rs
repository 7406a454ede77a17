//! Compressed sparse row matrices for the global operators.

use std::io::Write;

use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a matrix from per-row `(column, value)` lists. Duplicate
    /// columns within a row are summed; exact zeros are not stored.
    pub fn from_rows(ncols: usize, rows: Vec<Vec<(usize, f64)>>) -> Self {
        let mut indptr = Vec::with_capacity(rows.len() + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            let start = indices.len();
            for (c, v) in row {
                debug_assert!(c < ncols);
                if indices.len() > start && *indices.last().unwrap() == c {
                    *values.last_mut().unwrap() += v;
                } else {
                    indices.push(c);
                    values.push(v);
                }
            }
            let mut kept = start;
            for k in start..indices.len() {
                if values[k] != 0.0 {
                    indices[kept] = indices[k];
                    values[kept] = values[k];
                    kept += 1;
                }
            }
            indices.truncate(kept);
            values.truncate(kept);
            indptr.push(indices.len());
        }
        CsrMatrix {
            nrows: indptr.len() - 1,
            ncols,
            indptr,
            indices,
            values,
        }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.indptr[i]..self.indptr[i + 1];
        self.indices[r.clone()]
            .iter()
            .copied()
            .zip(self.values[r].iter().copied())
    }

    pub fn row_nnz(&self, i: usize) -> usize {
        self.indptr[i + 1] - self.indptr[i]
    }

    /// `A x`.
    pub fn matvec(&self, vector: &[f64]) -> Vec<f64> {
        assert_eq!(vector.len(), self.ncols);
        (0..self.nrows)
            .map(|i| self.row(i).map(|(c, v)| v * vector[c]).sum())
            .collect()
    }

    /// `Aᵀ y`.
    pub fn transpose_matvec(&self, vector: &[f64]) -> Vec<f64> {
        assert_eq!(vector.len(), self.nrows);
        let mut out = vec![0.0; self.ncols];
        for (i, &yi) in vector.iter().enumerate() {
            if yi != 0.0 {
                for (c, v) in self.row(i) {
                    out[c] += v * yi;
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut counts = vec![0usize; self.ncols + 1];
        for &c in &self.indices {
            counts[c + 1] += 1;
        }
        for j in 0..self.ncols {
            counts[j + 1] += counts[j];
        }
        let mut next = counts.clone();
        let mut indices = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for i in 0..self.nrows {
            for (c, v) in self.row(i) {
                let at = next[c];
                indices[at] = i;
                values[at] = v;
                next[c] += 1;
            }
        }
        CsrMatrix {
            nrows: self.ncols,
            ncols: self.nrows,
            indptr: counts,
            indices,
            values,
        }
    }

    /// Multiplies row `i` by `factors[i]`.
    pub fn scale_rows(&mut self, factors: &[f64]) {
        for i in 0..self.nrows {
            for k in self.indptr[i]..self.indptr[i + 1] {
                self.values[k] *= factors[i];
            }
        }
    }

    /// Keeps the columns with `map[c] = Some(new)`, renumbered.
    pub fn select_columns(&self, map: &[Option<usize>], new_ncols: usize) -> CsrMatrix {
        let rows = (0..self.nrows)
            .map(|i| {
                self.row(i)
                    .filter_map(|(c, v)| map[c].map(|n| (n, v)))
                    .collect()
            })
            .collect();
        CsrMatrix::from_rows(new_ncols, rows)
    }

    /// Keeps the listed rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> CsrMatrix {
        CsrMatrix::from_rows(
            self.ncols,
            rows.iter().map(|&i| self.row(i).collect()).collect(),
        )
    }

    /// Symmetric `AᵀA` computed row by row (Gustavson), as a full
    /// compressed-column matrix.
    pub fn normal_matrix(&self) -> Result<SparseColMat<usize, f64>> {
        let at = self.transpose();
        let n = self.ncols;
        let mut acc = vec![0.0; n];
        let mut mark = vec![usize::MAX; n];
        let mut triplets = Vec::new();
        let mut touched = Vec::new();
        for j in 0..n {
            touched.clear();
            for (i, aij) in at.row(j) {
                for (k, aik) in self.row(i) {
                    if mark[k] != j {
                        mark[k] = j;
                        acc[k] = 0.0;
                        touched.push(k);
                    }
                    acc[k] += aij * aik;
                }
            }
            for &k in &touched {
                triplets.push(Triplet::new(k, j, acc[k]));
            }
        }
        SparseColMat::try_new_from_triplets(n, n, &triplets).map_err(|e| Error::Factorization {
            reason: format!("normal matrix assembly: {e:?}"),
            condition: f64::NAN,
        })
    }

    pub fn to_faer(&self) -> Result<SparseColMat<usize, f64>> {
        let mut triplets = Vec::with_capacity(self.nnz());
        for i in 0..self.nrows {
            for (c, v) in self.row(i) {
                triplets.push(Triplet::new(i, c, v));
            }
        }
        SparseColMat::try_new_from_triplets(self.nrows, self.ncols, &triplets).map_err(|e| {
            Error::Factorization {
                reason: format!("sparse conversion: {e:?}"),
                condition: f64::NAN,
            }
        })
    }

    pub fn to_dense(&self) -> Mat<f64> {
        let mut m = Mat::<f64>::zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            for (c, v) in self.row(i) {
                m[(i, c)] += v;
            }
        }
        m
    }

    /// Frobenius norm, an upper bound of the spectral norm.
    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Writes the coordinate text format: a `%%` header with the dimensions
    /// and number of entries, then one `row col value` line per entry
    /// (zero-based indices).
    pub fn write_triplets<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "%% {} {} {}", self.nrows, self.ncols, self.nnz())?;
        for i in 0..self.nrows {
            for (c, v) in self.row(i) {
                writeln!(w, "{i} {c} {v:e}")?;
            }
        }
        Ok(())
    }
}
