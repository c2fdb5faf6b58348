//! Compressed-sparse-row matrices built in two passes: a symbolic pattern
//! from element connectivity, then a numeric scatter.

use std::io::Write;

use crate::error::Result;

#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    /// Pattern holding, for every element, the product of its row and
    /// column index lists. Values start at zero.
    pub fn from_element_pattern<'a, I>(nrows: usize, ncols: usize, elements: I) -> Self
    where
        I: IntoIterator<Item = (&'a [usize], &'a [usize])>,
    {
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); nrows];
        for (r, c) in elements {
            for &i in r {
                rows[i].extend_from_slice(c);
            }
        }
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        for row in rows.iter_mut() {
            row.sort_unstable();
            row.dedup();
            col_idx.extend_from_slice(row);
            row_ptr.push(col_idx.len());
            *row = Vec::new();
        }
        let nnz = col_idx.len();
        Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values: vec![0.0; nnz],
        }
    }

    /// Matrix from coordinate triplets; duplicates are summed.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nrows];
        for &(i, j, v) in triplets {
            rows[i].push((j, v));
        }
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            for (j, v) in row {
                if col_idx.len() > *row_ptr.last().unwrap() && *col_idx.last().unwrap() == j {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_idx.push(j);
                    values.push(v);
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

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    fn position(&self, i: usize, j: usize) -> Option<usize> {
        let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.col_idx[s..e].binary_search(&j).ok().map(|k| s + k)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.position(i, j).map_or(0.0, |k| self.values[k])
    }

    /// Adds a dense element block. Every `(rows[a], cols[b])` must be in
    /// the pattern.
    pub fn add_block(&mut self, rows: &[usize], cols: &[usize], block: &[f64]) {
        let nc = cols.len();
        for (a, &i) in rows.iter().enumerate() {
            let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
            let row = &self.col_idx[s..e];
            for (b, &j) in cols.iter().enumerate() {
                let k = row.binary_search(&j).expect("entry outside the sparsity pattern");
                self.values[s + k] += block[a * nc + b];
            }
        }
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.col_idx[s..e]
            .iter()
            .copied()
            .zip(self.values[s..e].iter().copied())
    }

    /// `y = A x`
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).map(|(j, v)| v * x[j]).sum();
        }
    }

    /// `y = Aᵀ x`
    pub fn mul_vec_transpose(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.nrows);
        assert_eq!(y.len(), self.ncols);
        y.fill(0.0);
        for (i, &xi) in x.iter().enumerate() {
            if xi != 0.0 {
                for (j, v) in self.row(i) {
                    y[j] += v * xi;
                }
            }
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.mul_vec(x, &mut y);
        y
    }

    pub fn apply_transpose(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.ncols];
        self.mul_vec_transpose(x, &mut y);
        y
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.ncols + 1];
        for &j in &self.col_idx {
            counts[j + 1] += 1;
        }
        for j in 0..self.ncols {
            counts[j + 1] += counts[j];
        }
        let mut next = counts.clone();
        let mut col_idx = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                let k = next[j];
                col_idx[k] = i;
                values[k] = v;
                next[j] += 1;
            }
        }
        Self {
            nrows: self.ncols,
            ncols: self.nrows,
            row_ptr: counts,
            col_idx,
            values,
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    /// `max |A - Aᵀ| / max |A|`
    pub fn symmetry_defect(&self) -> f64 {
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        let mut worst: f64 = 0.0;
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst / scale
    }

    /// Submatrix keeping rows `rows` and columns `cols`, given as
    /// old-to-new index maps (`None` drops the index).
    pub fn restrict(&self, rows: &[Option<usize>], cols: &[Option<usize>], nrows: usize, ncols: usize) -> Self {
        let mut row_ptr = vec![0; nrows + 1];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        let mut order: Vec<usize> = vec![usize::MAX; nrows];
        for (old, new) in rows.iter().enumerate() {
            if let Some(n) = new {
                order[*n] = old;
            }
        }
        for (n, &old) in order.iter().enumerate() {
            for (j, v) in self.row(old) {
                if let Some(nj) = cols[j] {
                    col_idx.push(nj);
                    values.push(v);
                }
            }
            row_ptr[n + 1] = col_idx.len();
        }
        Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for (i, row) in d.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] = v;
            }
        }
        d
    }

    /// Plain coordinate format: a `rows cols nnz` header, then one
    /// 1-based `i j value` line per stored entry.
    pub fn write_coordinate<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{} {} {}", self.nrows, self.ncols, self.nnz())?;
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                writeln!(w, "{} {} {:.17e}", i + 1, j + 1, v)?;
            }
        }
        Ok(())
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn element_pattern_and_scatter() {
        let e0 = [0usize, 2];
        let e1 = [2usize, 1];
        let mut a = CsrMatrix::from_element_pattern(3, 3, [(&e0[..], &e0[..]), (&e1[..], &e1[..])]);
        assert_eq!(a.nnz(), 7);
        a.add_block(&e0, &e0, &[1.0, 2.0, 2.0, 3.0]);
        a.add_block(&e1, &e1, &[4.0, 5.0, 5.0, 6.0]);
        assert_eq!(a.get(2, 2), 7.0);
        assert_eq!(a.get(0, 1), 0.0);
        assert_eq!(a.symmetry_defect(), 0.0);
        assert_eq!(a.apply(&[1.0, 1.0, 1.0]), vec![3.0, 11.0, 14.0]);
    }

    #[test]
    fn transpose_products_agree() {
        let a = CsrMatrix::from_triplets(2, 3, &[(0, 0, 1.0), (0, 2, 2.0), (1, 1, 3.0), (1, 1, 1.0)]);
        assert_eq!(a.get(1, 1), 4.0);
        let x = [1.0, -2.0];
        assert_eq!(a.apply_transpose(&x), a.transpose().apply(&x));
        assert_eq!(a.transpose().transpose(), a);
    }

    #[test]
    fn restriction_drops_indices() {
        let a = CsrMatrix::from_triplets(3, 3, &[(0, 0, 1.0), (1, 1, 2.0), (2, 2, 3.0), (0, 2, 5.0)]);
        let keep = [Some(0), None, Some(1)];
        let r = a.restrict(&keep, &keep, 2, 2);
        assert_eq!(r.to_dense(), vec![vec![1.0, 5.0], vec![0.0, 3.0]]);
    }

    #[test]
    fn coordinate_export() {
        let a = CsrMatrix::from_triplets(2, 2, &[(1, 0, 0.5)]);
        let mut out = Vec::new();
        a.write_coordinate(&mut out).unwrap();
        let s = String::from_utf8(out).unwrap();
        assert!(s.starts_with("2 2 1\n2 1 5.0"));
    }
}
