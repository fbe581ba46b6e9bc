//! Minimal compressed sparse row storage for operators whose dimension makes
//! dense matrices wasteful. Only the operations the crate actually performs
//! on large operators are provided: matrix-vector products, Frobenius norms,
//! adjoints, and densification for small slices of the hierarchy.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<Complex64>,
}

impl CsrMatrix {
    /// Build from (row, col, value) triplets; duplicates are summed and
    /// exact zeros dropped.
    pub fn from_triplets(dim: usize, mut triplets: Vec<(usize, usize, Complex64)>) -> Self {
        triplets.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut merged: Vec<(usize, usize, Complex64)> = Vec::with_capacity(triplets.len());
        for (r, c, v) in triplets {
            debug_assert!(r < dim && c < dim);
            match merged.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => merged.push((r, c, v)),
            }
        }
        merged.retain(|&(_, _, v)| v != Complex64::new(0.0, 0.0));
        let mut row_ptr = vec![0usize; dim + 1];
        let mut cols = Vec::with_capacity(merged.len());
        let mut vals = Vec::with_capacity(merged.len());
        for (r, c, v) in merged {
            row_ptr[r + 1] += 1;
            cols.push(c);
            vals.push(v);
        }
        for r in 0..dim {
            row_ptr[r + 1] += row_ptr[r];
        }
        CsrMatrix { dim, row_ptr, cols, vals }
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn matvec(&self, x: &DVector<Complex64>) -> DVector<Complex64> {
        assert_eq!(x.len(), self.dim);
        let mut y = DVector::from_element(self.dim, Complex64::new(0.0, 0.0));
        for r in 0..self.dim {
            let mut acc = Complex64::new(0.0, 0.0);
            for i in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[i] * x[self.cols[i]];
            }
            y[r] = acc;
        }
        y
    }

    pub fn frobenius(&self) -> f64 {
        self.vals.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn adjoint(&self) -> CsrMatrix {
        let mut triplets = Vec::with_capacity(self.nnz());
        for r in 0..self.dim {
            for i in self.row_ptr[r]..self.row_ptr[r + 1] {
                triplets.push((self.cols[i], r, self.vals[i].conj()));
            }
        }
        CsrMatrix::from_triplets(self.dim, triplets)
    }

    /// Frobenius norm of the difference, without densifying.
    pub fn sub_frobenius(&self, other: &CsrMatrix) -> f64 {
        assert_eq!(self.dim, other.dim);
        let mut acc = 0.0f64;
        for r in 0..self.dim {
            let mut i = self.row_ptr[r];
            let mut j = other.row_ptr[r];
            while i < self.row_ptr[r + 1] || j < other.row_ptr[r + 1] {
                let ci = if i < self.row_ptr[r + 1] { self.cols[i] } else { usize::MAX };
                let cj = if j < other.row_ptr[r + 1] { other.cols[j] } else { usize::MAX };
                let d = if ci == cj {
                    let d = self.vals[i] - other.vals[j];
                    i += 1;
                    j += 1;
                    d
                } else if ci < cj {
                    let d = self.vals[i];
                    i += 1;
                    d
                } else {
                    let d = -other.vals[j];
                    j += 1;
                    d
                };
                acc += d.norm_sqr();
            }
        }
        acc.sqrt()
    }

    pub fn scale(&mut self, factor: Complex64) {
        for v in &mut self.vals {
            *v *= factor;
        }
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let mut m = DMatrix::from_element(self.dim, self.dim, Complex64::new(0.0, 0.0));
        for r in 0..self.dim {
            for i in self.row_ptr[r]..self.row_ptr[r + 1] {
                m[(r, self.cols[i])] += self.vals[i];
            }
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn triplets_merge_and_prune() {
        let m = CsrMatrix::from_triplets(
            3,
            vec![
                (0, 1, c(1.0, 0.0)),
                (0, 1, c(2.0, 1.0)),
                (2, 0, c(0.5, 0.0)),
                (1, 1, c(1.0, 0.0)),
                (1, 1, c(-1.0, 0.0)),
            ],
        );
        assert_eq!(m.nnz(), 2);
        let d = m.to_dense();
        assert_eq!(d[(0, 1)], c(3.0, 1.0));
        assert_eq!(d[(2, 0)], c(0.5, 0.0));
        assert_eq!(d[(1, 1)], c(0.0, 0.0));
    }

    #[test]
    fn matvec_matches_dense() {
        let trip = vec![
            (0, 0, c(1.0, 2.0)),
            (0, 2, c(-1.0, 0.5)),
            (1, 1, c(3.0, 0.0)),
            (2, 0, c(0.0, 1.0)),
        ];
        let m = CsrMatrix::from_triplets(3, trip);
        let d = m.to_dense();
        let x = DVector::from_vec(vec![c(1.0, 0.0), c(0.0, 1.0), c(2.0, -1.0)]);
        let via_sparse = m.matvec(&x);
        let via_dense = &d * &x;
        assert!((via_sparse - via_dense).norm() < 1e-15);
    }

    #[test]
    fn adjoint_and_difference() {
        let trip = vec![(0, 1, c(1.0, 1.0)), (1, 0, c(1.0, -1.0)), (1, 1, c(2.0, 0.0))];
        let m = CsrMatrix::from_triplets(2, trip);
        let adj = m.adjoint();
        assert!(m.sub_frobenius(&adj) < 1e-15); // hermitian example
        let mut n = m.clone();
        n.scale(c(2.0, 0.0));
        assert!((n.sub_frobenius(&m) - m.frobenius()).abs() < 1e-14);
    }

    #[test]
    fn frobenius_matches_dense() {
        let trip = vec![(0, 0, c(3.0, 4.0)), (1, 1, c(1.0, 0.0))];
        let m = CsrMatrix::from_triplets(2, trip);
        assert!((m.frobenius() - m.to_dense().norm()).abs() < 1e-15);
    }
}
