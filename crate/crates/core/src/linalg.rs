//! Dense row-major matrix and the solver toolbox used across the crate.
//!
//! Deliberately small: matrix-vector products, Gaussian elimination with
//! partial pivoting, Gauss-Jordan inversion, and a cyclic Jacobi
//! eigendecomposition for symmetric matrices. The Jacobi path backs the
//! minimum-norm least-squares fallback for rank-deficient designs.

use serde::{Deserialize, Serialize};

/// Dense fp64 matrix, row-major storage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    /// Builds from row slices; panics if rows are ragged.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let nrows = rows.len();
        let ncols = if nrows == 0 { 0 } else { rows[0].len() };
        let mut data = Vec::with_capacity(nrows * ncols);
        for r in rows {
            assert_eq!(r.len(), ncols, "ragged rows");
            data.extend_from_slice(r);
        }
        Matrix {
            rows: nrows,
            cols: ncols,
            data,
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Matrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    /// Takes ownership of a flat row-major buffer.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "buffer length mismatch");
        Matrix { rows, cols, data }
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
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.cols, "matvec dimension mismatch");
        (0..self.rows)
            .map(|i| dot(self.row(i), v))
            .collect()
    }

    /// Xᵀ v without materializing the transpose.
    pub fn t_matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.rows, "t_matvec dimension mismatch");
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            let r = self.row(i);
            let vi = v[i];
            for j in 0..self.cols {
                out[j] += r[j] * vi;
            }
        }
        out
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let aik = self.get(i, k);
                if aik == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += aik * other.get(k, j);
                }
            }
        }
        out
    }

    /// Gram matrix XᵀX (symmetric, cols×cols).
    pub fn gram(&self) -> Matrix {
        let d = self.cols;
        let mut g = Matrix::zeros(d, d);
        for i in 0..self.rows {
            let r = self.row(i);
            for a in 0..d {
                let ra = r[a];
                if ra == 0.0 {
                    continue;
                }
                for b in a..d {
                    g.data[a * d + b] += ra * r[b];
                }
            }
        }
        for a in 0..d {
            for b in 0..a {
                g.data[a * d + b] = g.data[b * d + a];
            }
        }
        g
    }

    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut out = Matrix::zeros(idx.len(), self.cols);
        for (k, &i) in idx.iter().enumerate() {
            out.row_mut(k).copy_from_slice(self.row(i));
        }
        out
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves A x = b by Gaussian elimination with partial pivoting.
/// Returns `None` when a pivot collapses below a scale-relative threshold.
pub fn solve(a: &Matrix, b: &[f64]) -> Option<Vec<f64>> {
    assert_eq!(a.rows, a.cols, "solve expects a square system");
    assert_eq!(b.len(), a.rows);
    let n = a.rows;
    let mut m = a.clone();
    let mut rhs = b.to_vec();

    let scale = m.data.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let tol = scale.max(1.0) * 1e-12 * n as f64;

    for col in 0..n {
        let mut pivot_row = col;
        let mut pivot_abs = m.get(col, col).abs();
        for r in col + 1..n {
            let v = m.get(r, col).abs();
            if v > pivot_abs {
                pivot_abs = v;
                pivot_row = r;
            }
        }
        if pivot_abs < tol {
            return None;
        }
        if pivot_row != col {
            for j in 0..n {
                let tmp = m.get(col, j);
                m.set(col, j, m.get(pivot_row, j));
                m.set(pivot_row, j, tmp);
            }
            rhs.swap(col, pivot_row);
        }
        let pivot = m.get(col, col);
        for r in col + 1..n {
            let factor = m.get(r, col) / pivot;
            if factor == 0.0 {
                continue;
            }
            for j in col..n {
                let v = m.get(r, j) - factor * m.get(col, j);
                m.set(r, j, v);
            }
            rhs[r] -= factor * rhs[col];
        }
    }

    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut acc = rhs[i];
        for j in i + 1..n {
            acc -= m.get(i, j) * x[j];
        }
        x[i] = acc / m.get(i, i);
    }
    Some(x)
}

/// Gauss-Jordan inverse. `None` if singular at the same threshold as [`solve`].
pub fn invert(a: &Matrix) -> Option<Matrix> {
    assert_eq!(a.rows, a.cols);
    let n = a.rows;
    let mut m = a.clone();
    let mut inv = Matrix::identity(n);

    let scale = m.data.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let tol = scale.max(1.0) * 1e-12 * n as f64;

    for col in 0..n {
        let mut pivot_row = col;
        let mut pivot_abs = m.get(col, col).abs();
        for r in col + 1..n {
            let v = m.get(r, col).abs();
            if v > pivot_abs {
                pivot_abs = v;
                pivot_row = r;
            }
        }
        if pivot_abs < tol {
            return None;
        }
        if pivot_row != col {
            for j in 0..n {
                let tmp = m.get(col, j);
                m.set(col, j, m.get(pivot_row, j));
                m.set(pivot_row, j, tmp);
                let tmp = inv.get(col, j);
                inv.set(col, j, inv.get(pivot_row, j));
                inv.set(pivot_row, j, tmp);
            }
        }
        let pivot = m.get(col, col);
        for j in 0..n {
            m.set(col, j, m.get(col, j) / pivot);
            inv.set(col, j, inv.get(col, j) / pivot);
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let factor = m.get(r, col);
            if factor == 0.0 {
                continue;
            }
            for j in 0..n {
                let v = m.get(r, j) - factor * m.get(col, j);
                m.set(r, j, v);
                let v = inv.get(r, j) - factor * inv.get(col, j);
                inv.set(r, j, v);
            }
        }
    }
    Some(inv)
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns (eigenvalues, eigenvectors as columns); not sorted.
pub fn jacobi_eigen(a: &Matrix) -> (Vec<f64>, Matrix) {
    assert_eq!(a.rows, a.cols, "jacobi_eigen expects symmetric square input");
    let n = a.rows;
    let mut m = a.clone();
    let mut v = Matrix::identity(n);

    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += m.get(p, q) * m.get(p, q);
            }
        }
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m.get(p, q);
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (m.get(q, q) - m.get(p, p)) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // rotate rows/cols p,q of m
                for k in 0..n {
                    let mkp = m.get(k, p);
                    let mkq = m.get(k, q);
                    m.set(k, p, c * mkp - s * mkq);
                    m.set(k, q, s * mkp + c * mkq);
                }
                for k in 0..n {
                    let mpk = m.get(p, k);
                    let mqk = m.get(q, k);
                    m.set(p, k, c * mpk - s * mqk);
                    m.set(q, k, s * mpk + c * mqk);
                }
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }

    let eig = (0..n).map(|i| m.get(i, i)).collect();
    (eig, v)
}

/// Minimum-norm least-squares solution of X w ≈ y via the pseudo-inverse
/// of the Gram matrix: w = (XᵀX)⁺ Xᵀ y. Handles rank-deficient designs.
pub fn min_norm_lstsq(x: &Matrix, y: &[f64]) -> Vec<f64> {
    let g = x.gram();
    let b = x.t_matvec(y);
    let (eig, v) = jacobi_eigen(&g);
    let lam_max = eig.iter().fold(0.0f64, |acc, &l| acc.max(l.abs()));
    let cutoff = lam_max * 1e-12 * g.rows() as f64;

    // w = V Λ⁺ Vᵀ b
    let d = g.rows();
    let mut vt_b = vec![0.0; d];
    for j in 0..d {
        let mut acc = 0.0;
        for i in 0..d {
            acc += v.get(i, j) * b[i];
        }
        vt_b[j] = if eig[j].abs() > cutoff {
            acc / eig[j]
        } else {
            0.0
        };
    }
    let mut w = vec![0.0; d];
    for i in 0..d {
        let mut acc = 0.0;
        for j in 0..d {
            acc += v.get(i, j) * vt_b[j];
        }
        w[i] = acc;
    }
    w
}

pub fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.iter().sum::<f64>() / v.len() as f64
}

/// Population variance (1/n convention).
pub fn variance(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let m = mean(v);
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solve_known_system() {
        // 2x + y = 5, x + 3y = 10 -> x = 1, y = 3
        let a = Matrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 3.0]]);
        let x = solve(&a, &[5.0, 10.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12);
        assert!((x[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn solve_detects_singular() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]);
        assert!(solve(&a, &[1.0, 2.0]).is_none());
    }

    #[test]
    fn invert_round_trips() {
        let a = Matrix::from_rows(&[
            vec![4.0, 1.0, 0.5],
            vec![1.0, 3.0, -1.0],
            vec![0.5, -1.0, 5.0],
        ]);
        let inv = invert(&a).unwrap();
        let prod = a.matmul(&inv);
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((prod.get(i, j) - expect).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn jacobi_recovers_known_spectrum() {
        // eigenvalues of [[2,1],[1,2]] are 1 and 3
        let a = Matrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]);
        let (mut eig, v) = jacobi_eigen(&a);
        eig.sort_by(|x, y| x.partial_cmp(y).unwrap());
        assert!((eig[0] - 1.0).abs() < 1e-10);
        assert!((eig[1] - 3.0).abs() < 1e-10);
        // eigenvectors stay orthonormal
        let vtv = v.transpose().matmul(&v);
        for i in 0..2 {
            for j in 0..2 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((vtv.get(i, j) - expect).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn min_norm_on_rank_deficient_design() {
        // duplicate column: x2 = x1; min-norm splits the weight evenly
        let x = Matrix::from_rows(&[
            vec![1.0, 1.0],
            vec![2.0, 2.0],
            vec![3.0, 3.0],
        ]);
        let y = vec![2.0, 4.0, 6.0]; // y = 2*x1
        let w = min_norm_lstsq(&x, &y);
        assert!((w[0] - 1.0).abs() < 1e-8, "w = {:?}", w);
        assert!((w[1] - 1.0).abs() < 1e-8, "w = {:?}", w);
    }

    #[test]
    fn gram_matches_explicit_product() {
        let x = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]);
        let g = x.gram();
        let g2 = x.transpose().matmul(&x);
        for i in 0..2 {
            for j in 0..2 {
                assert!((g.get(i, j) - g2.get(i, j)).abs() < 1e-12);
            }
        }
    }
}
