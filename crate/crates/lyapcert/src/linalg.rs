//! Dense real linear algebra shared by every other module.
//!
//! A minimal, row-major dense matrix type with the operations the rest of
//! the crate needs: symmetric eigenvalues (cyclic Jacobi), singular values
//! (one-sided Jacobi), tolerant numerical rank, Kronecker products,
//! Cholesky factorization, and least-squares solves.
//!
//! Design notes:
//!
//! - Row-major storage: `data[i * cols + j] = A[i, j]`.
//! - No external linear algebra dependencies. All matrices in this crate
//!   are tiny (dimension below ~110), so simple O(n^3) kernels are fine
//!   and keep the results bit-for-bit deterministic.
//! - All values are immutable in spirit: operations return fresh matrices.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MatError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: String, got: String },
    #[error("matrix entries must be finite")]
    NonFinite,
    #[error("matrix must be symmetric (max asymmetry {max_asym:.3e})")]
    NotSymmetric { max_asym: f64 },
    #[error("matrix is empty")]
    Empty,
    #[error("matrix is not positive definite (pivot {pivot:.3e} at {index})")]
    NotPositiveDefinite { pivot: f64, index: usize },
}

/// Dense real matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Mat { rows: r, cols: c, data }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "data length must be rows*cols");
        Mat { rows, cols, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Mat::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    pub fn col_vec(entries: &[f64]) -> Self {
        Mat::from_vec(entries.len(), 1, entries.to_vec())
    }

    pub fn diag(entries: &[f64]) -> Self {
        let mut m = Mat::zeros(entries.len(), entries.len());
        for (i, &v) in entries.iter().enumerate() {
            m.set(i, i, v);
        }
        m
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
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn add_at(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] += v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0 || self.cols == 0
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Mat {
        let mut t = Mat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    pub fn matmul(&self, rhs: &Mat) -> Mat {
        assert_eq!(self.cols, rhs.rows, "matmul dimension mismatch");
        let mut out = Mat::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..rhs.cols {
                    out.data[i * rhs.cols + j] += a * rhs.get(k, j);
                }
            }
        }
        out
    }

    /// Matrix-vector product.
    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len(), "matvec dimension mismatch");
        let mut out = vec![0.0; self.rows];
        for i in 0..self.rows {
            let mut acc = 0.0;
            for j in 0..self.cols {
                acc += self.get(i, j) * v[j];
            }
            out[i] = acc;
        }
        out
    }

    pub fn add(&self, rhs: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        let data = self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect();
        Mat { rows: self.rows, cols: self.cols, data }
    }

    pub fn sub(&self, rhs: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        let data = self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect();
        Mat { rows: self.rows, cols: self.cols, data }
    }

    pub fn scale(&self, s: f64) -> Mat {
        let data = self.data.iter().map(|a| a * s).collect();
        Mat { rows: self.rows, cols: self.cols, data }
    }

    pub fn neg(&self) -> Mat {
        self.scale(-1.0)
    }

    /// A^T * B without forming the transpose.
    pub fn t_matmul(&self, rhs: &Mat) -> Mat {
        assert_eq!(self.rows, rhs.rows, "t_matmul dimension mismatch");
        let mut out = Mat::zeros(self.cols, rhs.cols);
        for k in 0..self.rows {
            for i in 0..self.cols {
                let a = self.get(k, i);
                if a == 0.0 {
                    continue;
                }
                for j in 0..rhs.cols {
                    out.data[i * rhs.cols + j] += a * rhs.get(k, j);
                }
            }
        }
        out
    }

    /// Congruence X^T S X for symmetric S.
    pub fn congruence(x: &Mat, s: &Mat) -> Mat {
        x.t_matmul(&s.matmul(x))
    }

    /// Frobenius inner product <A, B>.
    pub fn dot(&self, rhs: &Mat) -> f64 {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        self.data.iter().zip(&rhs.data).map(|(a, b)| a * b).sum()
    }

    pub fn trace(&self) -> f64 {
        assert_eq!(self.rows, self.cols);
        (0..self.rows).map(|i| self.get(i, i)).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn frob_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Writes `block` into self with top-left corner at (i, j).
    pub fn set_block(&mut self, i: usize, j: usize, block: &Mat) {
        assert!(i + block.rows <= self.rows && j + block.cols <= self.cols);
        for r in 0..block.rows {
            for c in 0..block.cols {
                self.set(i + r, j + c, block.get(r, c));
            }
        }
    }

    pub fn block(&self, i: usize, j: usize, rows: usize, cols: usize) -> Mat {
        assert!(i + rows <= self.rows && j + cols <= self.cols);
        Mat::from_fn(rows, cols, |r, c| self.get(i + r, j + c))
    }

    /// Principal submatrix on the given index set.
    pub fn select(&self, keep: &[usize]) -> Mat {
        Mat::from_fn(keep.len(), keep.len(), |r, c| self.get(keep[r], keep[c]))
    }

    pub fn hstack(parts: &[&Mat]) -> Mat {
        let rows = parts[0].rows;
        let cols = parts.iter().map(|p| p.cols).sum();
        let mut out = Mat::zeros(rows, cols);
        let mut off = 0;
        for p in parts {
            assert_eq!(p.rows, rows, "hstack row mismatch");
            out.set_block(0, off, p);
            off += p.cols;
        }
        out
    }

    pub fn vstack(parts: &[&Mat]) -> Mat {
        let cols = parts[0].cols;
        let rows = parts.iter().map(|p| p.rows).sum();
        let mut out = Mat::zeros(rows, cols);
        let mut off = 0;
        for p in parts {
            assert_eq!(p.cols, cols, "vstack col mismatch");
            out.set_block(off, 0, p);
            off += p.rows;
        }
        out
    }

    /// Kronecker product, dimensions (rA*rB) x (cA*cB).
    pub fn kron(&self, rhs: &Mat) -> Mat {
        let mut out = Mat::zeros(self.rows * rhs.rows, self.cols * rhs.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let a = self.get(i, j);
                if a == 0.0 {
                    continue;
                }
                for k in 0..rhs.rows {
                    for l in 0..rhs.cols {
                        out.set(i * rhs.rows + k, j * rhs.cols + l, a * rhs.get(k, l));
                    }
                }
            }
        }
        out
    }

    /// Singular values in descending order, via one-sided Jacobi.
    ///
    /// One-sided Jacobi computes small singular values to high relative
    /// accuracy, which the rank tolerance test depends on.
    pub fn singular_values(&self) -> Result<Vec<f64>, MatError> {
        if self.is_empty() {
            return Err(MatError::Empty);
        }
        if !self.all_finite() {
            return Err(MatError::NonFinite);
        }
        // Work on a tall copy: one-sided Jacobi orthogonalizes columns.
        let mut a = if self.rows >= self.cols { self.clone() } else { self.transpose() };
        let n = a.cols;
        let m = a.rows;
        let eps = 1e-15;
        for _sweep in 0..60 {
            let mut off = 0.0_f64;
            for p in 0..n {
                for q in (p + 1)..n {
                    let mut app = 0.0;
                    let mut aqq = 0.0;
                    let mut apq = 0.0;
                    for i in 0..m {
                        let x = a.get(i, p);
                        let y = a.get(i, q);
                        app += x * x;
                        aqq += y * y;
                        apq += x * y;
                    }
                    if apq.abs() <= eps * (app * aqq).sqrt() {
                        continue;
                    }
                    off = off.max(apq.abs() / (app * aqq).sqrt().max(f64::MIN_POSITIVE));
                    let tau = (aqq - app) / (2.0 * apq);
                    let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = c * t;
                    for i in 0..m {
                        let x = a.get(i, p);
                        let y = a.get(i, q);
                        a.set(i, p, c * x - s * y);
                        a.set(i, q, s * x + c * y);
                    }
                }
            }
            if off < eps {
                break;
            }
        }
        let mut sv: Vec<f64> = (0..n)
            .map(|j| (0..m).map(|i| a.get(i, j).powi(2)).sum::<f64>().sqrt())
            .collect();
        sv.sort_by(|x, y| y.total_cmp(x));
        Ok(sv)
    }

    /// Numerical rank: number of singular values above
    /// tau = max(rows, cols) * sigma_max * 1e-9. Rank 0 when sigma_max = 0.
    pub fn rank(&self) -> Result<usize, MatError> {
        let sv = self.singular_values()?;
        let smax = sv[0];
        if smax == 0.0 {
            return Ok(0);
        }
        let tau = self.rows.max(self.cols) as f64 * smax * 1e-9;
        Ok(sv.iter().filter(|&&s| s > tau).count())
    }

    /// Minimum-norm least-squares solution of `self * X = B` via the SVD
    /// pseudoinverse (singular values below the rank tolerance dropped).
    pub fn lstsq(&self, b: &Mat) -> Result<Mat, MatError> {
        assert_eq!(self.rows, b.rows, "lstsq dimension mismatch");
        let (u, sv, v) = self.svd()?;
        let smax = sv.first().copied().unwrap_or(0.0);
        let tau = self.rows.max(self.cols) as f64 * smax * 1e-9;
        // X = V diag(1/s) U^T B on the retained spectrum
        let utb = u.t_matmul(b);
        let mut scaled = Mat::zeros(v.cols(), b.cols);
        for k in 0..sv.len() {
            if sv[k] > tau {
                for j in 0..b.cols {
                    scaled.set(k, j, utb.get(k, j) / sv[k]);
                }
            }
        }
        Ok(v.matmul(&scaled))
    }

    /// Thin SVD (U, s, V) with self = U diag(s) V^T, via one-sided Jacobi.
    pub fn svd(&self) -> Result<(Mat, Vec<f64>, Mat), MatError> {
        if self.is_empty() {
            return Err(MatError::Empty);
        }
        if !self.all_finite() {
            return Err(MatError::NonFinite);
        }
        let transposed = self.rows < self.cols;
        let mut a = if transposed { self.transpose() } else { self.clone() };
        let m = a.rows;
        let n = a.cols;
        let mut v = Mat::identity(n);
        let eps = 1e-15;
        for _sweep in 0..60 {
            let mut converged = true;
            for p in 0..n {
                for q in (p + 1)..n {
                    let mut app = 0.0;
                    let mut aqq = 0.0;
                    let mut apq = 0.0;
                    for i in 0..m {
                        let x = a.get(i, p);
                        let y = a.get(i, q);
                        app += x * x;
                        aqq += y * y;
                        apq += x * y;
                    }
                    if apq.abs() <= eps * (app * aqq).sqrt() {
                        continue;
                    }
                    converged = false;
                    let tau = (aqq - app) / (2.0 * apq);
                    let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = c * t;
                    for i in 0..m {
                        let x = a.get(i, p);
                        let y = a.get(i, q);
                        a.set(i, p, c * x - s * y);
                        a.set(i, q, s * x + c * y);
                    }
                    for i in 0..n {
                        let x = v.get(i, p);
                        let y = v.get(i, q);
                        v.set(i, p, c * x - s * y);
                        v.set(i, q, s * x + c * y);
                    }
                }
            }
            if converged {
                break;
            }
        }
        let mut order: Vec<usize> = (0..n).collect();
        let norms: Vec<f64> = (0..n)
            .map(|j| (0..m).map(|i| a.get(i, j).powi(2)).sum::<f64>().sqrt())
            .collect();
        order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));
        let mut u = Mat::zeros(m, n);
        let mut vs = Mat::zeros(n, n);
        let mut sv = vec![0.0; n];
        for (k, &j) in order.iter().enumerate() {
            sv[k] = norms[j];
            let inv = if norms[j] > 0.0 { 1.0 / norms[j] } else { 0.0 };
            for i in 0..m {
                u.set(i, k, a.get(i, j) * inv);
            }
            for i in 0..n {
                vs.set(i, k, v.get(i, j));
            }
        }
        if transposed {
            Ok((vs, sv, u))
        } else {
            Ok((u, sv, vs))
        }
    }

    /// Cholesky factor L with self = L L^T. Fails on non-PD input.
    pub fn cholesky(&self) -> Result<Mat, MatError> {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let mut l = Mat::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let mut sum = self.get(i, j);
                for k in 0..j {
                    sum -= l.get(i, k) * l.get(j, k);
                }
                if i == j {
                    if sum <= 0.0 {
                        return Err(MatError::NotPositiveDefinite { pivot: sum, index: i });
                    }
                    l.set(i, j, sum.sqrt());
                } else {
                    l.set(i, j, sum / l.get(j, j));
                }
            }
        }
        Ok(l)
    }

    /// Solves L y = b for lower-triangular L.
    pub fn forward_sub(&self, b: &[f64]) -> Vec<f64> {
        let n = self.rows;
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut acc = b[i];
            for k in 0..i {
                acc -= self.get(i, k) * y[k];
            }
            y[i] = acc / self.get(i, i);
        }
        y
    }

    /// Solves L^T x = y for lower-triangular L.
    pub fn back_sub_t(&self, y: &[f64]) -> Vec<f64> {
        let n = self.rows;
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let mut acc = y[i];
            for k in (i + 1)..n {
                acc -= self.get(k, i) * x[k];
            }
            x[i] = acc / self.get(i, i);
        }
        x
    }
}

/// Symmetric matrix wrapper. Construction checks the symmetry defect
/// against 1e-12 * (1 + max |entry|).
#[derive(Debug, Clone, PartialEq)]
pub struct SymMat {
    mat: Mat,
}

impl SymMat {
    pub fn new(mat: Mat) -> Result<Self, MatError> {
        assert_eq!(mat.rows(), mat.cols(), "SymMat must be square");
        if !mat.all_finite() {
            return Err(MatError::NonFinite);
        }
        let mut max_asym = 0.0_f64;
        for i in 0..mat.rows() {
            for j in (i + 1)..mat.cols() {
                max_asym = max_asym.max((mat.get(i, j) - mat.get(j, i)).abs());
            }
        }
        if max_asym > 1e-12 * (1.0 + mat.max_abs()) {
            return Err(MatError::NotSymmetric { max_asym });
        }
        Ok(SymMat { mat })
    }

    /// Builds from any square matrix by averaging with its transpose.
    pub fn symmetrize(mat: &Mat) -> Self {
        let sym = mat.add(&mat.transpose()).scale(0.5);
        SymMat { mat: sym }
    }

    pub fn zeros(dim: usize) -> Self {
        SymMat { mat: Mat::zeros(dim, dim) }
    }

    pub fn identity(dim: usize) -> Self {
        SymMat { mat: Mat::identity(dim) }
    }

    pub fn dim(&self) -> usize {
        self.mat.rows()
    }

    pub fn mat(&self) -> &Mat {
        &self.mat
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.mat.get(i, j)
    }

    /// Eigenvalues in ascending order with orthonormal eigenvectors as
    /// columns of the returned matrix, by the cyclic Jacobi method.
    pub fn eig(&self) -> (Vec<f64>, Mat) {
        let n = self.dim();
        let mut a = self.mat.clone();
        let mut v = Mat::identity(n);
        if n == 0 {
            return (vec![], v);
        }
        let eps = 1e-15;
        for _sweep in 0..100 {
            let mut off = 0.0_f64;
            for p in 0..n {
                for q in (p + 1)..n {
                    off += a.get(p, q).powi(2);
                }
            }
            let scale = a.frob_norm().max(f64::MIN_POSITIVE);
            if off.sqrt() <= eps * scale {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a.get(p, q);
                    if apq.abs() <= 1e-300 {
                        continue;
                    }
                    let app = a.get(p, p);
                    let aqq = a.get(q, q);
                    let tau = (aqq - app) / (2.0 * apq);
                    let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = c * t;
                    // Rotate rows/cols p and q of A, accumulate in V.
                    for k in 0..n {
                        let akp = a.get(k, p);
                        let akq = a.get(k, q);
                        a.set(k, p, c * akp - s * akq);
                        a.set(k, q, s * akp + c * akq);
                    }
                    for k in 0..n {
                        let apk = a.get(p, k);
                        let aqk = a.get(q, k);
                        a.set(p, k, c * apk - s * aqk);
                        a.set(q, k, s * apk + c * aqk);
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
        let mut pairs: Vec<(f64, usize)> = (0..n).map(|i| (a.get(i, i), i)).collect();
        pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
        let vals: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let mut vecs = Mat::zeros(n, n);
        for (k, &(_, idx)) in pairs.iter().enumerate() {
            for i in 0..n {
                vecs.set(i, k, v.get(i, idx));
            }
        }
        (vals, vecs)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.eig().0
    }

    /// Smallest eigenvalue.
    pub fn min_eig(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }

    /// Largest absolute eigenvalue.
    pub fn spectral_radius(&self) -> f64 {
        self.eigenvalues().iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// f(self) for a scalar spectral function f, via eigendecomposition.
    pub fn spectral_map(&self, f: impl Fn(f64) -> f64) -> Mat {
        let (vals, vecs) = self.eig();
        let n = self.dim();
        let mut out = Mat::zeros(n, n);
        for k in 0..n {
            let fv = f(vals[k]);
            if fv == 0.0 {
                continue;
            }
            for i in 0..n {
                let vik = vecs.get(i, k);
                if vik == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out.add_at(i, j, fv * vik * vecs.get(j, k));
                }
            }
        }
        out
    }
}

/// Smallest eigenvalue of a symmetric matrix, checking the symmetry
/// invariant first.
pub fn min_eig(m: &Mat) -> Result<f64, MatError> {
    let s = SymMat::new(m.clone())?;
    Ok(s.min_eig())
}
