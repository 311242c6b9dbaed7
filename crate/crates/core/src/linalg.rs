//! Dense complex and real matrix arithmetic at MIMO scale.
//!
//! Everything here is row-major `Vec`-backed and sized for matrices of at
//! most a few dozen entries per side. The learning stack works on the
//! equivalent real model produced by [`to_real_composite`]; complex form is
//! kept only at the simulation boundary.

use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LinalgError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix is not symmetric within tolerance (max asymmetry {0:.3e})")]
    NonSymmetric(f64),
    #[error("matrix is not positive semidefinite (eigenvalue {0:.3e})")]
    NonPsd(f64),
    #[error("singular system")]
    Singular,
}

/// Dense complex matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn from_data(rows: usize, cols: usize, data: Vec<Complex64>) -> Self {
        assert_eq!(data.len(), rows * cols, "entry count must be rows*cols");
        Self { rows, cols, data }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn matmul(&self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.cols, rhs.rows, "inner dimensions must agree");
        let mut out = ComplexMatrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                for j in 0..rhs.cols {
                    out[(i, j)] += a * rhs[(k, j)];
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(self.cols, v.len(), "matrix-vector dimensions must agree");
        let mut out = vec![Complex64::new(0.0, 0.0); self.rows];
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[i] += self[(i, j)] * v[j];
            }
        }
        out
    }

    /// Scale all entries in place.
    pub fn scale(&mut self, c: f64) {
        for z in &mut self.data {
            *z *= c;
        }
    }
}

impl std::ops::Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Dense real matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct RealMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl RealMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_data(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "entry count must be rows*cols");
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Self { rows: r, cols: c, data }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> RealMatrix {
        let mut out = RealMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)];
            }
        }
        out
    }

    pub fn matmul(&self, rhs: &RealMatrix) -> RealMatrix {
        assert_eq!(self.cols, rhs.rows, "inner dimensions must agree");
        let mut out = RealMatrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                for j in 0..rhs.cols {
                    out[(i, j)] += a * rhs[(k, j)];
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len(), "matrix-vector dimensions must agree");
        let mut out = vec![0.0; self.rows];
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[i] += self[(i, j)] * v[j];
            }
        }
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn max_abs_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }
}

impl std::ops::Index<(usize, usize)> for RealMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for RealMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Equivalent real model of a complex matrix:
/// `[[Re H, -Im H], [Im H, Re H]]`, shape `2n x 2m`.
///
/// This is a ring homomorphism, so products and regularized solves carried
/// out on the transform agree with their complex counterparts.
pub fn to_real_composite(h: &ComplexMatrix) -> RealMatrix {
    let (n, m) = (h.rows(), h.cols());
    let mut out = RealMatrix::zeros(2 * n, 2 * m);
    for i in 0..n {
        for j in 0..m {
            let z = h[(i, j)];
            out[(i, j)] = z.re;
            out[(i, j + m)] = -z.im;
            out[(i + n, j)] = z.im;
            out[(i + n, j + m)] = z.re;
        }
    }
    out
}

/// Stack `[Re v; Im v]`.
pub fn to_real_vector(v: &[Complex64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * v.len());
    out.extend(v.iter().map(|z| z.re));
    out.extend(v.iter().map(|z| z.im));
    out
}

/// Inverse of [`to_real_vector`].
pub fn from_real_vector(v: &[f64]) -> Vec<Complex64> {
    assert!(v.len().is_multiple_of(2), "real-composite vector must have even length");
    let n = v.len() / 2;
    (0..n).map(|i| Complex64::new(v[i], v[i + n])).collect()
}

/// Jacobi eigendecomposition of a symmetric matrix: returns `(eigenvalues,
/// V)` with `A = V diag(w) V^T` and V's columns the eigenvectors.
fn symmetric_eigen(a: &RealMatrix) -> (Vec<f64>, RealMatrix) {
    let n = a.rows();
    let mut m = a.clone();
    let mut v = RealMatrix::identity(n);
    // Cyclic Jacobi sweeps; plenty for n <= 8.
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += m[(i, j)] * m[(i, j)];
            }
        }
        if off.sqrt() <= 1e-14 * (1.0 + m.frobenius_norm()) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if m[(p, q)].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * m[(p, q)]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let w = (0..n).map(|i| m[(i, i)]).collect();
    (w, v)
}

/// Symmetric PSD square root via eigendecomposition.
///
/// Eigenvalues in `[-1e-10, 0)` are clamped to zero so rank-deficient
/// correlation matrices (coefficient 1) still work; anything below that
/// is rejected as non-PSD.
pub fn psd_sqrt(r: &RealMatrix) -> Result<RealMatrix, LinalgError> {
    if r.rows() != r.cols() {
        return Err(LinalgError::DimensionMismatch(format!(
            "psd_sqrt needs a square matrix, got {}x{}",
            r.rows(),
            r.cols()
        )));
    }
    let scale = r.data().iter().fold(1.0f64, |m, x| m.max(x.abs()));
    let asym = r.max_abs_asymmetry();
    if asym > 1e-12 * scale {
        return Err(LinalgError::NonSymmetric(asym));
    }
    let (w, v) = symmetric_eigen(r);
    let mut sqrt_w = Vec::with_capacity(w.len());
    for &lambda in &w {
        if lambda < -1e-10 {
            return Err(LinalgError::NonPsd(lambda));
        }
        sqrt_w.push(lambda.max(0.0).sqrt());
    }
    // S = V diag(sqrt_w) V^T
    let n = r.rows();
    let mut s = RealMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let mut acc = 0.0;
            for k in 0..n {
                acc += v[(i, k)] * sqrt_w[k] * v[(j, k)];
            }
            s[(i, j)] = acc;
        }
    }
    // Symmetrize away roundoff.
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (s[(i, j)] + s[(j, i)]);
            s[(i, j)] = avg;
            s[(j, i)] = avg;
        }
    }
    Ok(s)
}

/// Solve a square linear system by Gaussian elimination with partial
/// pivoting. Errors on effectively zero pivots.
fn solve_square(a: &RealMatrix, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
    let n = a.rows();
    assert_eq!(a.cols(), n);
    assert_eq!(b.len(), n);
    let mut m = a.clone();
    let mut x = b.to_vec();
    let scale = m.data().iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let tol = 1e-12 * scale.max(1.0);
    for col in 0..n {
        let mut pivot = col;
        for row in (col + 1)..n {
            if m[(row, col)].abs() > m[(pivot, col)].abs() {
                pivot = row;
            }
        }
        if m[(pivot, col)].abs() <= tol {
            return Err(LinalgError::Singular);
        }
        if pivot != col {
            for j in 0..n {
                let tmp = m[(col, j)];
                m[(col, j)] = m[(pivot, j)];
                m[(pivot, j)] = tmp;
            }
            x.swap(col, pivot);
        }
        let inv = 1.0 / m[(col, col)];
        for row in (col + 1)..n {
            let f = m[(row, col)] * inv;
            if f == 0.0 {
                continue;
            }
            for j in col..n {
                let v = m[(col, j)];
                m[(row, j)] -= f * v;
            }
            x[row] -= f * x[col];
        }
    }
    for col in (0..n).rev() {
        let mut acc = x[col];
        for j in (col + 1)..n {
            acc -= m[(col, j)] * x[j];
        }
        x[col] = acc / m[(col, col)];
    }
    Ok(x)
}

/// Ridge-regularized least squares: returns `(A^T A + lambda I)^{-1} A^T b`.
///
/// `lambda = 0` requires A to have full column rank and yields the plain
/// least-squares solution.
pub fn solve_regularized(
    a: &RealMatrix,
    lambda: f64,
    b: &[f64],
) -> Result<Vec<f64>, LinalgError> {
    if a.rows() != b.len() {
        return Err(LinalgError::DimensionMismatch(format!(
            "matrix is {}x{} but rhs has length {}",
            a.rows(),
            a.cols(),
            b.len()
        )));
    }
    assert!(lambda >= 0.0, "regularizer must be nonnegative");
    let at = a.transpose();
    let mut normal = at.matmul(a);
    for i in 0..normal.rows() {
        normal[(i, i)] += lambda;
    }
    let rhs = at.matvec(b);
    solve_square(&normal, &rhs)
}
