//! Dense linear algebra kernels.
//!
//! Complex matrices are stored column-major so the two hot LAPACK/BLAS
//! routines (`zheevd`, `zgemm`) can be called without copies. Everything that
//! operates on small real matrices (Cholesky, one-sided Jacobi SVD) is written
//! directly; the feature matrices are at most a few thousand entries.

use num_complex::Complex64;

use crate::{Error, Result};

mod ffi {
    use num_complex::Complex64;
    use std::os::raw::c_char;

    extern "C" {
        /// Divide-and-conquer Hermitian eigensolver.
        pub fn zheevd_(
            jobz: *const c_char,
            uplo: *const c_char,
            n: *const i32,
            a: *mut Complex64,
            lda: *const i32,
            w: *mut f64,
            work: *mut Complex64,
            lwork: *const i32,
            rwork: *mut f64,
            lrwork: *const i32,
            iwork: *mut i32,
            liwork: *const i32,
            info: *mut i32,
        );

        /// Complex general matrix multiply.
        pub fn zgemm_(
            transa: *const c_char,
            transb: *const c_char,
            m: *const i32,
            n: *const i32,
            k: *const i32,
            alpha: *const Complex64,
            a: *const Complex64,
            lda: *const i32,
            b: *const Complex64,
            ldb: *const i32,
            beta: *const Complex64,
            c: *mut Complex64,
            ldc: *const i32,
        );
    }
}

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Dense complex matrix, column-major.
#[derive(Clone, Debug, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i + i * n] = ONE;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<Complex64>]) -> Self {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        let mut m = Self::zeros(n_rows, n_cols);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), n_cols, "ragged row in CMatrix::from_rows");
            for (j, &v) in row.iter().enumerate() {
                m[(i, j)] = v;
            }
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

    /// C = self * other.
    pub fn matmul(&self, other: &CMatrix) -> CMatrix {
        self.gemm(b'N', other)
    }

    /// C = self * other^dagger.
    pub fn matmul_adjoint_rhs(&self, other: &CMatrix) -> CMatrix {
        self.gemm(b'C', other)
    }

    fn gemm(&self, transb: u8, other: &CMatrix) -> CMatrix {
        let (b_rows, b_cols) = if transb == b'N' {
            (other.rows, other.cols)
        } else {
            (other.cols, other.rows)
        };
        assert_eq!(self.cols, b_rows, "gemm dimension mismatch");
        let mut c = CMatrix::zeros(self.rows, b_cols);
        let (m, n, k) = (self.rows as i32, b_cols as i32, self.cols as i32);
        let lda = self.rows.max(1) as i32;
        let ldb = other.rows.max(1) as i32;
        let ldc = self.rows.max(1) as i32;
        unsafe {
            ffi::zgemm_(
                &(b'N' as i8),
                &(transb as i8),
                &m,
                &n,
                &k,
                &ONE,
                self.data.as_ptr(),
                &lda,
                other.data.as_ptr(),
                &ldb,
                &ZERO,
                c.data.as_mut_ptr(),
                &ldc,
            );
        }
        c
    }

    /// y = self * x.
    pub fn matvec(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.cols, "matvec dimension mismatch");
        let mut y = vec![ZERO; self.rows];
        for (j, &xj) in x.iter().enumerate() {
            if xj == ZERO {
                continue;
            }
            let col = &self.data[j * self.rows..(j + 1) * self.rows];
            for (yi, &aij) in y.iter_mut().zip(col) {
                *yi += aij * xj;
            }
        }
        y
    }

    pub fn adjoint(&self) -> CMatrix {
        let mut out = CMatrix::zeros(self.cols, self.rows);
        for j in 0..self.cols {
            for i in 0..self.rows {
                out[(j, i)] = self[(i, j)].conj();
            }
        }
        out
    }

    pub fn scale_column(&mut self, j: usize, factor: Complex64) {
        for v in &mut self.data[j * self.rows..(j + 1) * self.rows] {
            *v *= factor;
        }
    }

    /// Max column sum of absolute values.
    pub fn one_norm(&self) -> f64 {
        (0..self.cols)
            .map(|j| {
                self.data[j * self.rows..(j + 1) * self.rows]
                    .iter()
                    .map(|v| v.norm())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &CMatrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Max elementwise deviation of self^dagger * self from the identity.
    pub fn unitarity_deviation(&self) -> f64 {
        let prod = self.adjoint().matmul(self);
        prod.max_abs_diff(&CMatrix::identity(self.rows))
    }
}

impl std::ops::Index<(usize, usize)> for CMatrix {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i + j * self.rows]
    }
}

impl std::ops::IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i + j * self.rows]
    }
}

/// Eigendecomposition of a Hermitian matrix.
///
/// Returns eigenvalues in ascending order and the matrix whose columns are the
/// corresponding orthonormal eigenvectors. Only the lower triangle of `a` is
/// referenced.
pub fn eigh(a: &CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    assert_eq!(a.rows, a.cols, "eigh requires a square matrix");
    let n = a.rows;
    if n == 0 {
        return Ok((Vec::new(), CMatrix::zeros(0, 0)));
    }
    let mut vecs = a.clone();
    let mut w = vec![0.0f64; n];
    let nn = n as i32;
    let (jobz, uplo) = (b'V' as i8, b'L' as i8);
    let mut info = 0i32;

    // Workspace query, then the actual call.
    let (mut wkopt, mut rwkopt, mut iwkopt) = (ZERO, 0.0f64, 0i32);
    let neg1 = -1i32;
    unsafe {
        ffi::zheevd_(
            &jobz,
            &uplo,
            &nn,
            vecs.data.as_mut_ptr(),
            &nn,
            w.as_mut_ptr(),
            &mut wkopt,
            &neg1,
            &mut rwkopt,
            &neg1,
            &mut iwkopt,
            &neg1,
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Lapack {
            routine: "zheevd (workspace query)",
            info,
        });
    }
    let lwork = wkopt.re as i32;
    let lrwork = rwkopt as i32;
    let liwork = iwkopt;
    let mut work = vec![ZERO; lwork.max(1) as usize];
    let mut rwork = vec![0.0f64; lrwork.max(1) as usize];
    let mut iwork = vec![0i32; liwork.max(1) as usize];
    unsafe {
        ffi::zheevd_(
            &jobz,
            &uplo,
            &nn,
            vecs.data.as_mut_ptr(),
            &nn,
            w.as_mut_ptr(),
            work.as_mut_ptr(),
            &lwork,
            rwork.as_mut_ptr(),
            &lrwork,
            iwork.as_mut_ptr(),
            &liwork,
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Lapack {
            routine: "zheevd",
            info,
        });
    }
    Ok((w, vecs))
}

/// Matrix exponential by scaling-and-squaring with a Pade(13) approximant.
///
/// General-purpose route; the Hamiltonian evolution path uses [`eigh`] instead
/// because the generator there is Hermitian.
pub fn expm(a: &CMatrix) -> CMatrix {
    assert_eq!(a.rows, a.cols, "expm requires a square matrix");
    let n = a.rows;
    if n == 0 {
        return CMatrix::zeros(0, 0);
    }

    // theta_13 from Higham's scaling analysis.
    const THETA_13: f64 = 5.371_920_351_148_152;
    let norm = a.one_norm();
    let s = if norm > THETA_13 {
        (norm / THETA_13).log2().ceil() as u32
    } else {
        0
    };
    let scale = Complex64::new((0.5f64).powi(s as i32), 0.0);
    let mut a_s = a.clone();
    for v in &mut a_s.data {
        *v *= scale;
    }

    let mut result = pade13(&a_s);
    for _ in 0..s {
        result = result.matmul(&result);
    }
    result
}

const PADE_COEFFS: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

fn pade13(a: &CMatrix) -> CMatrix {
    let n = a.rows;
    let eye = CMatrix::identity(n);
    let a2 = a.matmul(a);
    let a4 = a2.matmul(&a2);
    let a6 = a2.matmul(&a4);

    let b = |k: usize| Complex64::new(PADE_COEFFS[k], 0.0);
    let lin =
        |x: &CMatrix, cx: Complex64, y: &CMatrix, cy: Complex64, z: &CMatrix, cz: Complex64| {
            let mut out = CMatrix::zeros(n, n);
            for i in 0..n * n {
                out.data[i] = x.data[i] * cx + y.data[i] * cy + z.data[i] * cz;
            }
            out
        };

    let mut w1 = lin(&a6, b(13), &a4, b(11), &a2, b(9));
    let w2 = lin(&a6, b(7), &a4, b(5), &a2, b(3));
    w1 = a6.matmul(&w1);
    for i in 0..n * n {
        w1.data[i] += w2.data[i] + eye.data[i] * b(1);
    }
    let u = a.matmul(&w1);

    let mut v1 = lin(&a6, b(12), &a4, b(10), &a2, b(8));
    let v2 = lin(&a6, b(6), &a4, b(4), &a2, b(2));
    v1 = a6.matmul(&v1);
    for i in 0..n * n {
        v1.data[i] += v2.data[i] + eye.data[i] * b(0);
    }
    let v = v1;

    // exp(A) ~= (V - U)^{-1} (V + U)
    let mut num = CMatrix::zeros(n, n);
    let mut den = CMatrix::zeros(n, n);
    for i in 0..n * n {
        num.data[i] = v.data[i] + u.data[i];
        den.data[i] = v.data[i] - u.data[i];
    }
    lu_solve(den, num)
}

/// Solve A X = B by LU with partial pivoting; consumes both operands.
fn lu_solve(mut a: CMatrix, mut b: CMatrix) -> CMatrix {
    let n = a.rows;
    let m = b.cols;
    for col in 0..n {
        let mut max_val = 0.0;
        let mut max_row = col;
        for row in col..n {
            let v = a[(row, col)].norm();
            if v > max_val {
                max_val = v;
                max_row = row;
            }
        }
        if max_row != col {
            for j in 0..n {
                a.data.swap(col + j * n, max_row + j * n);
            }
            for j in 0..m {
                b.data.swap(col + j * n, max_row + j * n);
            }
        }
        let pivot = a[(col, col)];
        assert!(pivot.norm() > 1e-300, "singular matrix in lu_solve");
        for row in col + 1..n {
            let factor = a[(row, col)] / pivot;
            if factor == ZERO {
                continue;
            }
            for j in col..n {
                let v = a[(col, j)];
                a[(row, j)] -= factor * v;
            }
            for j in 0..m {
                let v = b[(col, j)];
                b[(row, j)] -= factor * v;
            }
        }
    }
    let mut x = CMatrix::zeros(n, m);
    for j in 0..m {
        for row in (0..n).rev() {
            let mut sum = b[(row, j)];
            for k in row + 1..n {
                sum -= a[(row, k)] * x[(k, j)];
            }
            x[(row, j)] = sum / a[(row, row)];
        }
    }
    x
}

/// Thin SVD of a real matrix, any shape, by one-sided Jacobi rotations.
///
/// Returns `(u, s, v)` with `a = u * diag(s) * v^T`, singular values in
/// descending order; `u` is `rows x r` and `v` is `cols x r` where
/// `r = min(rows, cols)`, both stored row-major.
pub struct Svd {
    pub u: Vec<f64>,
    pub s: Vec<f64>,
    pub v: Vec<f64>,
    pub rank_dim: usize,
}

pub fn svd_real(rows: usize, cols: usize, a_row_major: &[f64]) -> Svd {
    assert_eq!(a_row_major.len(), rows * cols);
    if rows >= cols {
        svd_tall(rows, cols, a_row_major)
    } else {
        // SVD of A^T, then swap the factors.
        let mut at = vec![0.0; rows * cols];
        for i in 0..rows {
            for j in 0..cols {
                at[j * rows + i] = a_row_major[i * cols + j];
            }
        }
        let svd = svd_tall(cols, rows, &at);
        Svd {
            u: svd.v,
            s: svd.s,
            v: svd.u,
            rank_dim: svd.rank_dim,
        }
    }
}

fn svd_tall(m: usize, n: usize, a_row_major: &[f64]) -> Svd {
    // Work on columns; store column-major.
    let mut cols: Vec<Vec<f64>> = (0..n)
        .map(|j| (0..m).map(|i| a_row_major[i * n + j]).collect())
        .collect();
    let mut v = vec![0.0f64; n * n];
    for j in 0..n {
        v[j * n + j] = 1.0;
    }

    let tol = 1e-15;
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (alpha, beta, gamma) = {
                    let (cp, cq) = (&cols[p], &cols[q]);
                    let mut a = 0.0;
                    let mut b = 0.0;
                    let mut g = 0.0;
                    for i in 0..m {
                        a += cp[i] * cp[i];
                        b += cq[i] * cq[i];
                        g += cp[i] * cq[i];
                    }
                    (a, b, g)
                };
                if gamma.abs() <= tol * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (head, tail) = cols.split_at_mut(q);
                let (cp, cq) = (&mut head[p], &mut tail[0]);
                for i in 0..m {
                    let (xp, xq) = (cp[i], cq[i]);
                    cp[i] = c * xp - s * xq;
                    cq[i] = s * xp + c * xq;
                }
                for i in 0..n {
                    let (vp, vq) = (v[i * n + p], v[i * n + q]);
                    v[i * n + p] = c * vp - s * vq;
                    v[i * n + q] = s * vp + c * vq;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let norms: Vec<f64> = cols
        .iter()
        .map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    order.sort_by(|&i, &j| norms[j].partial_cmp(&norms[i]).unwrap());

    let mut u = vec![0.0f64; m * n];
    let mut s = vec![0.0f64; n];
    let mut v_sorted = vec![0.0f64; n * n];
    for (k, &src) in order.iter().enumerate() {
        s[k] = norms[src];
        if s[k] > 0.0 {
            for i in 0..m {
                u[i * n + k] = cols[src][i] / s[k];
            }
        }
        for i in 0..n {
            v_sorted[i * n + k] = v[i * n + src];
        }
    }
    Svd {
        u,
        s,
        v: v_sorted,
        rank_dim: n,
    }
}

/// Solve the SPD system A x = b by Cholesky, in place on a copy of `a`.
///
/// Returns `None` when a pivot is not strictly positive (A not numerically
/// positive definite).
pub fn cholesky_solve(a: &[f64], n: usize, b: &[f64]) -> Option<Vec<f64>> {
    assert_eq!(a.len(), n * n);
    assert_eq!(b.len(), n);
    let mut l = a.to_vec();
    for j in 0..n {
        let mut d = l[j * n + j];
        for k in 0..j {
            d -= l[j * n + k] * l[j * n + k];
        }
        if d <= 0.0 || !d.is_finite() {
            return None;
        }
        let d = d.sqrt();
        l[j * n + j] = d;
        for i in j + 1..n {
            let mut v = l[i * n + j];
            for k in 0..j {
                v -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = v / d;
        }
    }
    // Forward then backward substitution.
    let mut y = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            y[i] -= l[i * n + k] * y[k];
        }
        y[i] /= l[i * n + i];
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            y[i] -= l[k * n + i] * y[k];
        }
        y[i] /= l[i * n + i];
    }
    Some(y)
}
