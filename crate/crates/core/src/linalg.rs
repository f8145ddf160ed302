//! Dense complex matrix kernel.
//!
//! Everything here works on small square matrices (n up to a few dozen), stored
//! row-major. The eigensolver is a cyclic complex Jacobi iteration; matrix
//! functions of Hermitian matrices (exponential, arctangent of the Cayley
//! transform) are evaluated through the eigendecomposition rather than series.

use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Sub};

use num_complex::Complex64;
use thiserror::Error;

/// Default absolute tolerance on Frobenius residuals.
pub const DEFAULT_TOL: f64 = 1e-10;

const MAX_SWEEPS: usize = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is not square: {rows} rows, row {row} has {cols} entries")]
    NotSquare { rows: usize, row: usize, cols: usize },

    #[error("matrix is empty")]
    Empty,

    #[error("matrix has a non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("matrix is not Hermitian (||M - M^H||_F = {defect:e})")]
    NotHermitian { defect: f64 },

    #[error("Jacobi iteration did not converge after {sweeps} sweeps (off-diagonal norm {off_norm:e})")]
    NoConvergence { sweeps: usize, off_norm: f64 },

    #[error("leading principal minor of order {order} vanishes (|minor| = {magnitude:e})")]
    SingularMinor { order: usize, magnitude: f64 },

    #[error("matrix is singular")]
    Singular,

    #[error("unitary has an eigenvalue phase {phase} too close to +-pi for a principal logarithm")]
    BranchAmbiguity { phase: f64 },
}

pub type Result<T> = std::result::Result<T, LinalgError>;

/// Square complex matrix, row-major.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    n: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(n: usize) -> Self {
        assert!(n >= 1, "matrix dimension must be positive");
        Self { n, data: vec![Complex64::new(0.0, 0.0); n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    /// Builds a matrix from rows, checking shape and finiteness.
    pub fn from_rows(rows: Vec<Vec<Complex64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(LinalgError::Empty);
        }
        let mut data = Vec::with_capacity(n * n);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != n {
                return Err(LinalgError::NotSquare { rows: n, row: i, cols: row.len() });
            }
            for (j, z) in row.into_iter().enumerate() {
                if !z.re.is_finite() || !z.im.is_finite() {
                    return Err(LinalgError::NonFinite { row: i, col: j });
                }
                data.push(z);
            }
        }
        Ok(Self { n, data })
    }

    /// Convenience constructor from real rows; panics on ragged input.
    pub fn from_real_rows(rows: &[&[f64]]) -> Self {
        let rows = rows
            .iter()
            .map(|r| r.iter().map(|&x| Complex64::new(x, 0.0)).collect())
            .collect();
        Self::from_rows(rows).expect("real rows must form a finite square matrix")
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = Complex64::new(d, 0.0);
        }
        m
    }

    pub fn from_diagonal(diag: &[Complex64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn rows(&self) -> Vec<Vec<Complex64>> {
        self.data.chunks(self.n).map(|r| r.to_vec()).collect()
    }

    pub fn column(&self, j: usize) -> Vec<Complex64> {
        (0..self.n).map(|i| self[(i, j)]).collect()
    }

    pub fn set_column(&mut self, j: usize, col: &[Complex64]) {
        for (i, &z) in col.iter().enumerate() {
            self[(i, j)] = z;
        }
    }

    pub fn diagonal(&self) -> Vec<Complex64> {
        (0..self.n).map(|i| self[(i, i)]).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.n, |i, j| self[(j, i)].conj())
    }

    /// Entrywise complex conjugate.
    pub fn conj(&self) -> Self {
        Self { n: self.n, data: self.data.iter().map(|z| z.conj()).collect() }
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.n).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self { n: self.n, data: self.data.iter().map(|&z| z * s).collect() }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        Self { n: self.n, data: self.data.iter().map(|&z| z * s).collect() }
    }

    /// `(M + M^H) / 2`
    pub fn hermitian_part(&self) -> Self {
        Self::from_fn(self.n, |i, j| (self[(i, j)] + self[(j, i)].conj()) * 0.5)
    }

    /// `(M - M^H) / 2`
    pub fn anti_hermitian_part(&self) -> Self {
        Self::from_fn(self.n, |i, j| (self[(i, j)] - self[(j, i)].conj()) * 0.5)
    }

    /// `||M - M^H||_F`
    pub fn hermiticity_defect(&self) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                acc += (self[(i, j)] - self[(j, i)].conj()).norm_sqr();
            }
        }
        acc.sqrt()
    }

    /// Frobenius distance to another matrix of the same size.
    pub fn distance(&self, other: &Self) -> f64 {
        assert_eq!(self.n, other.n, "dimension mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Largest entrywise modulus of the difference.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.n, other.n, "dimension mismatch");
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn commutator(&self, other: &Self) -> Self {
        &(self * other) - &(other * self)
    }

    /// Determinant by LU with partial pivoting.
    pub fn determinant(&self) -> Complex64 {
        let n = self.n;
        let mut a = self.clone();
        let mut det = Complex64::new(1.0, 0.0);
        for k in 0..n {
            let p = (k..n)
                .max_by(|&x, &y| a[(x, k)].norm().total_cmp(&a[(y, k)].norm()))
                .unwrap_or(k);
            if a[(p, k)].norm() == 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            if p != k {
                a.swap_rows(p, k);
                det = -det;
            }
            let pivot = a[(k, k)];
            det *= pivot;
            for i in k + 1..n {
                let f = a[(i, k)] / pivot;
                for j in k..n {
                    let v = a[(k, j)];
                    a[(i, j)] -= f * v;
                }
            }
        }
        det
    }

    /// Inverse by Gauss-Jordan elimination with partial pivoting.
    pub fn inverse(&self) -> Result<Self> {
        let n = self.n;
        let mut a = self.clone();
        let mut inv = Self::identity(n);
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        for k in 0..n {
            let p = (k..n)
                .max_by(|&x, &y| a[(x, k)].norm().total_cmp(&a[(y, k)].norm()))
                .unwrap_or(k);
            if a[(p, k)].norm() <= 1e-14 * scale {
                return Err(LinalgError::Singular);
            }
            a.swap_rows(p, k);
            inv.swap_rows(p, k);
            let pivot = a[(k, k)].inv();
            for j in 0..n {
                a[(k, j)] *= pivot;
                inv[(k, j)] *= pivot;
            }
            for i in 0..n {
                if i == k {
                    continue;
                }
                let f = a[(i, k)];
                if f == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..n {
                    let (akj, ikj) = (a[(k, j)], inv[(k, j)]);
                    a[(i, j)] -= f * akj;
                    inv[(i, j)] -= f * ikj;
                }
            }
        }
        Ok(inv)
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.n {
            self.data.swap(a * self.n + j, b * self.n + j);
        }
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.n + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.n + j]
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.n, rhs.n, "dimension mismatch");
        let n = self.n;
        let mut out = ComplexMatrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * rhs.data[k * n + j];
                }
            }
        }
        out
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.n, rhs.n, "dimension mismatch");
        ComplexMatrix { n: self.n, data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect() }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.n, rhs.n, "dimension mismatch");
        ComplexMatrix { n: self.n, data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect() }
    }
}

impl AddAssign<&ComplexMatrix> for ComplexMatrix {
    fn add_assign(&mut self, rhs: &ComplexMatrix) {
        assert_eq!(self.n, rhs.n, "dimension mismatch");
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix({}x{})", self.n, self.n)?;
        for row in self.data.chunks(self.n) {
            let cells: Vec<String> = row.iter().map(|z| format!("{:+.6e}{:+.6e}i", z.re, z.im)).collect();
            writeln!(f, "  [{}]", cells.join(", "))?;
        }
        Ok(())
    }
}

/// Eigenpairs of a Hermitian matrix: `values` descending, column `k` of
/// `vectors` paired with `values[k]`.
#[derive(Clone, Debug)]
pub struct EigenDecomposition {
    pub values: Vec<f64>,
    pub vectors: ComplexMatrix,
}

impl EigenDecomposition {
    /// `V f(Λ) V^H` for a scalar function applied to the eigenvalues.
    pub fn map(&self, f: impl Fn(f64) -> Complex64) -> ComplexMatrix {
        let n = self.values.len();
        let v = &self.vectors;
        let fl: Vec<Complex64> = self.values.iter().map(|&l| f(l)).collect();
        ComplexMatrix::from_fn(n, |i, j| (0..n).map(|k| v[(i, k)] * fl[k] * v[(j, k)].conj()).sum())
    }

    /// `V Λ V^H`
    pub fn reconstruct(&self) -> ComplexMatrix {
        self.map(|l| Complex64::new(l, 0.0))
    }
}

/// Eigendecomposition of a Hermitian matrix by cyclic complex Jacobi rotations.
///
/// Eigenvalues come back sorted descending; ties keep the order in which the
/// Jacobi iteration left them on the diagonal. Each eigenvector is rotated so
/// that its largest-modulus component (lowest row index among near-ties) is
/// real and positive.
pub fn hermitian_eig(m: &ComplexMatrix, tol: f64) -> Result<EigenDecomposition> {
    let defect = m.hermiticity_defect();
    if defect > tol {
        return Err(LinalgError::NotHermitian { defect });
    }
    let n = m.dim();
    let mut a = m.hermitian_part();
    for i in 0..n {
        a[(i, i)].im = 0.0;
    }
    let mut v = ComplexMatrix::identity(n);
    let scale = a.frobenius_norm();

    let off_norm = |a: &ComplexMatrix| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += a[(i, j)].norm_sqr();
                }
            }
        }
        s.sqrt()
    };

    let mut sweeps = 0;
    loop {
        let off = off_norm(&a);
        if off <= 4.0 * f64::EPSILON * scale {
            break;
        }
        if sweeps == MAX_SWEEPS {
            return Err(LinalgError::NoConvergence { sweeps, off_norm: off });
        }
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                let abs = apq.norm();
                if abs <= f64::MIN_POSITIVE {
                    continue;
                }
                let phase = apq / abs;
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                let theta = (aqq - app) / (2.0 * abs);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
                    sign / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // W = [[c, s], [-s e^{-i phi}, c e^{-i phi}]] on the (p, q) plane.
                let wqp = -phase.conj() * s;
                let wqq = phase.conj() * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = akp * c + akq * wqp;
                    a[(k, q)] = akp * s + akq * wqq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = apk * c + aqk * wqp.conj();
                    a[(q, k)] = apk * s + aqk * wqq.conj();
                }
                a[(p, q)] = Complex64::new(0.0, 0.0);
                a[(q, p)] = Complex64::new(0.0, 0.0);
                a[(p, p)] = Complex64::new(app - t * abs, 0.0);
                a[(q, q)] = Complex64::new(aqq + t * abs, 0.0);
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * c + vkq * wqp;
                    v[(k, q)] = vkp * s + vkq * wqq;
                }
            }
        }
    }

    let diag: Vec<f64> = (0..n).map(|i| a[(i, i)].re).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| diag[y].total_cmp(&diag[x]));

    let mut vectors = ComplexMatrix::zeros(n);
    let mut values = Vec::with_capacity(n);
    for (col, &src) in order.iter().enumerate() {
        values.push(diag[src]);
        let mut vec = v.column(src);
        fix_phase(&mut vec);
        vectors.set_column(col, &vec);
    }
    Ok(EigenDecomposition { values, vectors })
}

/// Rotates a vector so its dominant component is real positive.
pub(crate) fn fix_phase(vec: &mut [Complex64]) {
    let max = vec.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if max == 0.0 {
        return;
    }
    let pivot = vec.iter().position(|z| z.norm() >= max * (1.0 - 1e-10)).unwrap_or(0);
    let rot = vec[pivot].conj() / vec[pivot].norm();
    for z in vec.iter_mut() {
        *z *= rot;
    }
    vec[pivot].im = 0.0;
}

/// `exp(-i s H)` for Hermitian `H`, through its eigendecomposition.
pub fn expm_i_hermitian(h: &ComplexMatrix, s: f64, tol: f64) -> Result<ComplexMatrix> {
    let eig = hermitian_eig(h, tol)?;
    Ok(eig.map(|l| Complex64::from_polar(1.0, -s * l)))
}

/// Doolittle factorization `M = L R` without pivoting.
///
/// `L` is unit lower triangular, `R` upper triangular. Fails with
/// `SingularMinor(k)` as soon as the leading principal minor of order `k`
/// has modulus at most `tol`.
pub fn gauss_unit_lower(m: &ComplexMatrix, tol: f64) -> Result<(ComplexMatrix, ComplexMatrix)> {
    let n = m.dim();
    gauss_block_lower(m, &vec![1; n], tol)
}

/// Block version of [`gauss_unit_lower`]: `M = Z P` where `Z` is unit lower
/// triangular with identity diagonal blocks and `P` is block upper
/// triangular. Only leading block minors (determinants of the leading
/// block-aligned principal submatrices) need to be nonzero.
///
/// With all blocks of size one this is the ordinary Doolittle factorization.
pub fn gauss_block_lower(
    m: &ComplexMatrix,
    blocks: &[usize],
    tol: f64,
) -> Result<(ComplexMatrix, ComplexMatrix)> {
    let n = m.dim();
    let total: usize = blocks.iter().sum();
    if total != n {
        return Err(LinalgError::DimensionMismatch { left: total, right: n });
    }
    let mut a = m.clone();
    let mut z = ComplexMatrix::identity(n);
    let mut minor = Complex64::new(1.0, 0.0);
    let mut start = 0;
    for &size in blocks {
        let end = start + size;
        let pivot = ComplexMatrix::from_fn(size, |i, j| a[(start + i, start + j)]);
        minor *= pivot.determinant();
        if minor.norm() <= tol {
            return Err(LinalgError::SingularMinor { order: end, magnitude: minor.norm() });
        }
        let pivot_inv = pivot.inverse()?;
        // Multipliers for every row below the block.
        for i in end..n {
            for j in 0..size {
                let mut s = Complex64::new(0.0, 0.0);
                for k in 0..size {
                    s += a[(i, start + k)] * pivot_inv[(k, j)];
                }
                z[(i, start + j)] = s;
            }
        }
        for i in end..n {
            for j in start..n {
                let mut s = Complex64::new(0.0, 0.0);
                for k in 0..size {
                    s += z[(i, start + k)] * a[(start + k, j)];
                }
                a[(i, j)] -= s;
            }
            for j in start..end {
                a[(i, j)] = Complex64::new(0.0, 0.0);
            }
        }
        start = end;
    }
    Ok((z, a))
}

/// Nearest-unitary cleanup by modified Gram-Schmidt on the columns, for
/// matrices that are unitary up to accumulated roundoff.
pub fn reorthonormalize(m: &ComplexMatrix) -> ComplexMatrix {
    let n = m.dim();
    let mut cols: Vec<Vec<Complex64>> = (0..n).map(|j| m.column(j)).collect();
    for j in 0..n {
        let (done, rest) = cols.split_at_mut(j);
        let col = &mut rest[0];
        for prev in done.iter() {
            let proj: Complex64 = prev.iter().zip(col.iter()).map(|(a, b)| a.conj() * b).sum();
            for (x, y) in col.iter_mut().zip(prev) {
                *x -= proj * y;
            }
        }
        let norm = col.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        for x in col.iter_mut() {
            *x /= norm;
        }
    }
    ComplexMatrix::from_fn(n, |i, j| cols[j][i])
}

/// `||M^H M - I||_F`
pub fn unitarity_defect(m: &ComplexMatrix) -> f64 {
    let n = m.dim();
    (&(&m.adjoint() * m) - &ComplexMatrix::identity(n)).frobenius_norm()
}

/// Hermitian `Θ` with `W = exp(iΘ)` and spectrum in `(-π, π)`.
///
/// The eigenvectors of the unitary come from its Cayley transform
/// `X = i (W - I)(W + I)^{-1}`, which is Hermitian with eigenvalues
/// `-tan(θ/2)`. Fails with `BranchAmbiguity` when an eigenphase lies within
/// `branch_tol` of ±π. Also returns the hermiticity defect of `X`.
pub fn unitary_phase_generator(w: &ComplexMatrix, branch_tol: f64) -> Result<(ComplexMatrix, f64)> {
    let n = w.dim();
    let id = ComplexMatrix::identity(n);
    let plus = &id + w;
    let minus = w - &id;
    let inv = plus.inverse().map_err(|_| LinalgError::BranchAmbiguity { phase: std::f64::consts::PI })?;
    let x = (&minus * &inv).scale(Complex64::new(0.0, 1.0));
    let defect = x.hermiticity_defect();
    let eig = hermitian_eig(&x.hermitian_part(), f64::INFINITY)?;
    for &l in &eig.values {
        let phase = -2.0 * l.atan();
        if std::f64::consts::PI - phase.abs() <= branch_tol {
            return Err(LinalgError::BranchAmbiguity { phase });
        }
    }
    Ok((eig.map(|l| Complex64::new(-2.0 * l.atan(), 0.0)), defect))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_hermitian(n: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
        let g = ComplexMatrix::from_fn(n, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        g.hermitian_part()
    }

    #[test]
    fn eig_of_diagonal_state() {
        let m = ComplexMatrix::from_real_diagonal(&[0.75, 0.25]);
        let e = hermitian_eig(&m, DEFAULT_TOL).unwrap();
        assert_eq!(e.values, vec![0.75, 0.25]);
        assert_eq!(e.vectors, ComplexMatrix::identity(2));
    }

    #[test]
    fn eig_of_pauli_x() {
        let m = ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let e = hermitian_eig(&m, DEFAULT_TOL).unwrap();
        assert!((e.values[0] - 1.0).abs() < 1e-14);
        assert!((e.values[1] + 1.0).abs() < 1e-14);
        let r = 0.5f64.sqrt();
        let expected = ComplexMatrix::from_real_rows(&[&[r, r], &[r, -r]]);
        assert!(e.vectors.max_abs_diff(&expected) < 1e-14, "{:?}", e.vectors);
    }

    #[test]
    fn eig_residual_random_4x4() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = random_hermitian(4, &mut rng);
        let e = hermitian_eig(&m, DEFAULT_TOL).unwrap();
        let lam = ComplexMatrix::from_real_diagonal(&e.values);
        let res = (&(&m * &e.vectors) - &(&e.vectors * &lam)).frobenius_norm();
        assert!(res < 1e-12, "residual {res}");
        assert!(unitarity_defect(&e.vectors) < 1e-12);
        assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn eig_rejects_non_hermitian() {
        let m = ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]);
        assert!(matches!(hermitian_eig(&m, 1e-10), Err(LinalgError::NotHermitian { .. })));
    }

    #[test]
    fn eig_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = random_hermitian(6, &mut rng);
        let a = hermitian_eig(&m, DEFAULT_TOL).unwrap();
        let b = hermitian_eig(&m, DEFAULT_TOL).unwrap();
        assert_eq!(a.values, b.values);
        assert_eq!(a.vectors, b.vectors);
    }

    #[test]
    fn expm_special_cases() {
        let z = ComplexMatrix::zeros(3);
        assert_eq!(expm_i_hermitian(&z, 2.5, DEFAULT_TOL).unwrap(), ComplexMatrix::identity(3));

        let h = ComplexMatrix::from_real_diagonal(&[1.0, -1.0]);
        let u = expm_i_hermitian(&h, PI, DEFAULT_TOL).unwrap();
        assert!(u.max_abs_diff(&ComplexMatrix::from_real_diagonal(&[-1.0, -1.0])) < 1e-12);

        // i [[0, 1], [-1, 0]] generates the real rotation.
        let h = ComplexMatrix::from_rows(vec![vec![c(0.0, 0.0), c(0.0, 1.0)], vec![c(0.0, -1.0), c(0.0, 0.0)]]).unwrap();
        let t = 0.83;
        let u = expm_i_hermitian(&h, t, DEFAULT_TOL).unwrap();
        let rot = ComplexMatrix::from_real_rows(&[&[t.cos(), t.sin()], &[-t.sin(), t.cos()]]);
        assert!(u.max_abs_diff(&rot) < 1e-12);
        assert!(unitarity_defect(&u) < 1e-12);
    }

    #[test]
    fn expm_forward_backward_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = random_hermitian(5, &mut rng);
        let a = expm_i_hermitian(&h, 0.7, DEFAULT_TOL).unwrap();
        let b = expm_i_hermitian(&h, -0.7, DEFAULT_TOL).unwrap();
        assert!((&a * &b).distance(&ComplexMatrix::identity(5)) < 1e-12);
    }

    #[test]
    fn gauss_examples() {
        let id = ComplexMatrix::identity(3);
        let (l, r) = gauss_unit_lower(&id, 1e-12).unwrap();
        assert_eq!(l, id);
        assert_eq!(r, id);

        let m = ComplexMatrix::from_rows(vec![vec![c(1.0, 0.0), c(0.0, 0.0)], vec![c(2.0, 1.0), c(1.0, 0.0)]]).unwrap();
        let (l, r) = gauss_unit_lower(&m, 1e-12).unwrap();
        assert_eq!(l, m);
        assert_eq!(r, ComplexMatrix::identity(2));

        let t: f64 = 0.3;
        let rot = ComplexMatrix::from_real_rows(&[&[t.cos(), t.sin()], &[-t.sin(), t.cos()]]);
        let (l, r) = gauss_unit_lower(&rot, 1e-12).unwrap();
        let l_exp = ComplexMatrix::from_real_rows(&[&[1.0, 0.0], &[-t.tan(), 1.0]]);
        let r_exp = ComplexMatrix::from_real_rows(&[&[t.cos(), t.sin()], &[0.0, 1.0 / t.cos()]]);
        assert!(l.max_abs_diff(&l_exp) < 1e-15);
        assert!(r.max_abs_diff(&r_exp) < 1e-15);
        assert!((&l * &r).distance(&rot) < 1e-15);
    }

    #[test]
    fn gauss_reports_singular_minor() {
        let swap = ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]);
        assert!(matches!(gauss_unit_lower(&swap, 1e-12), Err(LinalgError::SingularMinor { order: 1, .. })));
        let m = ComplexMatrix::from_real_rows(&[&[1.0, 2.0, 0.0], &[1.0, 2.0, 1.0], &[0.0, 1.0, 1.0]]);
        assert!(matches!(gauss_unit_lower(&m, 1e-12), Err(LinalgError::SingularMinor { order: 2, .. })));
    }

    #[test]
    fn block_gauss_skips_inner_minors() {
        // Leading 1x1 is fine, the 2x2 minor vanishes, but with blocks (1, 2)
        // only the full determinant matters after the first block.
        let m = ComplexMatrix::from_real_rows(&[&[1.0, 2.0, 0.0], &[1.0, 2.0, 1.0], &[0.0, 1.0, 1.0]]);
        let (z, p) = gauss_block_lower(&m, &[1, 2], 1e-12).unwrap();
        assert!((&z * &p).distance(&m) < 1e-14);
        assert_eq!(z[(2, 1)], c(0.0, 0.0));
        assert_eq!(p[(1, 0)], c(0.0, 0.0));
        assert_eq!(p[(2, 0)], c(0.0, 0.0));
    }

    #[test]
    fn unitarity_defect_examples() {
        assert_eq!(unitarity_defect(&ComplexMatrix::identity(4)), 0.0);
        let two = ComplexMatrix::identity(2).scale_real(2.0);
        assert!((unitarity_defect(&two) - 3.0 * 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn phase_generator_recovers_exponent() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let h = random_hermitian(4, &mut rng);
        let w = expm_i_hermitian(&h, -0.4, DEFAULT_TOL).unwrap();
        let (theta, defect) = unitary_phase_generator(&w, 1e-8).unwrap();
        assert!(defect < 1e-12);
        assert!(theta.distance(&h.scale_real(0.4)) < 1e-12);
    }

    #[test]
    fn phase_generator_flags_branch_cut() {
        let w = ComplexMatrix::from_real_diagonal(&[1.0, -1.0]);
        assert!(matches!(unitary_phase_generator(&w, 1e-8), Err(LinalgError::BranchAmbiguity { .. })));
    }

    #[test]
    fn determinant_and_inverse() {
        let m = ComplexMatrix::from_rows(vec![
            vec![c(0.0, 1.0), c(2.0, 0.0)],
            vec![c(1.0, 0.0), c(3.0, -1.0)],
        ])
        .unwrap();
        let det = m.determinant();
        assert!((det - (c(0.0, 1.0) * c(3.0, -1.0) - c(2.0, 0.0))).norm() < 1e-15);
        let inv = m.inverse().unwrap();
        assert!((&m * &inv).distance(&ComplexMatrix::identity(2)) < 1e-14);
    }

    #[test]
    fn from_rows_validates_shape() {
        let bad = vec![vec![c(1.0, 0.0), c(0.0, 0.0)], vec![c(1.0, 0.0)]];
        assert!(matches!(ComplexMatrix::from_rows(bad), Err(LinalgError::NotSquare { .. })));
        let nan = vec![vec![c(f64::NAN, 0.0)]];
        assert!(matches!(ComplexMatrix::from_rows(nan), Err(LinalgError::NonFinite { .. })));
        assert!(matches!(ComplexMatrix::from_rows(vec![]), Err(LinalgError::Empty)));
    }
}
