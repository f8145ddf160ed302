//! Generalized stereographic parametrization of adjoint orbits.
//!
//! A point of an orbit chart is a unit lower triangular matrix `z` whose
//! nonzero sub-diagonal entries are restricted by a block pattern (the
//! multiplicities of the canonical spectrum). Its Iwasawa decomposition
//! `z = u a r` (special unitary, positive diagonal with unit determinant,
//! unit upper triangular) yields the "evolution" matrix `u`, which carries
//! the canonical form to the state at `z`. The factors are obtained from the
//! root-free factorization `z^H z = r^H a² r`.

use num_complex::Complex64;
use thiserror::Error;

use crate::linalg::{gauss_block_lower, unitarity_defect, ComplexMatrix, LinalgError};
use crate::state::DensityMatrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChartError {
    #[error("invalid chart matrix: {0}")]
    InvalidZ(String),
    #[error("factor a^2 entry {index} is {value:e}, not positive")]
    NumericallySingular { index: usize, value: f64 },
    #[error("state lies outside the stereographic chart (leading block minor of order {order} vanishes)")]
    ChartSingularity { order: usize },
    #[error("matrix is not unitary (defect {defect:e})")]
    NotUnitary { defect: f64 },
    #[error("chart denominator {value:e} vanishes for the chosen branch")]
    DegenerateDenominator { value: f64 },
    #[error("expected a {expected}x{expected} matrix, got {found}x{found}")]
    WrongDimension { expected: usize, found: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Block pattern of a chart: contiguous blocks of equal canonical eigenvalue.
/// Sub-diagonal position `(i, j)` may be nonzero iff `i` and `j` sit in
/// different blocks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ZMask {
    blocks: Vec<usize>,
    owner: Vec<usize>,
}

impl ZMask {
    pub fn from_blocks(blocks: Vec<usize>) -> Self {
        assert!(!blocks.is_empty() && blocks.iter().all(|&b| b > 0), "blocks must be positive");
        let owner = blocks.iter().enumerate().flat_map(|(k, &b)| std::iter::repeat_n(k, b)).collect();
        Self { blocks, owner }
    }

    /// Generic orbit: every sub-diagonal entry is a coordinate.
    pub fn full(n: usize) -> Self {
        Self::from_blocks(vec![1; n])
    }

    /// Pure states: only the first column carries coordinates.
    pub fn pure(n: usize) -> Self {
        assert!(n >= 2);
        Self::from_blocks(vec![1, n - 1])
    }

    pub fn dim(&self) -> usize {
        self.owner.len()
    }

    pub fn blocks(&self) -> &[usize] {
        &self.blocks
    }

    pub fn allows(&self, i: usize, j: usize) -> bool {
        i > j && self.owner[i] != self.owner[j]
    }

    /// Positions allowed to carry coordinates, column-major.
    pub fn positions(&self) -> Vec<(usize, usize)> {
        let n = self.dim();
        (0..n).flat_map(|j| (j + 1..n).map(move |i| (i, j))).filter(|&(i, j)| self.allows(i, j)).collect()
    }

    /// Frobenius norm of the entries of `m` outside the diagonal blocks.
    pub fn off_block_norm(&self, m: &ComplexMatrix) -> f64 {
        let n = self.dim();
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                if self.owner[i] != self.owner[j] {
                    acc += m[(i, j)].norm_sqr();
                }
            }
        }
        acc.sqrt()
    }
}

/// Unit lower triangular chart matrix conforming to a mask.
#[derive(Clone, Debug, PartialEq)]
pub struct ZMatrix {
    matrix: ComplexMatrix,
    mask: ZMask,
}

impl ZMatrix {
    pub fn new(matrix: ComplexMatrix, mask: ZMask) -> Result<Self, ChartError> {
        let n = matrix.dim();
        if mask.dim() != n {
            return Err(ChartError::WrongDimension { expected: mask.dim(), found: n });
        }
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                let x = matrix[(i, j)];
                let ok = if i == j {
                    x == one
                } else if mask.allows(i, j) {
                    true
                } else {
                    x == zero
                };
                if !ok {
                    return Err(ChartError::InvalidZ(format!("entry ({i}, {j}) = {x} violates the mask")));
                }
            }
        }
        if !matrix.is_finite() {
            return Err(ChartError::InvalidZ("non-finite entry".into()));
        }
        Ok(Self { matrix, mask })
    }

    /// Pure-state chart point from projective coordinates `z_2, …, z_n`.
    pub fn from_pure_coordinates(zvec: &[Complex64]) -> Self {
        let n = zvec.len() + 1;
        let mut m = ComplexMatrix::identity(n);
        for (k, &z) in zvec.iter().enumerate() {
            m[(k + 1, 0)] = z;
        }
        Self::new(m, ZMask::pure(n)).expect("pure coordinates fill the first column only")
    }

    /// Chart point from coordinate values in [`ZMask::positions`] order.
    pub fn from_coordinates(mask: ZMask, coords: &[Complex64]) -> Result<Self, ChartError> {
        let positions = mask.positions();
        if positions.len() != coords.len() {
            return Err(ChartError::InvalidZ(format!("{} coordinates for {} positions", coords.len(), positions.len())));
        }
        let mut m = ComplexMatrix::identity(mask.dim());
        for (&(i, j), &z) in positions.iter().zip(coords) {
            m[(i, j)] = z;
        }
        Self::new(m, mask)
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn mask(&self) -> &ZMask {
        &self.mask
    }

    pub fn coordinates(&self) -> Vec<Complex64> {
        self.mask.positions().into_iter().map(|p| self.matrix[p]).collect()
    }
}

/// `z = u a r`.
#[derive(Clone, Debug)]
pub struct IwasawaFactors {
    pub u: ComplexMatrix,
    pub a: ComplexMatrix,
    pub r: ComplexMatrix,
}

impl IwasawaFactors {
    pub fn product(&self) -> ComplexMatrix {
        &(&self.u * &self.a) * &self.r
    }
}

/// Iwasawa decomposition of a chart matrix.
///
/// Factors the positive definite `z^H z` as `r^H d r` (unit upper `r`,
/// positive diagonal `d`), takes `a = sqrt(d)` and `u = z r⁻¹ a⁻¹`.
pub fn iwasawa(z: &ZMatrix, tol: f64) -> Result<IwasawaFactors, ChartError> {
    let zm = z.matrix();
    let n = zm.dim();
    let p = &zm.adjoint() * zm;
    let mut r = ComplexMatrix::identity(n);
    let mut d = vec![0.0f64; n];
    for k in 0..n {
        let mut dk = p[(k, k)].re;
        for i in 0..k {
            dk -= d[i] * r[(i, k)].norm_sqr();
        }
        if dk <= tol {
            return Err(ChartError::NumericallySingular { index: k, value: dk });
        }
        d[k] = dk;
        for j in k + 1..n {
            let mut s = p[(k, j)];
            for i in 0..k {
                s -= r[(i, k)].conj() * d[i] * r[(i, j)];
            }
            r[(k, j)] = s / dk;
        }
    }
    Ok(assemble(zm, r, &d))
}

fn assemble(z: &ComplexMatrix, r: ComplexMatrix, d: &[f64]) -> IwasawaFactors {
    let n = z.dim();
    let a_diag: Vec<f64> = d.iter().map(|x| x.sqrt()).collect();
    let rinv = unit_upper_inverse(&r);
    let ainv = ComplexMatrix::from_real_diagonal(&a_diag.iter().map(|x| 1.0 / x).collect::<Vec<_>>());
    let u = &(z * &rinv) * &ainv;
    debug_assert_eq!(u.dim(), n);
    IwasawaFactors { u, a: ComplexMatrix::from_real_diagonal(&a_diag), r }
}

fn unit_upper_inverse(r: &ComplexMatrix) -> ComplexMatrix {
    let n = r.dim();
    let mut inv = ComplexMatrix::identity(n);
    for col in 0..n {
        for i in (0..col).rev() {
            let mut s = Complex64::new(0.0, 0.0);
            for k in i + 1..=col {
                s += r[(i, k)] * inv[(k, col)];
            }
            inv[(i, col)] = -s;
        }
    }
    inv
}

/// Squared norms `a_k² = 1 + Σ_{j≥k} |z_j|²` for `k = 2..=n`, from the
/// projective coordinates `z_2, …, z_n` of a pure state.
pub fn pure_state_norms(zvec: &[Complex64]) -> Vec<f64> {
    let mut out = vec![0.0; zvec.len()];
    let mut tail = 1.0;
    for (k, z) in zvec.iter().enumerate().rev() {
        tail += z.norm_sqr();
        out[k] = tail;
    }
    out
}

/// Iwasawa factors of a pure-state chart point from their closed forms:
/// `a = diag(a_2, a_3/a_2, …, 1/a_n)`, `r_1k = z̄_k / a_2²` and
/// `r_jk = −z_j z̄_k / a_{j+1}²` for `2 ≤ j < k`.
pub fn pure_state_factors(zvec: &[Complex64]) -> IwasawaFactors {
    let n = zvec.len() + 1;
    let z = ZMatrix::from_pure_coordinates(zvec);
    // Index k here is the 1-based k + 1; asq[k] = a_{k+1}^2, with a_{n+1}^2 = 1.
    let mut asq = vec![1.0; n + 1];
    for (k, v) in pure_state_norms(zvec).into_iter().enumerate() {
        asq[k + 1] = v;
    }
    let coord = |k: usize| if k == 0 { Complex64::new(1.0, 0.0) } else { zvec[k - 1] };
    let mut d = vec![0.0; n];
    d[0] = asq[1];
    for k in 1..n {
        d[k] = asq[k + 1] / asq[k];
    }
    let mut r = ComplexMatrix::identity(n);
    for k in 1..n {
        r[(0, k)] = coord(k).conj() / asq[1];
    }
    for j in 1..n {
        for k in j + 1..n {
            r[(j, k)] = -coord(j) * coord(k).conj() / asq[j + 1];
        }
    }
    assemble(z.matrix(), r, &d)
}

/// Chart coordinates of a unitary: block Gauss factorization `V = z P` with
/// `z` conforming to `mask`. Returns `z` together with the stabilizer residue
/// `iwasawa(z).u^H V`, which is block diagonal for the mask's blocks.
pub fn extract_z(v: &ComplexMatrix, mask: &ZMask, tol: f64) -> Result<(ZMatrix, ComplexMatrix), ChartError> {
    if v.dim() != mask.dim() {
        return Err(ChartError::WrongDimension { expected: mask.dim(), found: v.dim() });
    }
    let defect = unitarity_defect(v);
    if defect > 1e-8 {
        return Err(ChartError::NotUnitary { defect });
    }
    let (zm, _) = gauss_block_lower(v, mask.blocks(), tol).map_err(|e| match e {
        LinalgError::SingularMinor { order, .. } => ChartError::ChartSingularity { order },
        other => ChartError::Linalg(other),
    })?;
    let z = ZMatrix::new(zm, mask.clone())?;
    let u = iwasawa(&z, 0.0)?.u;
    let residual = &u.adjoint() * v;
    Ok((z, residual))
}

/// Sign in front of the square root in the 2x2 chart formula.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Branch {
    /// Canonical form with the larger eigenvalue first.
    Plus,
    /// Canonical form with the smaller eigenvalue first.
    #[default]
    Minus,
}

/// Chart coordinate of a qubit state:
/// `z = 2 ρ̄₁₂ / (ρ₁₁ − ρ₂₂ ± sqrt((ρ₁₁ − ρ₂₂)² + 4|ρ₁₂|²))`.
pub fn z_from_density_2x2(rho: &DensityMatrix, branch: Branch, tol: f64) -> Result<Complex64, ChartError> {
    let m = rho.matrix();
    if m.dim() != 2 {
        return Err(ChartError::WrongDimension { expected: 2, found: m.dim() });
    }
    let diff = m[(0, 0)].re - m[(1, 1)].re;
    let rho12 = m[(0, 1)];
    let root = (diff * diff + 4.0 * rho12.norm_sqr()).sqrt();
    let denom = match branch {
        Branch::Plus => diff + root,
        Branch::Minus => diff - root,
    };
    if denom.abs() <= tol {
        return Err(ChartError::DegenerateDenominator { value: denom });
    }
    Ok(rho12.conj() * 2.0 / denom)
}

/// Canonical form paired with a branch of [`z_from_density_2x2`].
pub fn canonical_form_2x2(rho: &DensityMatrix, branch: Branch) -> ComplexMatrix {
    let m = rho.matrix();
    let sum = m[(0, 0)].re + m[(1, 1)].re;
    let diff = m[(0, 0)].re - m[(1, 1)].re;
    let root = (diff * diff + 4.0 * m[(0, 1)].norm_sqr()).sqrt();
    let (hi, lo) = (0.5 * (sum + root), 0.5 * (sum - root));
    match branch {
        Branch::Plus => ComplexMatrix::from_real_diagonal(&[hi, lo]),
        Branch::Minus => ComplexMatrix::from_real_diagonal(&[lo, hi]),
    }
}
