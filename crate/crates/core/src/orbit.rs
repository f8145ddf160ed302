//! Adjoint-orbit classification of states.
//!
//! A state is identified with the diagonal canonical form of its traceless
//! shift, a point of the closed positive Weyl chamber. Two coordinate systems
//! on the chamber are exposed: the dual basis `γ⁽ᵏ⁾ = Σ_{j≤k} E_jj − (k/n) I`
//! (coefficients `b`) and the projector basis `π⁽ᵏ⁾ = E_kk − (1/n) I`
//! (coefficients `c`). The orbit dimension follows from the eigenvalue
//! multiplicities as `n² − Σ mᵢ²`.

use serde::Serialize;
use thiserror::Error;

use crate::linalg::{hermitian_eig, ComplexMatrix};
use crate::state::{DensityMatrix, TracelessState};

pub const DEFAULT_CLUSTER_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OrbitError {
    #[error("matrix is not diagonal (off-diagonal norm {off_norm:e})")]
    NotDiagonal { off_norm: f64 },
    #[error("point is outside the closed positive Weyl chamber (b[{index}] = {value:e})")]
    NotInChamber { index: usize, value: f64 },
}

/// Where a state lives: canonical spectrum, degeneracy pattern and chamber
/// coordinates.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OrbitDescriptor {
    pub n: usize,
    #[serde(rename = "spectrum")]
    pub canonical_spectrum: Vec<f64>,
    pub multiplicities: Vec<usize>,
    #[serde(rename = "c")]
    pub c_coeffs: Vec<f64>,
    #[serde(rename = "b")]
    pub b_coeffs: Vec<f64>,
    pub dimension: usize,
    /// `(n−1)(m+1)` with `m` the number of nonzero `c` coefficients. Agrees
    /// with `dimension` for generic and pure orbits only.
    #[serde(rename = "paper_dimension")]
    pub formula_dimension: usize,
    #[serde(rename = "pure")]
    pub is_pure: bool,
    #[serde(skip)]
    pub is_generic: bool,
}

impl OrbitDescriptor {
    /// Canonical density matrix `diag(spectrum)`.
    pub fn canonical_form(&self) -> ComplexMatrix {
        ComplexMatrix::from_real_diagonal(&self.canonical_spectrum)
    }
}

/// The two diagonal bases of the Cartan subalgebra used for chamber coordinates.
#[derive(Clone, Debug)]
pub struct WeylBasis {
    pub gammas: Vec<ComplexMatrix>,
    pub pis: Vec<ComplexMatrix>,
}

impl WeylBasis {
    pub fn new(n: usize) -> Self {
        assert!(n >= 2, "Weyl basis needs n >= 2");
        let nf = n as f64;
        let gammas = (1..n)
            .map(|k| {
                let d: Vec<f64> = (0..n).map(|j| if j < k { 1.0 } else { 0.0 } - k as f64 / nf).collect();
                ComplexMatrix::from_real_diagonal(&d)
            })
            .collect();
        let pis = (1..n)
            .map(|k| {
                let d: Vec<f64> = (0..n).map(|j| if j == k - 1 { 1.0 } else { 0.0 } - 1.0 / nf).collect();
                ComplexMatrix::from_real_diagonal(&d)
            })
            .collect();
        Self { gammas, pis }
    }

    pub fn combine_gammas(&self, b: &[f64]) -> ComplexMatrix {
        combine(&self.gammas, b)
    }

    pub fn combine_pis(&self, c: &[f64]) -> ComplexMatrix {
        combine(&self.pis, c)
    }
}

fn combine(basis: &[ComplexMatrix], coeffs: &[f64]) -> ComplexMatrix {
    assert_eq!(basis.len(), coeffs.len(), "coefficient count must be n - 1");
    let mut acc = ComplexMatrix::zeros(basis[0].dim());
    for (m, &x) in basis.iter().zip(coeffs) {
        acc += &m.scale_real(x);
    }
    acc
}

/// Sizes of runs of eigenvalues whose consecutive gaps are at most `cluster_tol`.
/// `values` must be sorted.
pub fn cluster_sizes(values: &[f64], cluster_tol: f64) -> Vec<usize> {
    let mut sizes = Vec::new();
    let mut run = 0;
    for (i, &v) in values.iter().enumerate() {
        if i > 0 && (values[i - 1] - v).abs() > cluster_tol {
            sizes.push(run);
            run = 0;
        }
        run += 1;
    }
    if run > 0 {
        sizes.push(run);
    }
    sizes
}

pub fn classify(rho: &DensityMatrix, cluster_tol: f64) -> OrbitDescriptor {
    let n = rho.dim();
    let eig = hermitian_eig(&rho.matrix().hermitian_part(), f64::INFINITY)
        .expect("validated density matrices have convergent eigendecompositions");
    let spectrum = eig.values;
    let multiplicities = cluster_sizes(&spectrum, cluster_tol);
    let shift = 1.0 / n as f64;
    let mu: Vec<f64> = spectrum.iter().map(|l| l - shift).collect();
    let c_coeffs: Vec<f64> = mu[..n - 1].iter().map(|m| m - mu[n - 1]).collect();
    let b_coeffs: Vec<f64> = mu.windows(2).map(|w| w[0] - w[1]).collect();
    let dimension = n * n - multiplicities.iter().map(|m| m * m).sum::<usize>();
    let nonzero_c = c_coeffs.iter().filter(|c| c.abs() > cluster_tol).count();
    let formula_dimension = (n - 1) * (nonzero_c + 1);
    let is_pure = (spectrum[0] - 1.0).abs() <= cluster_tol && spectrum[1..].iter().all(|l| l.abs() <= cluster_tol);
    let is_generic = multiplicities.iter().all(|&m| m == 1);
    OrbitDescriptor {
        n,
        canonical_spectrum: spectrum,
        multiplicities,
        c_coeffs,
        b_coeffs,
        dimension,
        formula_dimension,
        is_pure,
        is_generic,
    }
}

/// Classifies the traceless shift of a state directly.
pub fn classify_traceless(mu: &TracelessState, cluster_tol: f64) -> Option<OrbitDescriptor> {
    let rho = crate::state::validate_density(&mu.shift_to_unit_trace(), 1e-10).ok()?;
    Some(classify(&rho, cluster_tol))
}

fn diagonal_entries(mu: &TracelessState, tol: f64) -> Result<Vec<f64>, OrbitError> {
    let m = mu.matrix();
    let n = m.dim();
    let mut off = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                off += m[(i, j)].norm_sqr();
            }
        }
    }
    let off_norm = off.sqrt();
    if off_norm > tol {
        return Err(OrbitError::NotDiagonal { off_norm });
    }
    Ok((0..n).map(|i| m[(i, i)].re).collect())
}

/// `c` with `μ = Σ c_k π⁽ᵏ⁾`, i.e. `c_k = μ_kk − μ_nn`.
pub fn projector_coefficients(mu: &TracelessState, tol: f64) -> Result<Vec<f64>, OrbitError> {
    let d = diagonal_entries(mu, tol)?;
    let last = d[d.len() - 1];
    Ok(d[..d.len() - 1].iter().map(|x| x - last).collect())
}

/// `b` with `μ = Σ b_k γ⁽ᵏ⁾`, i.e. `b_k = μ_kk − μ_{k+1,k+1}`; requires the
/// diagonal to be non-increasing within `tol`.
pub fn dual_coefficients(mu: &TracelessState, tol: f64) -> Result<Vec<f64>, OrbitError> {
    let d = diagonal_entries(mu, tol)?;
    let b: Vec<f64> = d.windows(2).map(|w| w[0] - w[1]).collect();
    if let Some((index, &value)) = b.iter().enumerate().find(|(_, &x)| x < -tol) {
        return Err(OrbitError::NotInChamber { index, value });
    }
    Ok(b)
}

/// Eigenvalues (descending) of the density matrix whose canonical traceless
/// form is `Σ b_k γ⁽ᵏ⁾`: `λ_j = Σ_{k≥j} b_k − (1/n) Σ_k k b_k + 1/n`.
pub fn spectrum_from_dual(b: &[f64], n: usize) -> Vec<f64> {
    assert_eq!(b.len() + 1, n, "b must have n - 1 entries");
    let nf = n as f64;
    let weighted: f64 = b.iter().enumerate().map(|(k, x)| (k + 1) as f64 * x).sum();
    (0..n).map(|j| b[j..].iter().sum::<f64>() - weighted / nf + 1.0 / nf).collect()
}

/// Outcome of the positivity test on chamber coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct Feasibility {
    pub feasible: bool,
    /// One entry per inequality `j = 1..=n`: the inequality
    /// `n Σ_{k≥j} b_k − Σ_k k b_k + 1 ≥ 0` divided by `n`, which is the
    /// `j`-th eigenvalue of the corresponding density matrix.
    pub slacks: Vec<f64>,
}

pub fn positivity_feasible(b: &[f64], n: usize, tol: f64) -> Feasibility {
    let slacks = spectrum_from_dual(b, n);
    let feasible = slacks.iter().all(|&s| s >= -tol);
    Feasibility { feasible, slacks }
}

/// Canonical traceless form `diag(spectrum) − (1/n) I` of a descriptor.
pub fn canonical_traceless(desc: &OrbitDescriptor) -> TracelessState {
    let shift = 1.0 / desc.n as f64;
    let d: Vec<f64> = desc.canonical_spectrum.iter().map(|l| l - shift).collect();
    TracelessState::from_real_diagonal(&d, 1e-9).expect("canonical spectrum sums to one")
}
