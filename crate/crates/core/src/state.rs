//! Density matrices, traceless shifts and validated trajectories.

use std::io::Read;

use num_complex::Complex64;
use thiserror::Error;

use crate::format;
use crate::linalg::{hermitian_eig, ComplexMatrix, LinalgError};

/// Tolerances applied when a trajectory is validated.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    /// Absolute tolerance for Hermiticity, unit trace and positivity.
    pub density: f64,
    /// Relative tolerance on the drift of each trace power along the grid.
    pub isospectral: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { density: 1e-10, isospectral: 1e-8 }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DensityError {
    #[error("not Hermitian (||M - M^H||_F = {defect:e})")]
    NotHermitian { defect: f64 },
    #[error("trace is not one (trace = {trace})")]
    TraceNotOne { trace: f64 },
    #[error("not positive semidefinite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveSemidefinite { min_eigenvalue: f64 },
    #[error("not traceless (trace = {trace:e})")]
    NotTraceless { trace: f64 },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Error)]
pub enum TrajectoryError {
    #[error("parse error{}: {message}", position.map(|(l, c)| format!(" at line {l}, column {c}")).unwrap_or_default())]
    Parse { message: String, position: Option<(usize, usize)> },
    #[error("sample {index}: {source}")]
    InvalidSample { index: usize, source: DensityError },
    #[error("trajectory leaves its orbit at sample {sample}: Tr rho^{k} drifts by {drift:e} (relative)")]
    IsospectralityViolation { sample: usize, k: usize, drift: f64 },
    #[error("trajectory needs at least 2 samples, found {found}")]
    TooFewSamples { found: usize },
    #[error("times must be finite and strictly increasing (violated at index {index})")]
    NonIncreasingTimes { index: usize },
    #[error("{times} time stamps but {states} states")]
    LengthMismatch { times: usize, states: usize },
    #[error("sample {sample} has dimension {found}, expected {expected}")]
    DimensionMismatch { sample: usize, expected: usize, found: usize },
    #[error("hbar must be positive and finite, got {0}")]
    InvalidHbar(f64),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A validated quantum state: Hermitian, unit trace, positive semidefinite.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix(ComplexMatrix);

impl DensityMatrix {
    /// Wraps a matrix already known to be a state (e.g. a unitary conjugate
    /// of one) without re-validating it.
    pub(crate) fn unchecked(m: ComplexMatrix) -> Self {
        Self(m)
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    /// Projector onto a (not necessarily normalized) state vector.
    pub fn pure(psi: &[Complex64]) -> Result<Self, DensityError> {
        let norm2: f64 = psi.iter().map(|c| c.norm_sqr()).sum();
        let m = ComplexMatrix::from_fn(psi.len(), |i, j| psi[i] * psi[j].conj() / norm2);
        validate_density(&m, 1e-10)
    }
}

/// Checks the density-matrix invariants, reporting the first violated one
/// together with its measured defect.
pub fn validate_density(m: &ComplexMatrix, tol: f64) -> Result<DensityMatrix, DensityError> {
    let defect = m.hermiticity_defect();
    if defect > tol {
        return Err(DensityError::NotHermitian { defect });
    }
    let trace = m.trace().re;
    if (trace - 1.0).abs() > tol {
        return Err(DensityError::TraceNotOne { trace });
    }
    check_positive(m, tol)?;
    Ok(DensityMatrix(m.clone()))
}

fn check_positive(m: &ComplexMatrix, tol: f64) -> Result<(), DensityError> {
    let eig = hermitian_eig(&m.hermitian_part(), f64::INFINITY)?;
    let min_eigenvalue = *eig.values.last().expect("matrix is non-empty");
    if min_eigenvalue < -tol {
        return Err(DensityError::NotPositiveSemidefinite { min_eigenvalue });
    }
    Ok(())
}

/// `Tr ρ^k` for `k = 1..=kmax`.
pub fn trace_powers(rho: &DensityMatrix, kmax: usize) -> Vec<f64> {
    assert!(kmax >= 1, "kmax must be at least 1");
    let m = rho.matrix();
    let mut power = m.clone();
    let mut out = Vec::with_capacity(kmax);
    out.push(power.trace().re);
    for _ in 1..kmax {
        power = &power * m;
        out.push(power.trace().re);
    }
    out
}

/// Hermitian traceless matrix, the state shifted by `-(1/n) I`.
#[derive(Clone, Debug, PartialEq)]
pub struct TracelessState(ComplexMatrix);

impl TracelessState {
    pub fn new(m: ComplexMatrix, tol: f64) -> Result<Self, DensityError> {
        let defect = m.hermiticity_defect();
        if defect > tol {
            return Err(DensityError::NotHermitian { defect });
        }
        let trace = m.trace().norm();
        if trace > tol {
            return Err(DensityError::NotTraceless { trace });
        }
        Ok(Self(m))
    }

    pub fn from_real_diagonal(diag: &[f64], tol: f64) -> Result<Self, DensityError> {
        Self::new(ComplexMatrix::from_real_diagonal(diag), tol)
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    /// Adds back `(1/n) I`. Positivity is not re-checked.
    pub fn shift_to_unit_trace(&self) -> ComplexMatrix {
        let n = self.0.dim();
        &self.0 + &ComplexMatrix::identity(n).scale_real(1.0 / n as f64)
    }
}

pub fn to_traceless(rho: &DensityMatrix) -> TracelessState {
    let n = rho.dim();
    TracelessState(rho.matrix() - &ComplexMatrix::identity(n).scale_real(1.0 / n as f64))
}

/// A prescribed evolution: strictly increasing times, one validated state per
/// time, and the action unit `hbar`. States are isospectral within the
/// tolerance used at construction.
#[derive(Clone, Debug)]
pub struct Trajectory {
    times: Vec<f64>,
    states: Vec<DensityMatrix>,
    hbar: f64,
    spectral_drift: f64,
}

impl Trajectory {
    /// Validates raw matrices into a trajectory.
    ///
    /// Sample 0 must be a valid density matrix. Later samples are checked for
    /// Hermiticity and positivity, then their trace powers `Tr ρ^k`,
    /// `k = 1..=n`, are compared against sample 0 (this is where a drifting
    /// trace is caught), and finally the full density check is applied.
    pub fn from_matrices(
        times: Vec<f64>,
        matrices: Vec<ComplexMatrix>,
        hbar: f64,
        tol: &Tolerances,
    ) -> Result<Self, TrajectoryError> {
        if times.len() != matrices.len() {
            return Err(TrajectoryError::LengthMismatch { times: times.len(), states: matrices.len() });
        }
        check_grid(&times)?;
        if !(hbar.is_finite() && hbar > 0.0) {
            return Err(TrajectoryError::InvalidHbar(hbar));
        }
        let n = matrices[0].dim();
        let first = validate_density(&matrices[0], tol.density)
            .map_err(|source| TrajectoryError::InvalidSample { index: 0, source })?;
        let reference = trace_powers(&first, n);
        let mut states = Vec::with_capacity(matrices.len());
        states.push(first);
        let mut spectral_drift = 0.0f64;
        for (index, m) in matrices.into_iter().enumerate().skip(1) {
            if m.dim() != n {
                return Err(TrajectoryError::DimensionMismatch { sample: index, expected: n, found: m.dim() });
            }
            let invalid = |source| TrajectoryError::InvalidSample { index, source };
            let defect = m.hermiticity_defect();
            if defect > tol.density {
                return Err(invalid(DensityError::NotHermitian { defect }));
            }
            check_positive(&m, tol.density).map_err(invalid)?;
            let powers = trace_powers(&DensityMatrix(m.clone()), n);
            for (k, (p, r)) in powers.iter().zip(&reference).enumerate() {
                let drift = (p - r).abs() / r.abs().max(f64::MIN_POSITIVE);
                spectral_drift = spectral_drift.max(drift);
                if drift > tol.isospectral {
                    return Err(TrajectoryError::IsospectralityViolation { sample: index, k: k + 1, drift });
                }
            }
            states.push(validate_density(&m, tol.density).map_err(invalid)?);
        }
        Ok(Self { times, states, hbar, spectral_drift })
    }

    /// Builds a trajectory from already validated states.
    pub fn new(times: Vec<f64>, states: Vec<DensityMatrix>, hbar: f64, tol: &Tolerances) -> Result<Self, TrajectoryError> {
        Self::from_matrices(times, states.into_iter().map(DensityMatrix::into_matrix).collect(), hbar, tol)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[DensityMatrix] {
        &self.states
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn dim(&self) -> usize {
        self.states[0].dim()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Largest relative drift of `Tr ρ^k` from sample 0 seen during validation.
    pub fn spectral_drift(&self) -> f64 {
        self.spectral_drift
    }

    /// Same trajectory with a different `hbar`.
    pub fn with_hbar(mut self, hbar: f64) -> Result<Self, TrajectoryError> {
        if !(hbar.is_finite() && hbar > 0.0) {
            return Err(TrajectoryError::InvalidHbar(hbar));
        }
        self.hbar = hbar;
        Ok(self)
    }
}

pub(crate) fn check_grid(times: &[f64]) -> Result<(), TrajectoryError> {
    if times.len() < 2 {
        return Err(TrajectoryError::TooFewSamples { found: times.len() });
    }
    if let Some(index) = times.iter().position(|t| !t.is_finite()) {
        return Err(TrajectoryError::NonIncreasingTimes { index });
    }
    if let Some(i) = times.windows(2).position(|w| w[1] <= w[0]) {
        return Err(TrajectoryError::NonIncreasingTimes { index: i + 1 });
    }
    Ok(())
}

/// Reads and validates a trajectory in the JSON exchange format.
pub fn load_trajectory(source: impl Read, tol: &Tolerances) -> Result<Trajectory, TrajectoryError> {
    let raw = format::read_trajectory_file(source)?;
    Trajectory::from_matrices(raw.times, raw.states, raw.hbar, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::DEFAULT_TOL;

    #[test]
    fn validate_examples() {
        let m = ComplexMatrix::from_real_diagonal(&[0.25, 0.75]);
        assert!(validate_density(&m, DEFAULT_TOL).is_ok());

        let m = ComplexMatrix::from_real_rows(&[&[0.5, 0.6], &[0.6, 0.5]]);
        match validate_density(&m, DEFAULT_TOL) {
            Err(DensityError::NotPositiveSemidefinite { min_eigenvalue }) => {
                assert!((min_eigenvalue + 0.1).abs() < 1e-14)
            }
            other => panic!("unexpected {other:?}"),
        }

        match validate_density(&ComplexMatrix::identity(3), DEFAULT_TOL) {
            Err(DensityError::TraceNotOne { trace }) => assert_eq!(trace, 3.0),
            other => panic!("unexpected {other:?}"),
        }

        let m = ComplexMatrix::from_real_rows(&[&[0.5, 0.1], &[0.0, 0.5]]);
        assert!(matches!(validate_density(&m, DEFAULT_TOL), Err(DensityError::NotHermitian { .. })));
    }

    #[test]
    fn trace_power_examples() {
        let pure = validate_density(&ComplexMatrix::from_real_diagonal(&[1.0, 0.0, 0.0]), DEFAULT_TOL).unwrap();
        assert_eq!(trace_powers(&pure, 3), vec![1.0, 1.0, 1.0]);
        let mixed = validate_density(&ComplexMatrix::from_real_diagonal(&[0.25, 0.75]), DEFAULT_TOL).unwrap();
        assert_eq!(trace_powers(&mixed, 2), vec![1.0, 0.625]);
    }

    #[test]
    fn traceless_shift_examples() {
        let cases: [(&[f64], &[f64]); 3] = [
            (&[0.5, 0.5], &[0.0, 0.0]),
            (&[1.0, 0.0], &[0.5, -0.5]),
            (&[0.75, 0.25], &[0.25, -0.25]),
        ];
        for (rho, mu) in cases {
            let rho = validate_density(&ComplexMatrix::from_real_diagonal(rho), DEFAULT_TOL).unwrap();
            let shifted = to_traceless(&rho);
            assert_eq!(shifted.matrix(), &ComplexMatrix::from_real_diagonal(mu));
            assert!(shifted.matrix().trace().norm() <= DEFAULT_TOL);
            assert_eq!(&shifted.shift_to_unit_trace(), rho.matrix());
        }
    }

    #[test]
    fn grid_checks() {
        let rho = ComplexMatrix::from_real_diagonal(&[0.5, 0.5]);
        let tol = Tolerances::default();
        let err = Trajectory::from_matrices(vec![0.0], vec![rho.clone()], 1.0, &tol).unwrap_err();
        assert!(matches!(err, TrajectoryError::TooFewSamples { found: 1 }));
        let err = Trajectory::from_matrices(vec![0.0, 0.0], vec![rho.clone(), rho.clone()], 1.0, &tol).unwrap_err();
        assert!(matches!(err, TrajectoryError::NonIncreasingTimes { index: 1 }));
        let err = Trajectory::from_matrices(vec![0.0, 1.0], vec![rho.clone(), rho.clone()], -1.0, &tol).unwrap_err();
        assert!(matches!(err, TrajectoryError::InvalidHbar(_)));
        let err = Trajectory::from_matrices(
            vec![0.0, 1.0],
            vec![rho, ComplexMatrix::from_real_diagonal(&[1.0, 0.0, 0.0])],
            1.0,
            &tol,
        )
        .unwrap_err();
        assert!(matches!(err, TrajectoryError::DimensionMismatch { sample: 1, .. }));
    }

    #[test]
    fn spectrum_change_is_an_orbit_violation() {
        let a = ComplexMatrix::from_real_diagonal(&[0.25, 0.75]);
        let b = ComplexMatrix::from_real_diagonal(&[0.3, 0.7]);
        let err = Trajectory::from_matrices(vec![0.0, 1.0], vec![a, b], 1.0, &Tolerances::default()).unwrap_err();
        assert!(matches!(err, TrajectoryError::IsospectralityViolation { sample: 1, k: 2, .. }));
    }
}
