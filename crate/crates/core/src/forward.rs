//! Forward integration of the von Neumann equation `iħ ρ̇ = [H, ρ]` and
//! residuals of candidate Hamiltonians against a prescribed trajectory.
//!
//! Stepping is by exact unitary conjugation `ρ ↦ P ρ P^H`, `P = exp(−i H δ/ħ)`,
//! so the spectrum of the state is preserved to round-off whatever the step.

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::linalg::{expm_i_hermitian, reorthonormalize, ComplexMatrix, LinalgError};
use crate::reconstruct::HamiltonianTrajectory;
use crate::state::{trace_powers, DensityMatrix, Tolerances, Trajectory, TrajectoryError};
use crate::stencil::stencil_at;

pub const DEFAULT_SUBSTEPS: usize = 4;

#[derive(Debug, Error)]
pub enum ForwardError {
    #[error("time grids of trajectory and Hamiltonian differ")]
    GridMismatch,
    #[error("Hamiltonian dimension {found} does not match state dimension {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("substeps must be at least 1")]
    InvalidSubsteps,
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

pub type Result<T> = std::result::Result<T, ForwardError>;

fn conjugate(p: &ComplexMatrix, rho: &ComplexMatrix) -> ComplexMatrix {
    (&(p * rho) * &p.adjoint()).hermitian_part()
}

/// States on the Hamiltonian's grid, starting from `rho0` at its first time.
///
/// Each grid interval is split into `substeps` equal parts; on each part the
/// Hamiltonian is frozen at the part's midpoint, linearly interpolated
/// between the neighboring samples.
pub fn propagate(h: &HamiltonianTrajectory, rho0: &ComplexMatrix, substeps: usize) -> Result<Vec<ComplexMatrix>> {
    if substeps == 0 {
        return Err(ForwardError::InvalidSubsteps);
    }
    if h.dim() != rho0.dim() {
        return Err(ForwardError::DimensionMismatch { expected: rho0.dim(), found: h.dim() });
    }
    let mut total = ComplexMatrix::identity(rho0.dim());
    let mut out = Vec::with_capacity(h.len());
    out.push(rho0.clone());
    for j in 0..h.len().saturating_sub(1) {
        let dt = h.times[j + 1] - h.times[j];
        let delta = dt / substeps as f64;
        for s in 0..substeps {
            let theta = (s as f64 + 0.5) / substeps as f64;
            let mid = &h.hamiltonians[j].scale_real(1.0 - theta) + &h.hamiltonians[j + 1].scale_real(theta);
            total = &expm_i_hermitian(&mid, delta / h.hbar, f64::INFINITY)? * &total;
        }
        total = reorthonormalize(&total);
        out.push(conjugate(&total, rho0));
    }
    Ok(out)
}

/// [`propagate`] packaged as a validated trajectory.
pub fn integrate(h: &HamiltonianTrajectory, rho0: &DensityMatrix, substeps: usize) -> Result<Trajectory> {
    let states = propagate(h, rho0.matrix(), substeps)?;
    Ok(Trajectory::from_matrices(h.times.clone(), states, h.hbar, &Tolerances::default())?)
}

/// Integrates an analytic Hamiltonian to each of `times`, with steps no
/// longer than `max_step`. Uses the fourth-order Magnus propagator built
/// from the two Gauss-Legendre nodes of each step.
pub fn integrate_analytic(
    h: impl Fn(f64) -> ComplexMatrix,
    times: &[f64],
    rho0: &ComplexMatrix,
    hbar: f64,
    max_step: f64,
) -> Result<Vec<ComplexMatrix>> {
    let node = 3f64.sqrt() / 6.0;
    let mut total = ComplexMatrix::identity(rho0.dim());
    let mut out = Vec::with_capacity(times.len());
    out.push(rho0.clone());
    for w in times.windows(2) {
        let steps = ((w[1] - w[0]).abs() / max_step).ceil().max(1.0) as usize;
        let delta = (w[1] - w[0]) / steps as f64;
        for s in 0..steps {
            let t = w[0] + s as f64 * delta;
            let h1 = h(t + (0.5 - node) * delta);
            let h2 = h(t + (0.5 + node) * delta);
            // K = δ(H1 + H2)/(2ħ) − i (√3/12) δ² [H2, H1]/ħ², propagator exp(−iK).
            let comm = h2.commutator(&h1).scale(Complex64::new(0.0, -3f64.sqrt() / 12.0 * delta * delta / (hbar * hbar)));
            let k = &(&h1 + &h2).scale_real(0.5 * delta / hbar) + &comm;
            total = &expm_i_hermitian(&k.hermitian_part(), 1.0, f64::INFINITY)? * &total;
        }
        total = reorthonormalize(&total);
        out.push(conjugate(&total, rho0));
    }
    Ok(out)
}

/// How well a Hamiltonian explains a trajectory.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResidualReport {
    pub max_residual: f64,
    pub trajectory_distance: f64,
    pub invariant_drift: f64,
    /// `‖iħ ρ̇ − [H, ρ]‖_F` at the interior samples.
    pub per_sample: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ResidualOptions {
    /// Stencil width for `ρ̇`.
    pub points: usize,
    pub substeps: usize,
}

impl Default for ResidualOptions {
    fn default() -> Self {
        Self { points: crate::reconstruct::Scheme::CENTRAL_POINTS, substeps: DEFAULT_SUBSTEPS }
    }
}

fn same_grid(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-12 * x.abs().max(1.0))
}

/// Derivative of the state at sample `j` from the stencil of width `points`.
pub fn state_derivative(traj: &Trajectory, j: usize, points: usize) -> ComplexMatrix {
    let (range, w) = stencil_at(traj.times(), j, points);
    let states = traj.states();
    let center = states[j].matrix();
    let mut acc = ComplexMatrix::zeros(traj.dim());
    for (k, wk) in range.zip(&w) {
        if k != j {
            acc += &(states[k].matrix() - center).scale_real(*wk);
        }
    }
    acc
}

/// Maximal absolute drift of `Tr ρ^k`, `k = 1..=n`, along a sequence of states.
pub fn invariant_drift(states: &[ComplexMatrix]) -> f64 {
    let Some(first) = states.first() else { return 0.0 };
    let n = first.dim();
    let powers = |m: &ComplexMatrix| trace_powers(&DensityMatrix::unchecked(m.clone()), n);
    let reference = powers(first);
    states
        .iter()
        .flat_map(|m| powers(m).into_iter().zip(reference.clone()).map(|(a, b)| (a - b).abs()))
        .fold(0.0, f64::max)
}

pub fn residual(traj: &Trajectory, h: &HamiltonianTrajectory) -> Result<ResidualReport> {
    residual_with(traj, h, &ResidualOptions::default())
}

pub fn residual_with(traj: &Trajectory, h: &HamiltonianTrajectory, opts: &ResidualOptions) -> Result<ResidualReport> {
    if !same_grid(traj.times(), &h.times) {
        return Err(ForwardError::GridMismatch);
    }
    if h.dim() != traj.dim() {
        return Err(ForwardError::DimensionMismatch { expected: traj.dim(), found: h.dim() });
    }
    let i_hbar = Complex64::new(0.0, traj.hbar());
    let len = traj.len();
    let per_sample: Vec<f64> = (1..len.saturating_sub(1))
        .map(|j| {
            let rho = traj.states()[j].matrix();
            let lhs = state_derivative(traj, j, opts.points).scale(i_hbar);
            (&lhs - &h.hamiltonians[j].commutator(rho)).frobenius_norm()
        })
        .collect();
    let max_residual = per_sample.iter().copied().fold(0.0, f64::max);
    let h_local = HamiltonianTrajectory { hbar: traj.hbar(), ..h.clone() };
    let integrated = propagate(&h_local, traj.states()[0].matrix(), opts.substeps)?;
    let trajectory_distance =
        integrated.iter().zip(traj.states()).map(|(a, b)| a.distance(b.matrix())).fold(0.0, f64::max);
    Ok(ResidualReport { max_residual, trajectory_distance, invariant_drift: invariant_drift(&integrated), per_sample })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn grid(n: usize, t1: f64) -> Vec<f64> {
        (0..n).map(|k| t1 * k as f64 / (n - 1) as f64).collect()
    }

    fn qubit_h(g: f64) -> ComplexMatrix {
        ComplexMatrix::from_rows(vec![vec![c(0.0, 0.0), c(0.0, g)], vec![c(0.0, -g), c(0.0, 0.0)]]).unwrap()
    }

    fn qubit_state(g: f64, t: f64) -> ComplexMatrix {
        let cos2 = (g * t).cos().powi(2);
        let off = 0.25 * (2.0 * g * t).sin();
        ComplexMatrix::from_real_rows(&[&[0.75 - 0.5 * cos2, off], &[off, 0.25 + 0.5 * cos2]])
    }

    fn constant(times: &[f64], h: ComplexMatrix) -> HamiltonianTrajectory {
        HamiltonianTrajectory::supplied(times.to_vec(), vec![h; times.len()], 1.0)
    }

    #[test]
    fn zero_hamiltonian_keeps_state() {
        let times = grid(6, 1.0);
        let rho0 = ComplexMatrix::from_real_rows(&[&[0.6, 0.2], &[0.2, 0.4]]);
        let states = propagate(&constant(&times, ComplexMatrix::zeros(2)), &rho0, 3).unwrap();
        assert!(states.iter().all(|s| s.distance(&rho0) < 1e-16));
    }

    #[test]
    fn constant_generator_reproduces_qubit_example() {
        let times = grid(101, 3.0);
        let rho0 = qubit_state(1.0, 0.0);
        let states = propagate(&constant(&times, qubit_h(1.0)), &rho0, 4).unwrap();
        for (t, s) in times.iter().zip(&states) {
            assert!((s[(0, 0)].re - (0.75 - 0.5 * t.cos().powi(2))).abs() < 1e-8);
            assert!(s.distance(&qubit_state(1.0, *t)) < 1e-8);
        }
    }

    #[test]
    fn residual_of_exact_pair_and_perturbed_pair() {
        let times = grid(101, 3.0);
        let states: Vec<ComplexMatrix> = times.iter().map(|&t| qubit_state(1.0, t)).collect();
        let traj = Trajectory::from_matrices(times.clone(), states, 1.0, &Tolerances::default()).unwrap();
        let good = residual(&traj, &constant(&times, qubit_h(1.0))).unwrap();
        assert!(good.max_residual <= 1e-6, "{}", good.max_residual);
        assert!(good.trajectory_distance <= 1e-8);
        assert_eq!(good.per_sample.len(), 99);
        let sigma_z = ComplexMatrix::from_real_diagonal(&[0.1, -0.1]);
        let bad = residual(&traj, &constant(&times, &qubit_h(1.0) + &sigma_z)).unwrap();
        assert!(bad.max_residual >= 1e-2, "{}", bad.max_residual);
    }

    #[test]
    fn constant_trajectory_has_zero_residual() {
        let times = grid(5, 1.0);
        let rho = ComplexMatrix::from_real_diagonal(&[0.3, 0.7]);
        let traj = Trajectory::from_matrices(times.clone(), vec![rho; 5], 1.0, &Tolerances::default()).unwrap();
        let r = residual(&traj, &constant(&times, ComplexMatrix::zeros(2))).unwrap();
        assert_eq!(r.max_residual, 0.0);
        assert_eq!(r.trajectory_distance, 0.0);
        assert_eq!(r.invariant_drift, 0.0);
    }

    #[test]
    fn grid_mismatch() {
        let times = grid(5, 1.0);
        let traj = Trajectory::from_matrices(times.clone(), vec![ComplexMatrix::from_real_diagonal(&[0.3, 0.7]); 5], 1.0, &Tolerances::default()).unwrap();
        let other = constant(&grid(5, 2.0), ComplexMatrix::zeros(2));
        assert!(matches!(residual(&traj, &other), Err(ForwardError::GridMismatch)));
    }

    #[test]
    fn analytic_integrator_is_fourth_order() {
        let h = |t: f64| {
            ComplexMatrix::from_rows(vec![vec![c(t.cos(), 0.0), c(0.5, t)], vec![c(0.5, -t), c(-t.cos(), 0.0)]]).unwrap()
        };
        let rho0 = ComplexMatrix::from_real_rows(&[&[0.7, 0.1], &[0.1, 0.3]]);
        let times = [0.0, 1.0];
        let reference = integrate_analytic(h, &times, &rho0, 1.0, 1e-3).unwrap()[1].clone();
        let e1 = integrate_analytic(h, &times, &rho0, 1.0, 0.1).unwrap()[1].distance(&reference);
        let e2 = integrate_analytic(h, &times, &rho0, 1.0, 0.05).unwrap()[1].distance(&reference);
        assert!(e1 / e2 > 12.0, "{e1} {e2}");
    }
}
