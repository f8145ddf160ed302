//! Reconstruction of Hamiltonians from prescribed density-matrix trajectories.
//!
//! Given samples `ρ(t_j)` of an isospectral evolution, the crate builds a
//! unitary path `U(t)` with `ρ(t) = U ρ(t₀) U⁻¹` through an orbit chart of the
//! special unitary group, then the Hamiltonian `H = iħ U̇ U⁻¹`, together with
//! the family of Hamiltonians obtained by right-multiplying the chart factor
//! with stabilizer paths. A forward von Neumann integrator checks the
//! results.
//!
//! ```
//! use hamrecon::examples::{qubit_mixed, uniform_grid};
//! use hamrecon::reconstruct::{reconstruct_mixed, ReconstructOptions};
//!
//! let ex = qubit_mixed(1.0);
//! let traj = ex.sample(&uniform_grid(101, 1.4));
//! let rec = reconstruct_mixed(&traj, &ReconstructOptions::default()).unwrap();
//! let h_ref = ex.reference_hamiltonian_at(0.7).unwrap();
//! assert!(rec.hamiltonian.hamiltonians[50].max_abs_diff(&h_ref) < 1e-6);
//! ```

pub mod examples;
pub mod format;
pub mod forward;
pub mod linalg;
pub mod orbit;
pub mod reconstruct;
pub mod state;
pub mod stencil;
pub mod stereographic;

pub use linalg::ComplexMatrix;
pub use num_complex::Complex64;
