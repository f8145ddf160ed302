//! Built-in analytic trajectories with reference solutions, and seeded random
//! instances for round-trip testing.
//!
//! Qutrit basis order: `(|1,−1⟩, |0,0⟩, |−1,1⟩)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::forward::integrate_analytic;
use crate::linalg::ComplexMatrix;
use crate::reconstruct::HamiltonianTrajectory;
use crate::state::{validate_density, DensityMatrix, Tolerances, Trajectory};

/// Largest integration step used to generate random-instance states.
pub const RANDOM_MAX_STEP: f64 = 1.0 / 256.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExampleError {
    #[error("unknown example {0:?} (expected qutrit-pure, qubit-mixed or random)")]
    UnknownName(String),
    #[error("example {example} has no parameter {name:?}")]
    UnknownParameter { example: String, name: String },
    #[error("invalid value {value} for parameter {name}: {reason}")]
    InvalidParameter { name: String, value: f64, reason: &'static str },
}

/// Settings of [`random_smooth_instance_with`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RandomOptions {
    pub terms: usize,
    /// Scale of the constant part `A_0`.
    pub static_amplitude: f64,
    /// Scale of the oscillating parts `A_m, B_m`, `m ≥ 1`.
    pub oscillating_amplitude: f64,
    /// Base angular frequency `ν`.
    pub nu: f64,
}

impl Default for RandomOptions {
    fn default() -> Self {
        Self { terms: 2, static_amplitude: 1.0, oscillating_amplitude: 1.0, nu: 1.0 }
    }
}

#[derive(Clone, Debug)]
struct RandomInstance {
    a0: ComplexMatrix,
    a: Vec<ComplexMatrix>,
    b: Vec<ComplexMatrix>,
    nu: f64,
    rho0: ComplexMatrix,
}

impl RandomInstance {
    fn hamiltonian(&self, t: f64) -> ComplexMatrix {
        let mut h = self.a0.clone();
        for (m, (am, bm)) in self.a.iter().zip(&self.b).enumerate() {
            let phase = (m + 1) as f64 * self.nu * t;
            h += &am.scale_real(phase.cos());
            h += &bm.scale_real(phase.sin());
        }
        h
    }
}

#[derive(Clone, Debug)]
enum Kind {
    QutritPure { omega: f64 },
    QubitMixed { g: f64 },
    Random(Box<RandomInstance>),
}

/// A named analytic or generated trajectory with optional reference
/// Hamiltonian and evolution operator.
#[derive(Clone, Debug)]
pub struct ParametricExample {
    name: &'static str,
    n: usize,
    hbar: f64,
    parameters: Vec<(String, f64)>,
    kind: Kind,
}

/// Pure qutrit `|ψ(t)⟩ ∝ |1,−1⟩ + cos ωt |0,0⟩ + e^{iπ/6} |−1,1⟩`.
pub fn qutrit_pure(omega: f64) -> ParametricExample {
    assert!(omega != 0.0 && omega.is_finite(), "omega must be finite and nonzero");
    ParametricExample {
        name: "qutrit-pure",
        n: 3,
        hbar: 1.0,
        parameters: vec![("omega".into(), omega)],
        kind: Kind::QutritPure { omega },
    }
}

/// Mixed qubit rotated by `[[cos gt, sin gt], [−sin gt, cos gt]]` from
/// `diag(1/4, 3/4)`.
pub fn qubit_mixed(g: f64) -> ParametricExample {
    assert!(g != 0.0 && g.is_finite(), "g must be finite and nonzero");
    ParametricExample { name: "qubit-mixed", n: 2, hbar: 1.0, parameters: vec![("g".into(), g)], kind: Kind::QubitMixed { g } }
}

pub fn random_smooth_instance(n: usize, seed: u64, terms: usize) -> ParametricExample {
    random_smooth_instance_with(n, seed, RandomOptions { terms, ..Default::default() })
}

fn random_hermitian(n: usize, norm: f64, rng: &mut ChaCha8Rng) -> ComplexMatrix {
    let g = ComplexMatrix::from_fn(n, |_, _| {
        Complex64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
    })
    .hermitian_part();
    let f = g.frobenius_norm();
    if f == 0.0 {
        g
    } else {
        g.scale_real(norm / f)
    }
}

/// Haar-random unitary: Gram-Schmidt on a complex Gaussian matrix, columns
/// normalized so the implied triangular factor has a positive diagonal.
pub fn haar_unitary(n: usize, rng: &mut impl Rng) -> ComplexMatrix {
    let mut cols: Vec<Vec<Complex64>> = Vec::with_capacity(n);
    for _ in 0..n {
        let mut v: Vec<Complex64> = (0..n)
            .map(|_| Complex64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal)))
            .collect();
        for _ in 0..2 {
            for q in &cols {
                let proj: Complex64 = q.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
                for (vi, qi) in v.iter_mut().zip(q) {
                    *vi -= proj * qi;
                }
            }
        }
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        cols.push(v.into_iter().map(|z| z / norm).collect());
    }
    let mut u = ComplexMatrix::zeros(n);
    for (j, col) in cols.iter().enumerate() {
        u.set_column(j, col);
    }
    u
}

/// `H(t) = A_0 + Σ_{m=1}^{terms} (A_m cos mνt + B_m sin mνt)` with seeded
/// Hermitian coefficients (`‖A_m‖_F = ‖B_m‖_F = amplitude/m`), and a seeded
/// initial state with well separated eigenvalues in a Haar-random basis.
pub fn random_smooth_instance_with(n: usize, seed: u64, opts: RandomOptions) -> ParametricExample {
    assert!(n >= 2 && opts.terms >= 1, "need n >= 2 and at least one term");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a0 = random_hermitian(n, opts.static_amplitude, &mut rng);
    let mut a = Vec::with_capacity(opts.terms);
    let mut b = Vec::with_capacity(opts.terms);
    for m in 1..=opts.terms {
        a.push(random_hermitian(n, opts.oscillating_amplitude / m as f64, &mut rng));
        b.push(random_hermitian(n, opts.oscillating_amplitude / m as f64, &mut rng));
    }
    let weights: Vec<f64> = (0..n).map(|k| (k + 1) as f64 + 0.5 * rng.random::<f64>()).collect();
    let total: f64 = weights.iter().sum();
    let v = haar_unitary(n, &mut rng);
    let d = ComplexMatrix::from_real_diagonal(&weights.iter().map(|w| w / total).collect::<Vec<_>>());
    let rho0 = (&(&v * &d) * &v.adjoint()).hermitian_part();
    ParametricExample {
        name: "random",
        n,
        hbar: 1.0,
        parameters: vec![
            ("n".into(), n as f64),
            ("seed".into(), seed as f64),
            ("terms".into(), opts.terms as f64),
            ("nu".into(), opts.nu),
        ],
        kind: Kind::Random(Box::new(RandomInstance { a0, a, b, nu: opts.nu, rho0 })),
    }
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

impl ParametricExample {
    /// Builds an example from its CLI name and `key=value` parameters.
    pub fn by_name(name: &str, params: &[(String, f64)]) -> Result<Self, ExampleError> {
        let get = |key: &str, default: f64| params.iter().rev().find(|(k, _)| k == key).map_or(default, |(_, v)| *v);
        let allowed: &[&str] = match name {
            "qutrit-pure" => &["omega", "hbar"],
            "qubit-mixed" => &["g", "hbar"],
            "random" => &["n", "seed", "terms", "nu", "hbar"],
            _ => return Err(ExampleError::UnknownName(name.to_string())),
        };
        if let Some((k, _)) = params.iter().find(|(k, _)| !allowed.contains(&k.as_str())) {
            return Err(ExampleError::UnknownParameter { example: name.to_string(), name: k.clone() });
        }
        let nonzero = |key: &str, v: f64| {
            if v == 0.0 || !v.is_finite() {
                Err(ExampleError::InvalidParameter { name: key.to_string(), value: v, reason: "must be finite and nonzero" })
            } else {
                Ok(v)
            }
        };
        let count = |key: &str, v: f64, min: f64| {
            if v.fract() != 0.0 || v < min || v > 64.0 {
                Err(ExampleError::InvalidParameter { name: key.to_string(), value: v, reason: "must be a small whole number" })
            } else {
                Ok(v as usize)
            }
        };
        let hbar = get("hbar", 1.0);
        if !(hbar > 0.0 && hbar.is_finite()) {
            return Err(ExampleError::InvalidParameter { name: "hbar".into(), value: hbar, reason: "must be positive" });
        }
        let ex = match name {
            "qutrit-pure" => qutrit_pure(nonzero("omega", get("omega", 1.0))?),
            "qubit-mixed" => qubit_mixed(nonzero("g", get("g", 1.0))?),
            _ => {
                let seed = get("seed", 0.0);
                if seed < 0.0 || seed.fract() != 0.0 || seed > u64::MAX as f64 {
                    return Err(ExampleError::InvalidParameter { name: "seed".into(), value: seed, reason: "must be a non-negative integer" });
                }
                let opts = RandomOptions {
                    terms: count("terms", get("terms", 2.0), 1.0)?,
                    nu: nonzero("nu", get("nu", 1.0))?,
                    ..Default::default()
                };
                random_smooth_instance_with(count("n", get("n", 2.0), 2.0)?, seed as u64, opts)
            }
        };
        Ok(ex.with_hbar(hbar))
    }

    /// Same example with a different action unit; Hamiltonians scale with it.
    pub fn with_hbar(mut self, hbar: f64) -> Self {
        assert!(hbar > 0.0 && hbar.is_finite());
        self.hbar = hbar;
        self
    }

    pub fn name(&self) -> &str {
        self.name
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn parameters(&self) -> &[(String, f64)] {
        &self.parameters
    }

    /// A natural window for sampling: one period for the qutrit, a window
    /// inside the stereographic chart for the qubit, unit time otherwise.
    pub fn default_t_max(&self) -> f64 {
        match &self.kind {
            Kind::QutritPure { omega } => 2.0 * PI / omega.abs(),
            Kind::QubitMixed { g } => 1.4 / g.abs(),
            Kind::Random(_) => 1.0,
        }
    }

    /// Unnormalized-then-normalized state vector, for pure examples.
    pub fn state_vector_at(&self, t: f64) -> Option<Vec<Complex64>> {
        match &self.kind {
            Kind::QutritPure { omega } => {
                let cw = (omega * t).cos();
                let norm = (2.0 + cw * cw).sqrt();
                Some(vec![c(1.0 / norm, 0.0), c(cw / norm, 0.0), Complex64::from_polar(1.0 / norm, PI / 6.0)])
            }
            _ => None,
        }
    }

    pub fn state_at(&self, t: f64) -> DensityMatrix {
        let m = match &self.kind {
            Kind::QutritPure { .. } => {
                let psi = self.state_vector_at(t).expect("pure example");
                ComplexMatrix::from_fn(3, |i, j| psi[i] * psi[j].conj())
            }
            Kind::QubitMixed { g } => {
                let cos2 = (g * t).cos().powi(2);
                let off = 0.25 * (2.0 * g * t).sin();
                ComplexMatrix::from_real_rows(&[&[0.75 - 0.5 * cos2, off], &[off, 0.25 + 0.5 * cos2]])
            }
            Kind::Random(inst) => {
                let states = integrate_analytic(|s| inst.hamiltonian(s), &[0.0, t], &inst.rho0, self.hbar, RANDOM_MAX_STEP)
                    .expect("Hermitian coefficients");
                states[1].clone()
            }
        };
        validate_density(&m, 1e-9).expect("examples produce valid states")
    }

    pub fn reference_hamiltonian_at(&self, t: f64) -> Option<ComplexMatrix> {
        match &self.kind {
            Kind::QutritPure { omega } => {
                let cw = (omega * t).cos();
                let pre = c(0.0, self.hbar * omega * (omega * t).sin() / (2.0 + cw * cw));
                let e = Complex64::from_polar(1.0, PI / 6.0);
                let zero = c(0.0, 0.0);
                let m = ComplexMatrix::from_rows(vec![
                    vec![zero, c(1.0, 0.0), zero],
                    vec![c(-1.0, 0.0), zero, -e.conj()],
                    vec![zero, e, zero],
                ])
                .expect("literal");
                Some(m.scale(pre))
            }
            Kind::QubitMixed { g } => Some(
                ComplexMatrix::from_rows(vec![vec![c(0.0, 0.0), c(0.0, self.hbar * g)], vec![c(0.0, -self.hbar * g), c(0.0, 0.0)]])
                    .expect("literal"),
            ),
            Kind::Random(inst) => Some(inst.hamiltonian(t).scale_real(self.hbar)),
        }
    }

    pub fn reference_evolution_at(&self, t: f64) -> Option<ComplexMatrix> {
        match &self.kind {
            Kind::QutritPure { omega } => Some(qutrit_evolution(omega * t)),
            Kind::QubitMixed { g } => {
                let (s, co) = (g * t).sin_cos();
                Some(ComplexMatrix::from_real_rows(&[&[co, s], &[-s, co]]))
            }
            Kind::Random(_) => None,
        }
    }

    /// States on a grid, validated as a trajectory.
    pub fn sample(&self, times: &[f64]) -> Trajectory {
        let states = match &self.kind {
            Kind::Random(inst) => {
                let mut grid = Vec::with_capacity(times.len() + 1);
                let prefixed = times.first().is_some_and(|&t0| t0 != 0.0);
                if prefixed {
                    grid.push(0.0);
                }
                grid.extend_from_slice(times);
                let mut s = integrate_analytic(|t| inst.hamiltonian(t), &grid, &inst.rho0, self.hbar, RANDOM_MAX_STEP)
                    .expect("Hermitian coefficients");
                if prefixed {
                    s.remove(0);
                }
                s
            }
            _ => times.iter().map(|&t| self.state_at(t).into_matrix()).collect(),
        };
        Trajectory::from_matrices(times.to_vec(), states, self.hbar, &Tolerances::default()).expect("examples are isospectral")
    }

    /// Reference Hamiltonian sampled on a grid.
    pub fn reference_hamiltonians(&self, times: &[f64]) -> Option<HamiltonianTrajectory> {
        let hs = times.iter().map(|&t| self.reference_hamiltonian_at(t)).collect::<Option<Vec<_>>>()?;
        Some(HamiltonianTrajectory::supplied(times.to_vec(), hs, self.hbar))
    }
}

/// Qutrit Hamiltonian with the `e^{±iπ/6}` phases swapped relative to
/// [`ParametricExample::reference_hamiltonian_at`]. It equals `-conj(H)` of
/// the reference and generates the complex-conjugate trajectory, so it does
/// not satisfy the von Neumann equation for [`qutrit_pure`].
pub fn qutrit_hamiltonian_conjugated_phases(omega: f64, hbar: f64, t: f64) -> ComplexMatrix {
    let cw = (omega * t).cos();
    let pre = c(0.0, hbar * omega * (omega * t).sin() / (2.0 + cw * cw));
    let e = Complex64::from_polar(1.0, PI / 6.0);
    let zero = c(0.0, 0.0);
    ComplexMatrix::from_rows(vec![vec![zero, c(1.0, 0.0), zero], vec![c(-1.0, 0.0), zero, -e], vec![zero, e.conj(), zero]])
        .expect("literal")
        .scale(pre)
}

/// Closed form of `u(t) u(0)⁻¹` for the qutrit example, written with
/// `s = sqrt(3 (2 + cos² x))` and `x = ωt`.
fn qutrit_evolution(x: f64) -> ComplexMatrix {
    let cw = x.cos();
    let s = (3.0 * (2.0 + cw * cw)).sqrt();
    let em = Complex64::from_polar(1.0, -PI / 6.0);
    let ep = Complex64::from_polar(1.0, PI / 6.0);
    let r = |v: f64| c(v, 0.0);
    ComplexMatrix::from_rows(vec![
        vec![r((2.0 + cw + s) / (2.0 * s)), r((1.0 - cw) / s), r((2.0 + cw - s) / (2.0 * s)) * em],
        vec![r((cw - 1.0) / s), r((2.0 + cw) / s), r((cw - 1.0) / s) * em],
        vec![r((2.0 + cw - s) / (2.0 * s)) * ep, r((1.0 - cw) / s) * ep, r((2.0 + cw + s) / (2.0 * s))],
    ])
    .expect("literal")
}

/// `samples` equally spaced times on `[0, t_max]`.
pub fn uniform_grid(samples: usize, t_max: f64) -> Vec<f64> {
    assert!(samples >= 2);
    (0..samples).map(|k| t_max * k as f64 / (samples - 1) as f64).collect()
}
