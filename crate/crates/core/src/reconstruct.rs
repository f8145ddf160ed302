//! Evolution operators and Hamiltonians from a prescribed trajectory.
//!
//! Pure trajectories go through projective coordinates `z_k = c_k / c_1` and
//! the closed-form Iwasawa factors. Mixed trajectories are diagonalized per
//! sample; eigenvectors are carried continuously along the grid (each
//! degenerate cluster is aligned to the previous sample by its polar factor)
//! and the determinant phase is unwrapped so that every operator is special
//! unitary. The Hamiltonian `H = iħ U̇ U⁻¹` is then obtained by differencing
//! the operator path, either directly or through its logarithm.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::linalg::{expm_i_hermitian, hermitian_eig, unitarity_defect, unitary_phase_generator, ComplexMatrix, LinalgError};
use crate::orbit::{classify, cluster_sizes, OrbitDescriptor, DEFAULT_CLUSTER_TOL};
use crate::state::Trajectory;
use crate::stencil::stencil_at;
use crate::stereographic::{extract_z, pure_state_factors, ChartError, ZMask, ZMatrix};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReconstructError {
    #[error("sample {sample} is not pure (largest eigenvalue {top_eigenvalue})")]
    NotPure { sample: usize, top_eigenvalue: f64 },
    #[error("sample {sample} lies outside the stereographic chart (|c_1| = {magnitude:e})")]
    ChartSingularity { sample: usize, magnitude: f64 },
    #[error("eigenvalue cluster pattern changes at sample {sample}")]
    EigenvalueCrossing { sample: usize },
    #[error("eigenvectors at sample {sample} overlap the previous sample by only {overlap:e}; refine the grid")]
    UnderResolved { sample: usize, overlap: f64 },
    #[error("{method} needs at least {needed} samples, found {found}")]
    TooFewSamples { method: &'static str, needed: usize, found: usize },
    #[error("step into sample {sample} rotates an eigenphase to {phase} (too close to +-pi)")]
    StepTooLarge { sample: usize, phase: f64 },
    #[error("gauge block structure {found:?} does not match the orbit blocks {expected:?}")]
    BlockMismatch { expected: Vec<usize>, found: Vec<usize> },
    #[error("time grids differ")]
    GridMismatch,
    #[error("basepoint {index} is outside a grid of {len} samples")]
    InvalidBasepoint { index: usize, len: usize },
    #[error("operator {index} is not unitary (defect {defect:e})")]
    NotUnitary { index: usize, defect: f64 },
    #[error("gauge sample {index} is not a block-diagonal unitary")]
    NotInStabilizer { index: usize },
    #[error(transparent)]
    Chart(#[from] ChartError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

pub type Result<T> = std::result::Result<T, ReconstructError>;

/// Differentiation backend for `H = iħ U̇ U⁻¹`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    /// Finite differences of the operators themselves.
    CentralDifference,
    /// Finite differences of `log(U_k U_j⁻¹)`, which vanish at `k = j` and
    /// have derivative exactly `−H_j/ħ` there.
    UnitaryLog,
}

impl Method {
    pub fn tag(self) -> &'static str {
        match self {
            Method::CentralDifference => "central_difference",
            Method::UnitaryLog => "unitary_log",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "central_difference" | "central" => Some(Method::CentralDifference),
            "unitary_log" | "log" => Some(Method::UnitaryLog),
            _ => None,
        }
    }
}

/// A method with its stencil width (number of samples per derivative).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Scheme {
    pub method: Method,
    pub points: usize,
}

impl Scheme {
    /// Five points: the three-point central difference plus one Richardson step.
    pub const CENTRAL_POINTS: usize = 5;
    pub const LOG_POINTS: usize = 9;

    pub fn central() -> Self {
        Self { method: Method::CentralDifference, points: Self::CENTRAL_POINTS }
    }

    pub fn unitary_log() -> Self {
        Self { method: Method::UnitaryLog, points: Self::LOG_POINTS }
    }

    pub fn with_points(self, points: usize) -> Self {
        Self { points, ..self }
    }
}

impl Default for Scheme {
    fn default() -> Self {
        Self::central()
    }
}

impl From<Method> for Scheme {
    fn from(m: Method) -> Self {
        match m {
            Method::CentralDifference => Self::central(),
            Method::UnitaryLog => Self::unitary_log(),
        }
    }
}

/// Column order of the canonical form used for chart coordinates.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum CanonicalOrder {
    #[default]
    Descending,
    Ascending,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReconstructOptions {
    pub basepoint: usize,
    pub scheme: Scheme,
    pub order: CanonicalOrder,
    pub cluster_tol: f64,
    /// Threshold on `|c_1|` and on chart minors.
    pub chart_tol: f64,
    /// Smallest admissible singular value of the overlap between adjacent
    /// eigenvector clusters.
    pub min_overlap: f64,
}

impl Default for ReconstructOptions {
    fn default() -> Self {
        Self {
            basepoint: 0,
            scheme: Scheme::default(),
            order: CanonicalOrder::default(),
            cluster_tol: DEFAULT_CLUSTER_TOL,
            chart_tol: 1e-10,
            min_overlap: 0.1,
        }
    }
}

/// Operators `U_j` with `ρ(t_j) = U_j ρ(t_b) U_j⁻¹` and `U_b = I`.
///
/// The path also remembers the chart factor at the basepoint (`anchor`), so
/// that `U_j · anchor` is the orbit parametrization `u(t_j)` carrying the
/// canonical form to `ρ(t_j)`, and the block pattern of that canonical form.
#[derive(Clone, Debug)]
pub struct EvolutionPath {
    times: Vec<f64>,
    operators: Vec<ComplexMatrix>,
    basepoint_index: usize,
    anchor: ComplexMatrix,
    blocks: Vec<usize>,
    removed_phase: Vec<f64>,
}

impl EvolutionPath {
    /// Path from explicit operators, with an identity anchor and a generic
    /// block pattern. Operators must be unitary to 1e-10.
    pub fn new(times: Vec<f64>, operators: Vec<ComplexMatrix>, basepoint_index: usize) -> Result<Self> {
        if times.len() != operators.len() {
            return Err(ReconstructError::GridMismatch);
        }
        if basepoint_index >= times.len() {
            return Err(ReconstructError::InvalidBasepoint { index: basepoint_index, len: times.len() });
        }
        for (index, u) in operators.iter().enumerate() {
            let defect = unitarity_defect(u);
            if defect > 1e-10 {
                return Err(ReconstructError::NotUnitary { index, defect });
            }
        }
        let n = operators[0].dim();
        Ok(Self {
            removed_phase: vec![0.0; times.len()],
            times,
            operators,
            basepoint_index,
            anchor: ComplexMatrix::identity(n),
            blocks: vec![1; n],
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn operators(&self) -> &[ComplexMatrix] {
        &self.operators
    }

    pub fn basepoint_index(&self) -> usize {
        self.basepoint_index
    }

    pub fn anchor(&self) -> &ComplexMatrix {
        &self.anchor
    }

    pub fn blocks(&self) -> &[usize] {
        &self.blocks
    }

    /// Global phase `φ_j` divided out of sample `j` (as `e^{-iφ_j/n}`).
    pub fn removed_phase(&self) -> &[f64] {
        &self.removed_phase
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.anchor.dim()
    }

    /// `u(t_j) = U_j · anchor`.
    pub fn chart_factor(&self, j: usize) -> ComplexMatrix {
        &self.operators[j] * &self.anchor
    }

    /// `max_j ‖U_j ρ(t_b) U_j⁻¹ − ρ(t_j)‖_F`.
    pub fn conjugation_residual(&self, traj: &Trajectory) -> f64 {
        let rho_b = traj.states()[self.basepoint_index].matrix();
        self.operators
            .iter()
            .zip(traj.states())
            .map(|(u, rho)| (&(u * rho_b) * &u.adjoint()).distance(rho.matrix()))
            .fold(0.0, f64::max)
    }
}

/// Hermitian samples of a Hamiltonian on a time grid.
#[derive(Clone, Debug, PartialEq)]
pub struct HamiltonianTrajectory {
    pub times: Vec<f64>,
    pub hamiltonians: Vec<ComplexMatrix>,
    pub hbar: f64,
    /// `None` for Hamiltonians supplied from outside.
    pub method: Option<Method>,
    /// Frobenius norm of the anti-Hermitian part removed from each sample.
    pub hermitize_residuals: Vec<f64>,
    pub notes: Vec<String>,
}

impl HamiltonianTrajectory {
    /// Samples of an externally given Hamiltonian; each is projected onto its
    /// Hermitian part.
    pub fn supplied(times: Vec<f64>, hamiltonians: Vec<ComplexMatrix>, hbar: f64) -> Self {
        let hermitize_residuals = hamiltonians.iter().map(|h| h.anti_hermitian_part().frobenius_norm()).collect();
        let hamiltonians = hamiltonians.iter().map(ComplexMatrix::hermitian_part).collect();
        Self { times, hamiltonians, hbar, method: None, hermitize_residuals, notes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.hamiltonians.first().map_or(0, ComplexMatrix::dim)
    }

    pub fn hermitize_residual_max(&self) -> f64 {
        self.hermitize_residuals.iter().copied().fold(0.0, f64::max)
    }
}

/// `H_j = iħ U̇_j U_j⁻¹` from a path, projected onto Hermitian matrices.
///
/// Central differences apply the stencil to the operators directly and need
/// three samples; with three points this is the classic central difference
/// with second-order one-sided ends. The log method applies the stencil to
/// `Θ_k = −i log(U_k U_j⁻¹)`; with two points it reduces to the forward
/// quotient `iħ log(U_{j+1} U_j⁻¹)/(t_{j+1} − t_j)`.
pub fn hamiltonian_from_path(path: &EvolutionPath, scheme: Scheme, hbar: f64) -> Result<HamiltonianTrajectory> {
    let times = path.times();
    let ops = path.operators();
    let len = times.len();
    let needed = match scheme.method {
        Method::CentralDifference => 3,
        Method::UnitaryLog => 2,
    };
    if len < needed || scheme.points < 2 {
        return Err(ReconstructError::TooFewSamples { method: scheme.method.tag(), needed, found: len });
    }
    let i_hbar = Complex64::new(0.0, hbar);
    let mut hamiltonians = Vec::with_capacity(len);
    let mut residuals = Vec::with_capacity(len);
    for j in 0..len {
        let (range, w) = stencil_at(times, j, scheme.points);
        let n = ops[j].dim();
        let mut acc = ComplexMatrix::zeros(n);
        let raw = match scheme.method {
            Method::CentralDifference => {
                for (k, wk) in range.zip(&w) {
                    if k != j {
                        acc += &(&ops[k] - &ops[j]).scale_real(*wk);
                    }
                }
                (&acc * &ops[j].adjoint()).scale(i_hbar)
            }
            Method::UnitaryLog => {
                let back = ops[j].adjoint();
                for (k, wk) in range.zip(&w) {
                    if k == j {
                        continue;
                    }
                    let (theta, _) = unitary_phase_generator(&(&ops[k] * &back), 1e-6).map_err(|e| match e {
                        LinalgError::BranchAmbiguity { phase } => ReconstructError::StepTooLarge { sample: k, phase },
                        other => other.into(),
                    })?;
                    acc += &theta.scale_real(*wk);
                }
                acc.scale_real(-hbar)
            }
        };
        residuals.push(raw.anti_hermitian_part().frobenius_norm());
        hamiltonians.push(raw.hermitian_part());
    }
    Ok(HamiltonianTrajectory {
        times: times.to_vec(),
        hamiltonians,
        hbar,
        method: Some(scheme.method),
        hermitize_residuals: residuals,
        notes: Vec::new(),
    })
}

/// Result of a reconstruction.
#[derive(Clone, Debug)]
pub struct Reconstruction {
    pub path: EvolutionPath,
    pub hamiltonian: HamiltonianTrajectory,
    /// Orbit of the basepoint state.
    pub descriptor: OrbitDescriptor,
    /// Chart coordinates of `u(t_j)`, `None` where the chart is singular.
    pub chart: Vec<Option<ZMatrix>>,
    /// `max_j ‖U_j ρ(t_b) U_j⁻¹ − ρ(t_j)‖_F`.
    pub conjugation_residual: f64,
}

fn check_basepoint(traj: &Trajectory, opts: &ReconstructOptions) -> Result<()> {
    if opts.basepoint >= traj.len() {
        return Err(ReconstructError::InvalidBasepoint { index: opts.basepoint, len: traj.len() });
    }
    Ok(())
}

fn finish(traj: &Trajectory, path: EvolutionPath, chart: Vec<Option<ZMatrix>>, opts: &ReconstructOptions) -> Result<Reconstruction> {
    let mut hamiltonian = hamiltonian_from_path(&path, opts.scheme, traj.hbar())?;
    let phase = path.removed_phase().iter().fold(0.0f64, |m, p| m.max(p.abs()));
    if phase > 0.0 {
        hamiltonian.notes.push(format!("global U(1) phase removed from operators (max |phase| {phase:.3e})"));
    }
    let descriptor = classify(&traj.states()[opts.basepoint], opts.cluster_tol);
    let conjugation_residual = path.conjugation_residual(traj);
    Ok(Reconstruction { path, hamiltonian, descriptor, chart, conjugation_residual })
}

/// Reconstruction for a trajectory of pure states.
pub fn reconstruct_pure(traj: &Trajectory, opts: &ReconstructOptions) -> Result<Reconstruction> {
    check_basepoint(traj, opts)?;
    let n = traj.dim();
    let mut factors = Vec::with_capacity(traj.len());
    let mut chart = Vec::with_capacity(traj.len());
    for (sample, rho) in traj.states().iter().enumerate() {
        let eig = hermitian_eig(rho.matrix(), f64::INFINITY)?;
        if (eig.values[0] - 1.0).abs() > opts.cluster_tol {
            return Err(ReconstructError::NotPure { sample, top_eigenvalue: eig.values[0] });
        }
        let c = eig.vectors.column(0);
        if c[0].norm() <= opts.chart_tol {
            return Err(ReconstructError::ChartSingularity { sample, magnitude: c[0].norm() });
        }
        let zvec: Vec<Complex64> = c[1..].iter().map(|ck| ck / c[0]).collect();
        factors.push(pure_state_factors(&zvec).u);
        chart.push(Some(ZMatrix::from_pure_coordinates(&zvec)));
    }
    let anchor = factors[opts.basepoint].clone();
    let back = anchor.adjoint();
    let operators = factors.iter().map(|u| u * &back).collect();
    let path = EvolutionPath {
        times: traj.times().to_vec(),
        operators,
        basepoint_index: opts.basepoint,
        anchor,
        blocks: ZMask::pure(n).blocks().to_vec(),
        removed_phase: vec![0.0; traj.len()],
    };
    finish(traj, path, chart, opts)
}

/// Polar factor `M (M^H M)^{-1/2}` and the smallest singular value of `M`.
fn polar_factor(m: &ComplexMatrix) -> Result<(ComplexMatrix, f64)> {
    let gram = &m.adjoint() * m;
    let eig = hermitian_eig(&gram.hermitian_part(), f64::INFINITY)?;
    let smallest = eig.values.last().copied().unwrap_or(0.0).max(0.0).sqrt();
    if smallest == 0.0 {
        return Ok((ComplexMatrix::identity(m.dim()), 0.0));
    }
    let inv_sqrt = eig.map(|l| Complex64::new(1.0 / l.sqrt(), 0.0));
    Ok((m * &inv_sqrt, smallest))
}

fn block_ranges(blocks: &[usize]) -> Vec<std::ops::Range<usize>> {
    let mut start = 0;
    blocks
        .iter()
        .map(|&b| {
            let r = start..start + b;
            start += b;
            r
        })
        .collect()
}

fn submatrix_columns(v: &ComplexMatrix, cols: std::ops::Range<usize>) -> Vec<Vec<Complex64>> {
    cols.map(|c| v.column(c)).collect()
}

/// Reconstruction for an arbitrary isospectral trajectory.
pub fn reconstruct_mixed(traj: &Trajectory, opts: &ReconstructOptions) -> Result<Reconstruction> {
    check_basepoint(traj, opts)?;
    let n = traj.dim();
    let mut vectors: Vec<ComplexMatrix> = Vec::with_capacity(traj.len());
    let mut blocks = Vec::new();
    for (sample, rho) in traj.states().iter().enumerate() {
        let eig = hermitian_eig(rho.matrix(), f64::INFINITY)?;
        let pattern = cluster_sizes(&eig.values, opts.cluster_tol);
        if sample == 0 {
            blocks = pattern;
            vectors.push(eig.vectors);
            continue;
        }
        if pattern != blocks {
            return Err(ReconstructError::EigenvalueCrossing { sample });
        }
        let prev = &vectors[sample - 1];
        let mut v = eig.vectors;
        for range in block_ranges(&blocks) {
            let size = range.len();
            let new_cols = submatrix_columns(&v, range.clone());
            let old_cols = submatrix_columns(prev, range.clone());
            // overlap[a][b] = <new_a | old_b>
            let overlap = ComplexMatrix::from_fn(size, |a, b| {
                new_cols[a].iter().zip(&old_cols[b]).map(|(x, y)| x.conj() * y).sum()
            });
            let (w, smallest) = polar_factor(&overlap)?;
            if smallest < opts.min_overlap {
                return Err(ReconstructError::UnderResolved { sample, overlap: smallest });
            }
            for b in 0..size {
                let col: Vec<Complex64> =
                    (0..n).map(|i| (0..size).map(|a| new_cols[a][i] * w[(a, b)]).sum()).collect();
                v.set_column(range.start + b, &col);
            }
        }
        vectors.push(v);
    }

    // Continuous branch of arg det V_j.
    let mut phase = Vec::with_capacity(vectors.len());
    let mut prev_det = vectors[0].determinant();
    let mut acc = prev_det.arg();
    for v in &vectors {
        let d = v.determinant();
        acc += (d / prev_det).arg();
        prev_det = d;
        phase.push(acc);
    }
    let b = opts.basepoint;
    let vb_adj = vectors[b].adjoint();
    let nf = n as f64;
    let removed_phase: Vec<f64> = phase.iter().map(|p| p - phase[b]).collect();
    let operators: Vec<ComplexMatrix> = vectors
        .iter()
        .zip(&removed_phase)
        .map(|(v, p)| (v * &vb_adj).scale(Complex64::from_polar(1.0, -p / nf)))
        .collect();

    let (mut anchor, chart_blocks) = match opts.order {
        CanonicalOrder::Descending => (vectors[b].clone(), blocks.clone()),
        CanonicalOrder::Ascending => {
            let mut a = ComplexMatrix::zeros(n);
            for k in 0..n {
                a.set_column(k, &vectors[b].column(n - 1 - k));
            }
            (a, blocks.iter().rev().copied().collect())
        }
    };
    let det = anchor.determinant();
    anchor = anchor.scale(Complex64::from_polar(1.0, -det.arg() / nf));

    let mask = ZMask::from_blocks(chart_blocks.clone());
    let chart = operators
        .iter()
        .map(|u| extract_z(&(u * &anchor), &mask, opts.chart_tol).ok().map(|(z, _)| z))
        .collect();
    let path = EvolutionPath {
        times: traj.times().to_vec(),
        operators,
        basepoint_index: b,
        anchor,
        blocks: chart_blocks,
        removed_phase,
    };
    finish(traj, path, chart, opts)
}

/// Pure trajectories go through [`reconstruct_pure`], everything else
/// through [`reconstruct_mixed`].
pub fn reconstruct(traj: &Trajectory, opts: &ReconstructOptions) -> Result<Reconstruction> {
    let first = classify(&traj.states()[0], opts.cluster_tol);
    if first.is_pure && traj.dim() >= 2 {
        reconstruct_pure(traj, opts)
    } else {
        reconstruct_mixed(traj, opts)
    }
}

type Generator = Arc<dyn Fn(f64) -> ComplexMatrix + Send + Sync>;

/// Path `v(t)` in the stabilizer of the canonical form: block-diagonal
/// unitaries for a given block pattern.
#[derive(Clone)]
pub struct GaugeElement {
    blocks: Vec<usize>,
    times: Vec<f64>,
    v_samples: Vec<ComplexMatrix>,
    generator: Option<Generator>,
}

impl fmt::Debug for GaugeElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GaugeElement")
            .field("blocks", &self.blocks)
            .field("samples", &self.v_samples.len())
            .field("analytic_generator", &self.generator.is_some())
            .finish()
    }
}

fn is_block_diagonal(m: &ComplexMatrix, blocks: &[usize], tol: f64) -> bool {
    ZMask::from_blocks(blocks.to_vec()).off_block_norm(m) <= tol
}

impl GaugeElement {
    /// Gauge path with a known generator `Ω(t) = v̇(t) v(t)⁻¹`.
    pub fn analytic(
        blocks: Vec<usize>,
        times: &[f64],
        v: impl Fn(f64) -> ComplexMatrix,
        generator: impl Fn(f64) -> ComplexMatrix + Send + Sync + 'static,
    ) -> Result<Self> {
        let v_samples = times.iter().map(|&t| v(t)).collect();
        Self::build(blocks, times, v_samples, Some(Arc::new(generator)))
    }

    /// Gauge path known only on the grid; its generator is obtained by
    /// finite differences.
    pub fn sampled(blocks: Vec<usize>, times: &[f64], v_samples: Vec<ComplexMatrix>) -> Result<Self> {
        Self::build(blocks, times, v_samples, None)
    }

    pub fn identity(blocks: Vec<usize>, times: &[f64]) -> Self {
        let n = blocks.iter().sum();
        Self {
            blocks,
            times: times.to_vec(),
            v_samples: vec![ComplexMatrix::identity(n); times.len()],
            generator: Some(Arc::new(move |_| ComplexMatrix::zeros(n))),
        }
    }

    fn build(blocks: Vec<usize>, times: &[f64], v_samples: Vec<ComplexMatrix>, generator: Option<Generator>) -> Result<Self> {
        if v_samples.len() != times.len() {
            return Err(ReconstructError::GridMismatch);
        }
        for (index, v) in v_samples.iter().enumerate() {
            if unitarity_defect(v) > 1e-10 || !is_block_diagonal(v, &blocks, 1e-12) {
                return Err(ReconstructError::NotInStabilizer { index });
            }
        }
        Ok(Self { blocks, times: times.to_vec(), v_samples, generator })
    }

    pub fn blocks(&self) -> &[usize] {
        &self.blocks
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn v_samples(&self) -> &[ComplexMatrix] {
        &self.v_samples
    }

    /// `Ω_j = v̇(t_j) v(t_j)⁻¹`, exact when a generator is known.
    pub fn generator_samples(&self) -> Vec<ComplexMatrix> {
        match &self.generator {
            Some(g) => self.times.iter().map(|&t| g(t)).collect(),
            None => (0..self.times.len())
                .map(|j| {
                    let (range, w) = stencil_at(&self.times, j, Scheme::CENTRAL_POINTS);
                    let mut acc = ComplexMatrix::zeros(self.v_samples[j].dim());
                    for (k, wk) in range.zip(&w) {
                        if k != j {
                            acc += &(&self.v_samples[k] - &self.v_samples[j]).scale_real(*wk);
                        }
                    }
                    &acc * &self.v_samples[j].adjoint()
                })
                .collect(),
        }
    }
}

/// Moves a reconstruction along the gauge family: `u ↦ u v`, so the
/// operators become `u_j v_j (u_b v_b)⁻¹` and the Hamiltonian gains the term
/// `iħ u Ω u⁻¹` with `Ω = v̇ v⁻¹`.
pub fn gauge_transform(
    path: &EvolutionPath,
    h: &HamiltonianTrajectory,
    v: &GaugeElement,
) -> Result<(EvolutionPath, HamiltonianTrajectory)> {
    if v.blocks() != path.blocks() {
        return Err(ReconstructError::BlockMismatch { expected: path.blocks().to_vec(), found: v.blocks().to_vec() });
    }
    if v.times() != path.times() || h.times != path.times() {
        return Err(ReconstructError::GridMismatch);
    }
    let b = path.basepoint_index();
    let moved: Vec<ComplexMatrix> = (0..path.len()).map(|j| &path.chart_factor(j) * &v.v_samples()[j]).collect();
    let back = moved[b].adjoint();
    let operators = moved.iter().map(|w| w * &back).collect();
    let i_hbar = Complex64::new(0.0, h.hbar);
    let mut hamiltonians = Vec::with_capacity(path.len());
    let mut residuals = Vec::with_capacity(path.len());
    for (j, omega) in v.generator_samples().into_iter().enumerate() {
        let u = path.chart_factor(j);
        let shift = (&(&u * &omega) * &u.adjoint()).scale(i_hbar);
        let raw = &h.hamiltonians[j] + &shift;
        residuals.push(h.hermitize_residuals[j] + raw.anti_hermitian_part().frobenius_norm());
        hamiltonians.push(raw.hermitian_part());
    }
    let mut notes = h.notes.clone();
    notes.push(format!(
        "gauge transformed by a stabilizer path with blocks {:?} ({} generator)",
        v.blocks(),
        if v.generator.is_some() { "analytic" } else { "finite-difference" }
    ));
    let new_path = EvolutionPath {
        times: path.times.clone(),
        operators,
        basepoint_index: b,
        anchor: moved[b].clone(),
        blocks: path.blocks.clone(),
        removed_phase: path.removed_phase.clone(),
    };
    let new_h = HamiltonianTrajectory {
        times: h.times.clone(),
        hamiltonians,
        hbar: h.hbar,
        method: h.method,
        hermitize_residuals: residuals,
        notes,
    };
    Ok((new_path, new_h))
}

/// Random smooth stabilizer path `v(t) = exp(Σ_b s_b(t) G_b)` with fixed
/// random anti-Hermitian blocks `G_b` (unit Frobenius norm) and
/// `s_b(t) = smoothness · a_b · sin(ω_b (t − t0))`, so `v(t0) = I`.
pub fn sample_stabilizer(blocks: &[usize], times: &[f64], t0: f64, seed: u64, smoothness: f64) -> GaugeElement {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n: usize = blocks.iter().sum();
    let mut parts = Vec::with_capacity(blocks.len());
    let mut start = 0;
    for &size in blocks {
        let g = ComplexMatrix::from_fn(size, |_, _| {
            Complex64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
        })
        .anti_hermitian_part();
        let norm = g.frobenius_norm();
        let g = if norm > 0.0 { g.scale_real(1.0 / norm) } else { g };
        // Embedded Hermitian K = iG, so exp(sG) = exp(-i s K).
        let mut k = ComplexMatrix::zeros(n);
        for i in 0..size {
            for j in 0..size {
                k[(start + i, start + j)] = Complex64::new(0.0, 1.0) * g[(i, j)];
            }
        }
        let amplitude = smoothness * rng.random_range(0.5..1.5);
        let omega = rng.random_range(0.5..2.0);
        parts.push((k, amplitude, omega));
        start += size;
    }
    let parts = Arc::new(parts);
    let v = {
        let parts = Arc::clone(&parts);
        move |t: f64| {
            let mut k = ComplexMatrix::zeros(n);
            for (kb, a, w) in parts.iter() {
                k += &kb.scale_real(a * (w * (t - t0)).sin());
            }
            expm_i_hermitian(&k, 1.0, f64::INFINITY).expect("finite generator")
        }
    };
    let generator = move |t: f64| {
        let mut g = ComplexMatrix::zeros(n);
        for (kb, a, w) in parts.iter() {
            g += &kb.scale(Complex64::new(0.0, -a * w * (w * (t - t0)).cos()));
        }
        g
    };
    GaugeElement::analytic(blocks.to_vec(), times, v, generator).expect("block exponentials are stabilizer elements")
}

/// [`sample_stabilizer`] for the block pattern of an orbit (descending order).
pub fn sample_stabilizer_for(descriptor: &OrbitDescriptor, times: &[f64], t0: f64, seed: u64, smoothness: f64) -> GaugeElement {
    sample_stabilizer(&descriptor.multiplicities, times, t0, seed, smoothness)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::DEFAULT_TOL;
    use crate::state::{DensityMatrix, Tolerances};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn grid(n: usize, t0: f64, t1: f64) -> Vec<f64> {
        (0..n).map(|k| t0 + (t1 - t0) * k as f64 / (n - 1) as f64).collect()
    }

    fn rotation(t: f64) -> ComplexMatrix {
        ComplexMatrix::from_real_rows(&[&[t.cos(), t.sin()], &[-t.sin(), t.cos()]])
    }

    fn qubit_trajectory(times: &[f64]) -> Trajectory {
        let rho0 = ComplexMatrix::from_real_diagonal(&[0.25, 0.75]);
        let states = times.iter().map(|&t| &(&rotation(t) * &rho0) * &rotation(t).adjoint()).collect();
        Trajectory::from_matrices(times.to_vec(), states, 1.0, &Tolerances::default()).unwrap()
    }

    fn generator_qubit() -> ComplexMatrix {
        ComplexMatrix::from_rows(vec![vec![c(0.0, 0.0), c(0.0, 1.0)], vec![c(0.0, -1.0), c(0.0, 0.0)]]).unwrap()
    }

    #[test]
    fn identity_path_gives_zero_hamiltonian() {
        let times = grid(7, 0.0, 1.0);
        let path = EvolutionPath::new(times.clone(), vec![ComplexMatrix::identity(3); 7], 0).unwrap();
        for scheme in [Scheme::central(), Scheme::central().with_points(3), Scheme::unitary_log(), Scheme::unitary_log().with_points(2)] {
            let h = hamiltonian_from_path(&path, scheme, 1.0).unwrap();
            assert!(h.hamiltonians.iter().all(|m| m.frobenius_norm() == 0.0));
        }
    }

    #[test]
    fn log_method_is_exact_on_rotations() {
        let g = 1.3;
        let times = grid(11, 0.0, 1.0);
        let ops = times.iter().map(|&t| rotation(g * t)).collect();
        let path = EvolutionPath::new(times, ops, 0).unwrap();
        let expected = generator_qubit().scale_real(g);
        for points in [2, 3, 9] {
            let h = hamiltonian_from_path(&path, Scheme::unitary_log().with_points(points), 1.0).unwrap();
            for m in &h.hamiltonians {
                assert!(m.max_abs_diff(&expected) < 1e-13, "points {points}");
            }
        }
    }

    #[test]
    fn central_difference_is_second_order() {
        let a = ComplexMatrix::from_rows(vec![
            vec![c(0.3, 0.0), c(0.2, -0.5), c(-0.1, 0.4)],
            vec![c(0.2, 0.5), c(-0.7, 0.0), c(0.6, 0.1)],
            vec![c(-0.1, -0.4), c(0.6, -0.1), c(0.2, 0.0)],
        ])
        .unwrap();
        let error = |samples: usize| {
            let times = grid(samples, 0.0, 1.0);
            let ops = times.iter().map(|&t| expm_i_hermitian(&a, t, DEFAULT_TOL).unwrap()).collect();
            let path = EvolutionPath::new(times, ops, 0).unwrap();
            let h = hamiltonian_from_path(&path, Scheme::central().with_points(3), 1.0).unwrap();
            h.hamiltonians.iter().map(|m| m.max_abs_diff(&a)).fold(0.0, f64::max)
        };
        let ratio = error(21) / error(41);
        assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn central_needs_three_samples() {
        let path = EvolutionPath::new(vec![0.0, 1.0], vec![ComplexMatrix::identity(2); 2], 0).unwrap();
        assert!(matches!(hamiltonian_from_path(&path, Scheme::central(), 1.0), Err(ReconstructError::TooFewSamples { .. })));
        assert!(hamiltonian_from_path(&path, Scheme::unitary_log(), 1.0).is_ok());
    }

    #[test]
    fn log_method_reports_large_steps() {
        let times = vec![0.0, 1.0, 2.0];
        let ops = times.iter().map(|&t| rotation(t * std::f64::consts::FRAC_PI_2 * 2.0)).collect();
        let path = EvolutionPath::new(times, ops, 0).unwrap();
        assert!(matches!(
            hamiltonian_from_path(&path, Scheme::unitary_log().with_points(2), 1.0),
            Err(ReconstructError::StepTooLarge { .. })
        ));
    }

    #[test]
    fn constant_trajectories() {
        let times = grid(9, 0.0, 2.0);
        let rho = ComplexMatrix::from_real_rows(&[&[0.6, 0.1], &[0.1, 0.4]]);
        let traj = Trajectory::from_matrices(times.clone(), vec![rho; 9], 1.0, &Tolerances::default()).unwrap();
        let rec = reconstruct_mixed(&traj, &ReconstructOptions::default()).unwrap();
        for (u, h) in rec.path.operators().iter().zip(&rec.hamiltonian.hamiltonians) {
            assert!(u.distance(&ComplexMatrix::identity(2)) < 1e-14);
            assert!(h.frobenius_norm() < 1e-13);
        }
        let pure = DensityMatrix::pure(&[c(0.6, 0.0), c(0.0, 0.8), c(0.0, 0.0)]).unwrap();
        let traj = Trajectory::from_matrices(times, vec![pure.into_matrix(); 9], 1.0, &Tolerances::default()).unwrap();
        let rec = reconstruct_pure(&traj, &ReconstructOptions::default()).unwrap();
        for (u, h) in rec.path.operators().iter().zip(&rec.hamiltonian.hamiltonians) {
            assert!(u.distance(&ComplexMatrix::identity(3)) < 1e-14);
            assert!(h.frobenius_norm() < 1e-13);
        }
    }

    #[test]
    fn qubit_mixed_reproduces_rotation() {
        let times = grid(101, 0.0, 1.4);
        let traj = qubit_trajectory(&times);
        let rec = reconstruct_mixed(&traj, &ReconstructOptions { order: CanonicalOrder::Ascending, ..Default::default() }).unwrap();
        for (t, u) in times.iter().zip(rec.path.operators()) {
            assert!(u.max_abs_diff(&rotation(*t)) < 1e-12);
        }
        for h in &rec.hamiltonian.hamiltonians {
            assert!(h.max_abs_diff(&generator_qubit()) < 1e-6);
        }
        for (t, z) in times.iter().zip(&rec.chart) {
            let z = z.as_ref().unwrap();
            assert!((z.matrix()[(1, 0)] - c(-t.tan(), 0.0)).norm() < 1e-10);
        }
        assert!(rec.conjugation_residual < 1e-14);
    }

    #[test]
    fn basepoint_does_not_change_hamiltonian() {
        let times = grid(41, 0.0, 1.0);
        let traj = qubit_trajectory(&times);
        let a = reconstruct_mixed(&traj, &ReconstructOptions::default()).unwrap();
        let b = reconstruct_mixed(&traj, &ReconstructOptions { basepoint: 20, ..Default::default() }).unwrap();
        assert!(b.path.operators()[20].distance(&ComplexMatrix::identity(2)) < 1e-14);
        for (x, y) in a.hamiltonian.hamiltonians.iter().zip(&b.hamiltonian.hamiltonians) {
            assert!(x.distance(y) < 1e-9);
        }
    }

    #[test]
    fn spectrum_change_is_a_crossing() {
        let times = grid(5, 0.0, 1.0);
        let mut states = vec![ComplexMatrix::from_real_diagonal(&[0.7, 0.3]); 5];
        states[3] = ComplexMatrix::from_real_diagonal(&[0.5, 0.5]);
        // Isospectrality would reject this trajectory; build it with a loose tolerance.
        let loose = Tolerances { density: 1e-10, isospectral: 1.0 };
        let traj = Trajectory::from_matrices(times, states, 1.0, &loose).unwrap();
        assert!(matches!(
            reconstruct_mixed(&traj, &ReconstructOptions::default()),
            Err(ReconstructError::EigenvalueCrossing { sample: 3 })
        ));
    }

    #[test]
    fn pure_chart_singularity_and_impurity() {
        let times = grid(3, 0.0, 1.0);
        let outside = DensityMatrix::pure(&[c(0.0, 0.0), c(1.0, 0.0)]).unwrap();
        let traj = Trajectory::from_matrices(times.clone(), vec![outside.into_matrix(); 3], 1.0, &Tolerances::default()).unwrap();
        assert!(matches!(reconstruct_pure(&traj, &ReconstructOptions::default()), Err(ReconstructError::ChartSingularity { sample: 0, .. })));
        let traj = qubit_trajectory(&times);
        assert!(matches!(reconstruct_pure(&traj, &ReconstructOptions::default()), Err(ReconstructError::NotPure { sample: 0, .. })));
    }

    #[test]
    fn identity_gauge_is_neutral() {
        let times = grid(21, 0.0, 1.0);
        let traj = qubit_trajectory(&times);
        let rec = reconstruct_mixed(&traj, &ReconstructOptions::default()).unwrap();
        let v = GaugeElement::identity(rec.path.blocks().to_vec(), &times);
        let (path, h) = gauge_transform(&rec.path, &rec.hamiltonian, &v).unwrap();
        for (a, b) in path.operators().iter().zip(rec.path.operators()) {
            assert!(a.distance(b) < 1e-14);
        }
        for (a, b) in h.hamiltonians.iter().zip(&rec.hamiltonian.hamiltonians) {
            assert!(a.distance(b) < 1e-14);
        }
    }

    #[test]
    fn gauge_rejects_wrong_blocks() {
        let times = grid(5, 0.0, 1.0);
        let traj = qubit_trajectory(&times);
        let rec = reconstruct_mixed(&traj, &ReconstructOptions::default()).unwrap();
        let v = GaugeElement::identity(vec![2], &times);
        assert!(matches!(gauge_transform(&rec.path, &rec.hamiltonian, &v), Err(ReconstructError::BlockMismatch { .. })));
    }

    #[test]
    fn stabilizer_samples_respect_blocks() {
        let times = grid(11, 0.0, 2.0);
        let v = sample_stabilizer(&[1, 2], &times, 0.0, 4, 1.0);
        assert!(v.v_samples()[0].distance(&ComplexMatrix::identity(3)) < 1e-15);
        for m in v.v_samples() {
            assert!(unitarity_defect(m) < 1e-13);
            assert!(is_block_diagonal(m, &[1, 2], 0.0));
        }
        assert!(v.v_samples()[5].distance(&ComplexMatrix::identity(3)) > 1e-3);
        let diag = sample_stabilizer(&[1, 1], &times, 0.0, 4, 1.0);
        assert!(diag.v_samples().iter().all(|m| is_block_diagonal(m, &[1, 1], 0.0)));
        let flat = sample_stabilizer(&[1, 2], &times, 0.0, 4, 0.0);
        assert!(flat.v_samples().iter().all(|m| m.distance(&ComplexMatrix::identity(3)) == 0.0));
    }

    #[test]
    fn stabilizer_generator_matches_finite_differences() {
        let times = grid(401, 0.0, 2.0);
        let exact = sample_stabilizer(&[2, 1], &times, 0.0, 11, 0.8);
        let approx = GaugeElement::sampled(vec![2, 1], &times, exact.v_samples().to_vec()).unwrap();
        for (a, b) in exact.generator_samples().iter().zip(approx.generator_samples()) {
            assert!(a.distance(&b) < 1e-8);
        }
    }

    #[test]
    fn sampled_gauge_rejects_foreign_elements() {
        let times = grid(2, 0.0, 1.0);
        let r = rotation(0.3);
        assert!(matches!(
            GaugeElement::sampled(vec![1, 1], &times, vec![ComplexMatrix::identity(2), r]),
            Err(ReconstructError::NotInStabilizer { index: 1 })
        ));
    }

    #[test]
    fn supplied_hamiltonians_are_projected() {
        let h = ComplexMatrix::from_rows(vec![vec![c(1.0, 0.0), c(0.0, 1.0)], vec![c(0.0, 0.0), c(-1.0, 0.0)]]).unwrap();
        let ht = HamiltonianTrajectory::supplied(vec![0.0], vec![h], 1.0);
        assert!(ht.hamiltonians[0].hermiticity_defect() == 0.0);
        assert!((ht.hermitize_residual_max() - 0.5f64.sqrt()).abs() < 1e-15);
    }
}
