//! JSON and CSV exchange formats.
//!
//! A trajectory file looks like
//! `{"n": 2, "hbar": 1.0, "times": [...], "states": [M, ...]}` where each
//! matrix `M` is a row-major array of rows and each entry is `[re, im]`.
//! Hamiltonian files use the same layout with `"hamiltonians"` in place of
//! `"states"`, plus `"method"` and `"hermitize_residual_max"`. Writers print
//! every float with 17 significant digits so that reading a written file
//! reproduces the values exactly.

use std::fmt::Write as _;
use std::io::Read;

use num_complex::Complex64;
use serde::Deserialize;
use thiserror::Error;

use crate::linalg::ComplexMatrix;
use crate::reconstruct::{HamiltonianTrajectory, Method};
use crate::state::{Trajectory, TrajectoryError};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("parse error{}: {message}", position.map(|(l, c)| format!(" at line {l}, column {c}")).unwrap_or_default())]
    Parse { message: String, position: Option<(usize, usize)> },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl FormatError {
    fn shape(message: impl Into<String>) -> Self {
        Self::Parse { message: message.into(), position: None }
    }
}

impl From<serde_json::Error> for FormatError {
    fn from(e: serde_json::Error) -> Self {
        if e.is_io() {
            return Self::Io(e.into());
        }
        let position = (e.line() > 0).then(|| (e.line(), e.column()));
        Self::Parse { message: e.to_string(), position }
    }
}

impl From<FormatError> for TrajectoryError {
    fn from(e: FormatError) -> Self {
        match e {
            FormatError::Parse { message, position } => TrajectoryError::Parse { message, position },
            FormatError::Io(io) => TrajectoryError::Io(io),
        }
    }
}

type RawMatrix = Vec<Vec<[f64; 2]>>;

fn default_hbar() -> f64 {
    1.0
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TrajectoryDoc {
    n: Option<usize>,
    #[serde(default = "default_hbar")]
    hbar: f64,
    times: Vec<f64>,
    states: Vec<RawMatrix>,
}

#[derive(Deserialize)]
struct HamiltonianDoc {
    n: Option<usize>,
    #[serde(default = "default_hbar")]
    hbar: f64,
    times: Vec<f64>,
    hamiltonians: Vec<RawMatrix>,
    #[serde(default)]
    method: Option<String>,
    #[serde(default)]
    hermitize_residuals: Option<Vec<f64>>,
}

/// Unvalidated content of a trajectory file.
#[derive(Clone, Debug)]
pub struct RawTrajectory {
    pub hbar: f64,
    pub times: Vec<f64>,
    pub states: Vec<ComplexMatrix>,
}

fn convert_matrices(raw: Vec<RawMatrix>, declared: Option<usize>, key: &str) -> Result<Vec<ComplexMatrix>, FormatError> {
    let mut out = Vec::with_capacity(raw.len());
    for (index, rows) in raw.into_iter().enumerate() {
        let n = rows.len();
        if let Some(d) = declared {
            if d != n {
                return Err(FormatError::shape(format!("{key}[{index}] has {n} rows but n = {d}")));
            }
        }
        let rows: Vec<Vec<Complex64>> =
            rows.into_iter().map(|r| r.into_iter().map(|[re, im]| Complex64::new(re, im)).collect()).collect();
        let m = ComplexMatrix::from_rows(rows).map_err(|e| FormatError::shape(format!("{key}[{index}]: {e}")))?;
        out.push(m);
    }
    Ok(out)
}

fn check_times(times: &[f64]) -> Result<(), FormatError> {
    if times.is_empty() {
        return Err(FormatError::shape("times array is empty"));
    }
    Ok(())
}

/// Parses a trajectory file without validating the physics.
pub fn read_trajectory_file(source: impl Read) -> Result<RawTrajectory, FormatError> {
    let doc: TrajectoryDoc = serde_json::from_reader(source)?;
    check_times(&doc.times)?;
    let states = convert_matrices(doc.states, doc.n, "states")?;
    Ok(RawTrajectory { hbar: doc.hbar, times: doc.times, states })
}

/// Parses a Hamiltonian file. The method tag is optional so that
/// hand-written candidate Hamiltonians can be verified.
pub fn read_hamiltonian_file(source: impl Read) -> Result<HamiltonianTrajectory, FormatError> {
    let doc: HamiltonianDoc = serde_json::from_reader(source)?;
    check_times(&doc.times)?;
    if doc.times.len() != doc.hamiltonians.len() {
        return Err(FormatError::shape(format!(
            "{} time stamps but {} hamiltonians",
            doc.times.len(),
            doc.hamiltonians.len()
        )));
    }
    let method = match doc.method.as_deref() {
        None => None,
        Some(tag) => Some(Method::from_tag(tag).ok_or_else(|| FormatError::shape(format!("unknown method {tag:?}")))?),
    };
    let hamiltonians = convert_matrices(doc.hamiltonians, doc.n, "hamiltonians")?;
    let n = hamiltonians[0].dim();
    if hamiltonians.iter().any(|h| h.dim() != n) {
        return Err(FormatError::shape("hamiltonians differ in dimension"));
    }
    let residuals = doc.hermitize_residuals.unwrap_or_else(|| hamiltonians.iter().map(|h| h.anti_hermitian_part().frobenius_norm()).collect());
    Ok(HamiltonianTrajectory {
        times: doc.times,
        hamiltonians,
        hbar: doc.hbar,
        method,
        hermitize_residuals: residuals,
        notes: Vec::new(),
    })
}

/// Float with 17 significant digits, valid as a JSON number.
pub fn fmt_f64(x: f64) -> String {
    if x == 0.0 {
        // Keeps the sign of negative zero out of the files.
        return "0.0000000000000000e0".to_string();
    }
    format!("{x:.16e}")
}

fn push_floats(out: &mut String, xs: impl IntoIterator<Item = f64>) {
    out.push('[');
    for (i, x) in xs.into_iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        out.push_str(&fmt_f64(x));
    }
    out.push(']');
}

fn push_matrix(out: &mut String, m: &ComplexMatrix) {
    let n = m.dim();
    out.push('[');
    for i in 0..n {
        if i > 0 {
            out.push_str(", ");
        }
        out.push('[');
        for j in 0..n {
            if j > 0 {
                out.push_str(", ");
            }
            let z = m[(i, j)];
            let _ = write!(out, "[{}, {}]", fmt_f64(z.re), fmt_f64(z.im));
        }
        out.push(']');
    }
    out.push(']');
}

fn push_matrices<'a>(out: &mut String, key: &str, ms: impl IntoIterator<Item = &'a ComplexMatrix>) {
    let _ = writeln!(out, "  \"{key}\": [");
    let mut first = true;
    for m in ms {
        if !first {
            out.push_str(",\n");
        }
        first = false;
        out.push_str("    ");
        push_matrix(out, m);
    }
    out.push_str("\n  ]");
}

/// Serializes raw samples in the trajectory format.
pub fn trajectory_json<'a>(times: &[f64], states: impl IntoIterator<Item = &'a ComplexMatrix>, hbar: f64, n: usize) -> String {
    let mut out = String::new();
    let _ = write!(out, "{{\n  \"n\": {n},\n  \"hbar\": {},\n  \"times\": ", fmt_f64(hbar));
    push_floats(&mut out, times.iter().copied());
    out.push_str(",\n");
    push_matrices(&mut out, "states", states);
    out.push_str("\n}\n");
    out
}

pub fn write_trajectory(traj: &Trajectory) -> String {
    trajectory_json(traj.times(), traj.states().iter().map(|s| s.matrix()), traj.hbar(), traj.dim())
}

pub fn write_hamiltonian(h: &HamiltonianTrajectory) -> String {
    let mut out = String::new();
    let n = h.hamiltonians.first().map_or(0, ComplexMatrix::dim);
    let _ = write!(out, "{{\n  \"n\": {n},\n  \"hbar\": {},\n  \"times\": ", fmt_f64(h.hbar));
    push_floats(&mut out, h.times.iter().copied());
    out.push_str(",\n");
    push_matrices(&mut out, "hamiltonians", &h.hamiltonians);
    match h.method {
        Some(m) => {
            let _ = write!(out, ",\n  \"method\": \"{}\"", m.tag());
        }
        None => out.push_str(",\n  \"method\": null"),
    }
    let _ = write!(out, ",\n  \"hermitize_residual_max\": {}", fmt_f64(h.hermitize_residual_max()));
    out.push_str(",\n  \"hermitize_residuals\": ");
    push_floats(&mut out, h.hermitize_residuals.iter().copied());
    out.push_str("\n}\n");
    out
}

/// Plot-ready table: one row per sample, time followed by the real and
/// imaginary part of every entry in row-major order.
pub fn hamiltonian_csv(h: &HamiltonianTrajectory) -> String {
    let n = h.hamiltonians.first().map_or(0, ComplexMatrix::dim);
    let mut out = String::from("t");
    for i in 0..n {
        for j in 0..n {
            let _ = write!(out, ",H_{i}{j}_re,H_{i}{j}_im");
        }
    }
    out.push('\n');
    for (t, m) in h.times.iter().zip(&h.hamiltonians) {
        out.push_str(&fmt_f64(*t));
        for z in m.as_slice() {
            let _ = write!(out, ",{},{}", fmt_f64(z.re), fmt_f64(z.im));
        }
        out.push('\n');
    }
    out
}
