//! Command-line front end.
//!
//! Every subcommand prints one JSON document on standard output and
//! human-readable diagnostics on standard error. Exit status: 0 on success,
//! 1 when a trajectory or Hamiltonian fails validation or verification, 2 on
//! I/O, parse and usage errors.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use hamrecon::examples::{uniform_grid, ParametricExample};
use hamrecon::format::{hamiltonian_csv, read_hamiltonian_file, write_hamiltonian, write_trajectory};
use hamrecon::forward::{residual_with, ResidualOptions, DEFAULT_SUBSTEPS};
use hamrecon::orbit::{classify, DEFAULT_CLUSTER_TOL};
use hamrecon::reconstruct::{
    gauge_transform, reconstruct, sample_stabilizer_for, HamiltonianTrajectory, Method, ReconstructOptions, Scheme,
};
use hamrecon::state::{load_trajectory, Tolerances, Trajectory, TrajectoryError};
use serde_json::{json, Value};

#[derive(Debug, Parser)]
#[command(name = "hamrecon", version, about = "Reconstruct Hamiltonians from density-matrix trajectories")]
pub struct RunConfig {
    #[command(subcommand)]
    pub command: Command,
    /// Override the hbar stored in input files.
    #[arg(long, global = true)]
    pub hbar: Option<f64>,
    /// Absolute tolerance for Hermiticity, trace and positivity of states.
    #[arg(long, global = true, default_value_t = Tolerances::default().density)]
    pub density_tol: f64,
    /// Relative tolerance on the drift of trace powers along a trajectory.
    #[arg(long, global = true, default_value_t = Tolerances::default().isospectral)]
    pub isospectral_tol: f64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check that a trajectory file holds valid, isospectral states.
    Validate { input: PathBuf },
    /// Report the orbit of a trajectory.
    Classify {
        input: PathBuf,
        /// Sample whose state is classified (all samples share the orbit).
        #[arg(long, default_value_t = 0)]
        sample: usize,
        #[arg(long, default_value_t = DEFAULT_CLUSTER_TOL)]
        cluster_tol: f64,
    },
    /// Reconstruct a Hamiltonian that generates the trajectory.
    Reconstruct {
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, value_enum, default_value_t = MethodArg::Central)]
        method: MethodArg,
        /// Stencil width; defaults to 5 for central and 9 for log.
        #[arg(long)]
        points: Option<usize>,
        #[arg(long, default_value_t = 0)]
        basepoint: usize,
        /// Also write the Hamiltonian samples as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Check a Hamiltonian against a trajectory.
    Verify {
        trajectory: PathBuf,
        hamiltonian: PathBuf,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long, default_value_t = DEFAULT_SUBSTEPS)]
        substeps: usize,
        /// Stencil width for the derivative of the trajectory.
        #[arg(long, default_value_t = ResidualOptions::default().points)]
        points: usize,
    },
    /// Sample a built-in example into a trajectory file.
    Example {
        /// qutrit-pure, qubit-mixed or random.
        name: String,
        /// Example parameter as key=value; repeatable.
        #[arg(long = "param", value_parser = parse_param)]
        params: Vec<(String, f64)>,
        #[arg(long, default_value_t = 1001)]
        samples: usize,
        /// End of the time window; defaults to the example's natural span.
        #[arg(long)]
        t_max: Option<f64>,
        #[arg(short, long)]
        output: PathBuf,
        /// Also write the example's reference Hamiltonian on the same grid.
        #[arg(long)]
        reference: Option<PathBuf>,
    },
    /// Move a Hamiltonian along the gauge family with a seeded stabilizer path.
    Gauge {
        trajectory: PathBuf,
        hamiltonian: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Amplitude of the stabilizer path.
        #[arg(long, default_value_t = 1.0)]
        smoothness: f64,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Central,
    Log,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Central => Method::CentralDifference,
            MethodArg::Log => Method::UnitaryLog,
        }
    }
}

fn parse_param(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected key=value, got {s:?}"))?;
    let v: f64 = v.trim().parse().map_err(|e| format!("{k}: {e}"))?;
    Ok((k.trim().to_string(), v))
}

/// A failed command: exit status, message for standard error and an optional
/// report for standard output.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
    pub report: Option<Value>,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into(), report: None }
    }

    fn invalid(message: impl Into<String>) -> Self {
        let message = message.into();
        Self { code: 1, report: Some(json!({ "ok": false, "error": message })), message }
    }
}

fn io_failure(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::usage(format!("{}: {e}", path.display()))
}

fn trajectory_failure(path: &Path, e: TrajectoryError) -> Failure {
    match e {
        TrajectoryError::Parse { .. } | TrajectoryError::Io(_) => io_failure(path, e),
        other => Failure::invalid(format!("{}: {other}", path.display())),
    }
}

fn check_positive(name: &str, value: f64) -> Result<(), Failure> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Failure::usage(format!("--{name} must be positive, got {value}")))
    }
}

fn load(path: &Path, config: &RunConfig) -> Result<Trajectory, Failure> {
    let file = fs::File::open(path).map_err(|e| io_failure(path, e))?;
    let tol = Tolerances { density: config.density_tol, isospectral: config.isospectral_tol };
    let traj = load_trajectory(std::io::BufReader::new(file), &tol).map_err(|e| trajectory_failure(path, e))?;
    match config.hbar {
        Some(h) => traj.with_hbar(h).map_err(|e| trajectory_failure(path, e)),
        None => Ok(traj),
    }
}

fn load_hamiltonian(path: &Path, config: &RunConfig) -> Result<HamiltonianTrajectory, Failure> {
    let file = fs::File::open(path).map_err(|e| io_failure(path, e))?;
    let mut h = read_hamiltonian_file(std::io::BufReader::new(file)).map_err(|e| io_failure(path, e))?;
    if let Some(hbar) = config.hbar {
        h.hbar = hbar;
    }
    Ok(h)
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| io_failure(path, e))
}

fn write_outputs(h: &HamiltonianTrajectory, output: &Path, csv: Option<&Path>) -> Result<(), Failure> {
    write_file(output, &write_hamiltonian(h))?;
    if let Some(csv) = csv {
        write_file(csv, &hamiltonian_csv(h))?;
    }
    Ok(())
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

/// Executes a parsed command. On success returns the report for standard
/// output and any warnings for standard error.
pub fn execute(config: &RunConfig) -> Result<(Value, Vec<String>), Failure> {
    check_positive("density-tol", config.density_tol)?;
    check_positive("isospectral-tol", config.isospectral_tol)?;
    if let Some(h) = config.hbar {
        check_positive("hbar", h)?;
    }
    let mut warnings = Vec::new();
    let report = match &config.command {
        Command::Validate { input } => {
            let traj = load(input, config)?;
            json!({
                "ok": true,
                "n": traj.dim(),
                "samples": traj.len(),
                "hbar": traj.hbar(),
                "t_start": traj.times()[0],
                "t_end": traj.times()[traj.len() - 1],
                "spectral_drift": traj.spectral_drift(),
            })
        }
        Command::Classify { input, sample, cluster_tol } => {
            check_positive("cluster-tol", *cluster_tol)?;
            let traj = load(input, config)?;
            let state = traj
                .states()
                .get(*sample)
                .ok_or_else(|| Failure::usage(format!("--sample {sample} out of range for {} samples", traj.len())))?;
            let descriptor = classify(state, *cluster_tol);
            if descriptor.dimension != descriptor.formula_dimension {
                warnings.push(format!(
                    "orbit is neither generic nor pure: dimension {} differs from (n-1)(m+1) = {}",
                    descriptor.dimension, descriptor.formula_dimension
                ));
            }
            let mut value = serde_json::to_value(&descriptor).expect("descriptor serializes");
            value["sample"] = json!(sample);
            value["time"] = json!(traj.times()[*sample]);
            value
        }
        Command::Reconstruct { input, output, method, points, basepoint, csv } => {
            let traj = load(input, config)?;
            let mut scheme = Scheme::from(Method::from(*method));
            if let Some(p) = points {
                scheme = scheme.with_points(*p);
            }
            let opts = ReconstructOptions { basepoint: *basepoint, scheme, ..Default::default() };
            let rec = reconstruct(&traj, &opts).map_err(|e| Failure::invalid(format!("{}: {e}", input.display())))?;
            write_outputs(&rec.hamiltonian, output, csv.as_deref())?;
            warnings.extend(rec.hamiltonian.notes.iter().cloned());
            let singular = rec.chart.iter().filter(|z| z.is_none()).count();
            if singular > 0 {
                warnings.push(format!("{singular} samples lie outside the stereographic chart"));
            }
            json!({
                "ok": true,
                "output": path_str(output),
                "method": scheme.method.tag(),
                "points": scheme.points,
                "basepoint": basepoint,
                "samples": traj.len(),
                "orbit": rec.descriptor,
                "conjugation_residual": rec.conjugation_residual,
                "hermitize_residual_max": rec.hamiltonian.hermitize_residual_max(),
                "chart_singular_samples": singular,
            })
        }
        Command::Verify { trajectory, hamiltonian, tol, substeps, points } => {
            check_positive("tol", *tol)?;
            if *substeps == 0 {
                return Err(Failure::usage("--substeps must be at least 1"));
            }
            if *points < 2 {
                return Err(Failure::usage("--points must be at least 2"));
            }
            let traj = load(trajectory, config)?;
            let h = load_hamiltonian(hamiltonian, config)?;
            let opts = ResidualOptions { substeps: *substeps, points: *points };
            let report = residual_with(&traj, &h, &opts).map_err(|e| Failure::invalid(e.to_string()))?;
            let ok = report.max_residual <= *tol;
            let mut value = serde_json::to_value(&report).expect("report serializes");
            value["ok"] = json!(ok);
            value["tol"] = json!(tol);
            if !ok {
                return Err(Failure {
                    code: 1,
                    message: format!("max residual {:e} exceeds tolerance {tol:e}", report.max_residual),
                    report: Some(value),
                });
            }
            value
        }
        Command::Example { name, params, samples, t_max, output, reference } => {
            let mut ex = ParametricExample::by_name(name, params).map_err(|e| Failure::usage(e.to_string()))?;
            if let Some(h) = config.hbar {
                ex = ex.with_hbar(h);
            }
            if *samples < 2 {
                return Err(Failure::usage("--samples must be at least 2"));
            }
            let t_max = t_max.unwrap_or_else(|| ex.default_t_max());
            check_positive("t-max", t_max)?;
            let times = uniform_grid(*samples, t_max);
            let traj = ex.sample(&times);
            write_file(output, &write_trajectory(&traj))?;
            if let Some(path) = reference {
                let h = ex.reference_hamiltonians(&times).expect("built-in examples carry a reference Hamiltonian");
                write_file(path, &write_hamiltonian(&h))?;
            }
            let parameters: serde_json::Map<String, Value> =
                ex.parameters().iter().map(|(k, v)| (k.clone(), json!(v))).collect();
            json!({
                "ok": true,
                "example": ex.name(),
                "n": ex.n(),
                "hbar": ex.hbar(),
                "parameters": parameters,
                "samples": samples,
                "t_max": t_max,
                "output": path_str(output),
                "reference": reference.as_deref().map(path_str),
            })
        }
        Command::Gauge { trajectory, hamiltonian, seed, smoothness, output, csv } => {
            check_positive("smoothness", *smoothness)?;
            let traj = load(trajectory, config)?;
            let h = load_hamiltonian(hamiltonian, config)?;
            let scheme = h.method.map(Scheme::from).unwrap_or_default();
            let rec = reconstruct(&traj, &ReconstructOptions { scheme, ..Default::default() })
                .map_err(|e| Failure::invalid(format!("{}: {e}", trajectory.display())))?;
            let t0 = traj.times()[0];
            let v = sample_stabilizer_for(&rec.descriptor, traj.times(), t0, *seed, *smoothness);
            let (_, hv) = gauge_transform(&rec.path, &h, &v).map_err(|e| Failure::invalid(e.to_string()))?;
            write_outputs(&hv, output, csv.as_deref())?;
            let shift = hv.hamiltonians.iter().zip(&h.hamiltonians).map(|(a, b)| a.distance(b)).fold(0.0, f64::max);
            json!({
                "ok": true,
                "output": path_str(output),
                "seed": seed,
                "smoothness": smoothness,
                "blocks": v.blocks(),
                "max_shift": shift,
            })
        }
    };
    Ok((report, warnings))
}

fn emit(out: &mut dyn Write, value: &Value) {
    let text = serde_json::to_string_pretty(value).expect("reports serialize");
    let _ = writeln!(out, "{text}");
}

/// Runs a parsed configuration and returns the process exit status.
pub fn run(config: &RunConfig, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    match execute(config) {
        Ok((report, warnings)) => {
            for w in warnings {
                let _ = writeln!(err, "warning: {w}");
            }
            emit(out, &report);
            0
        }
        Err(failure) => {
            let _ = writeln!(err, "error: {}", failure.message);
            if let Some(report) = &failure.report {
                emit(out, report);
            }
            failure.code
        }
    }
}

/// Parses arguments (including the program name) and runs them.
pub fn run_args<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match RunConfig::try_parse_from(args) {
        Ok(config) => run(&config, out, err),
        Err(e) => {
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(err, "{text}");
                2
            } else {
                let _ = write!(out, "{text}");
                0
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (i32, String, String) {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = run_args(std::iter::once("hamrecon").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn params_parse_as_key_value() {
        assert_eq!(parse_param("omega=2.5").unwrap(), ("omega".to_string(), 2.5));
        assert_eq!(parse_param(" g = -1e-3").unwrap(), ("g".to_string(), -1e-3));
        assert!(parse_param("omega").is_err());
        assert!(parse_param("omega=fast").is_err());
    }

    #[test]
    fn method_flag_maps_to_library_method() {
        assert_eq!(Method::from(MethodArg::Central), Method::CentralDifference);
        assert_eq!(Method::from(MethodArg::Log), Method::UnitaryLog);
    }

    #[test]
    fn nonpositive_tolerances_are_usage_errors() {
        let (code, out, err) = run_capture(&["--density-tol", "0", "validate", "x.json"]);
        assert_eq!(code, 2);
        assert!(out.is_empty());
        assert!(err.contains("density-tol"));
    }

    #[test]
    fn unknown_example_parameter_is_rejected() {
        let (code, _, err) = run_capture(&["example", "qubit-mixed", "--param", "omega=1", "-o", "unused.json"]);
        assert_eq!(code, 2);
        assert!(err.contains("omega"));
    }

    #[test]
    fn version_goes_to_stdout() {
        let (code, out, _) = run_capture(&["--version"]);
        assert_eq!(code, 0);
        assert!(out.contains("hamrecon"));
    }
}
