//! Declarative runs behind the `quillen` binary.
//!
//! A run reads one JSON [`RunConfig`] (every field optional), computes, and
//! only then writes its artifacts into the output directory, each through a
//! temporary file and a rename. The summary echoes the fully defaulted
//! config; floats in summaries are rounded to 12 significant digits so that
//! identical configs give byte-identical files.

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::chern_calculus::verify::run_suite;
use crate::chern_calculus::ChernError;
use crate::energy::{k_energy_between, EnergyError};
use crate::flow_engine::{monotonicity_report, run_flow, FlowConfig, FlowError, FlowKind, FlowOutcome};
use crate::spectral_engine::{
    epstein_log_det, laplacian_spectrum, polyakov_log_det, torsion_variation_fd, torsion_variation_quadrature,
    zeta_log_det, SpectralError,
};
use crate::surface_model::{io, random_field, BandLimited, ConformalTorus, SurfaceError, TorusShape};

/// Environment variable overriding [`RunConfig::output`].
pub const OUTPUT_ENV: &str = "QUILLEN_OUTPUT";

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_ADMISSIBILITY: i32 = 3;
pub const EXIT_SOLVER: i32 = 4;
pub const EXIT_CHECK: i32 = 5;

/// Flat-torus determinant against the lattice oracle.
pub const DET_ORACLE_TOLERANCE: f64 = 1e-6;
/// Relative agreement of the torsion variation with its quadrature.
pub const TORSION_RELATIVE_TOLERANCE: f64 = 0.02;
/// Torsion variation at the flat metric.
pub const TORSION_FLAT_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("admissibility failure: {0}")]
    Admissibility(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("acceptance check failed: {0}")]
    Check(String),
    #[error("cannot write output: {0}")]
    Output(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Admissibility(_) => EXIT_ADMISSIBILITY,
            CliError::Solver(_) | CliError::Output(_) => EXIT_SOLVER,
            CliError::Check(_) => EXIT_CHECK,
        }
    }
}

impl From<SurfaceError> for CliError {
    fn from(e: SurfaceError) -> Self {
        match e {
            SurfaceError::NotAdmissible { .. } => CliError::Admissibility(e.to_string()),
            SurfaceError::BadModulus(_)
            | SurfaceError::BadResolution(_)
            | SurfaceError::FieldSize { .. }
            | SurfaceError::BandTooWide { .. }
            | SurfaceError::ShapeMismatch(_)
            | SurfaceError::AreaMismatch { .. }
            | SurfaceError::Format(_)
            | SurfaceError::Io(_) => CliError::Config(e.to_string()),
            _ => CliError::Solver(e.to_string()),
        }
    }
}

impl From<SpectralError> for CliError {
    fn from(e: SpectralError) -> Self {
        match e {
            SpectralError::Surface(s) => s.into(),
            SpectralError::NotAdmissible { .. } => CliError::Admissibility(e.to_string()),
            _ => CliError::Solver(e.to_string()),
        }
    }
}

impl From<EnergyError> for CliError {
    fn from(e: EnergyError) -> Self {
        match e {
            EnergyError::Surface(s) => s.into(),
            EnergyError::Inadmissible { .. } => CliError::Admissibility(e.to_string()),
            _ => CliError::Solver(e.to_string()),
        }
    }
}

impl From<FlowError> for CliError {
    fn from(e: FlowError) -> Self {
        match e {
            FlowError::Surface(s) => s.into(),
            FlowError::Spectral(s) => s.into(),
            FlowError::Energy(s) => s.into(),
            FlowError::Config(m) => CliError::Config(m),
            _ => CliError::Solver(e.to_string()),
        }
    }
}

impl From<ChernError> for CliError {
    fn from(e: ChernError) -> Self {
        match e {
            ChernError::OrderOutOfRange { .. } => CliError::Config(e.to_string()),
            _ => CliError::Solver(e.to_string()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Det,
    Flow,
    Kenergy,
    VerifyChern,
    TorsionVariation,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TorusConfig {
    pub tau_re: f64,
    pub tau_im: f64,
    #[serde(rename = "N")]
    pub n: usize,
}

impl Default for TorusConfig {
    fn default() -> Self {
        Self {
            tau_re: 0.0,
            tau_im: 1.0,
            n: 32,
        }
    }
}

impl TorusConfig {
    pub fn shape(&self) -> Result<TorusShape, CliError> {
        Ok(TorusShape::new(Complex64::new(self.tau_re, self.tau_im), self.n)?)
    }
}

/// Where a conformal factor (or potential direction) comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSource {
    Flat,
    File { path: PathBuf },
    Random { max_frequency: usize, amplitude: f64 },
}

impl FieldSource {
    /// Samples on `shape`; random fields consume `rng`.
    pub fn realize(&self, shape: TorusShape, rng: &mut ChaCha8Rng) -> Result<Vec<f64>, CliError> {
        match self {
            FieldSource::Flat => Ok(vec![0.0; shape.len()]),
            FieldSource::File { path } => {
                if !path.exists() {
                    return Err(CliError::Config(format!("field file {} does not exist", path.display())));
                }
                let (file_shape, field) = io::read_field(path)?;
                if file_shape != shape {
                    return Err(CliError::Config(format!(
                        "field file {} does not match the configured torus",
                        path.display()
                    )));
                }
                Ok(field)
            }
            FieldSource::Random {
                max_frequency,
                amplitude,
            } => Ok(random_field(shape, BandLimited::new(*max_frequency, *amplitude), rng)?),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChernConfig {
    pub n: usize,
    pub trials: usize,
}

impl Default for ChernConfig {
    fn default() -> Self {
        Self { n: 2, trials: 100 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KEnergyConfig {
    /// Conformal factor of the second endpoint (the first is `field_source`).
    pub target: FieldSource,
}

impl Default for KEnergyConfig {
    fn default() -> Self {
        Self {
            target: FieldSource::Flat,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TorsionConfig {
    /// Potential direction `ψ`.
    pub direction: FieldSource,
    /// Finite-difference step in `u`.
    pub h: f64,
}

impl Default for TorsionConfig {
    fn default() -> Self {
        Self {
            direction: FieldSource::Random {
                max_frequency: 3,
                amplitude: 0.01,
            },
            h: 2.5e-3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: Option<Command>,
    pub torus: TorusConfig,
    pub seed: u64,
    pub field_source: FieldSource,
    pub output: PathBuf,
    pub flow: FlowConfig,
    pub chern: ChernConfig,
    pub kenergy: KEnergyConfig,
    pub torsion: TorsionConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: None,
            torus: TorusConfig::default(),
            seed: 0,
            field_source: FieldSource::Flat,
            output: PathBuf::from("quillen-out"),
            flow: FlowConfig::default(),
            chern: ChernConfig::default(),
            kenergy: KEnergyConfig::default(),
            torsion: TorsionConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Checks everything that can be checked before any computation.
    pub fn validate(&self) -> Result<Command, CliError> {
        let command = self
            .command
            .ok_or_else(|| CliError::Config("no command given".into()))?;
        self.torus.shape()?;
        if command == Command::Flow {
            self.flow.validate()?;
        }
        if command == Command::TorsionVariation && !(self.torsion.h > 0.0) {
            return Err(CliError::Config("torsion.h must be positive".into()));
        }
        for source in [&self.field_source, &self.kenergy.target, &self.torsion.direction] {
            if let FieldSource::File { path } = source {
                if !path.exists() {
                    return Err(CliError::Config(format!("field file {} does not exist", path.display())));
                }
            }
        }
        Ok(command)
    }
}

/// An artifact to be written once the run has succeeded.
#[derive(Clone, Debug, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunOutput {
    pub summary: Value,
    pub artifacts: Vec<Artifact>,
}

/// Rounds every float to 12 significant digits.
pub fn fixed_precision(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().unwrap_or(f64::NAN);
            let rounded: f64 = format!("{x:.11e}").parse().unwrap_or(x);
            serde_json::Number::from_f64(rounded).map_or(Value::Null, Value::Number)
        }
        Value::Array(a) => Value::Array(a.into_iter().map(fixed_precision).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, fixed_precision(v))).collect()),
        other => other,
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializable")
}

fn field_artifact(name: &str, shape: TorusShape, field: &[f64]) -> Result<Artifact, CliError> {
    let mut bytes = Vec::new();
    io::write_binary(&mut bytes, shape, field)?;
    Ok(Artifact {
        name: name.to_string(),
        bytes,
    })
}

fn tau_json(shape: TorusShape) -> Value {
    json!([shape.tau().re, shape.tau().im])
}

fn run_det(cfg: &RunConfig, rng: &mut ChaCha8Rng) -> Result<(Value, Vec<Artifact>), CliError> {
    let shape = cfg.torus.shape()?;
    let phi = cfg.field_source.realize(shape, rng)?;
    let m = ConformalTorus::new(shape, phi)?;
    let spec = laplacian_spectrum(&m)?;
    let z = zeta_log_det(&spec);
    let flat = m.phi().iter().all(|v| *v == m.phi()[0]);
    let oracle = if flat {
        epstein_log_det(shape.tau(), m.area())
    } else {
        polyakov_log_det(&m)
    };
    let diff = (z.log_det - oracle.log_det).abs();
    let result = json!({
        "metric_id": m.metric_id(),
        "method": z.method,
        "log_det": z.log_det,
        "error_estimate": z.error_estimate,
        "kernel_dim": spec.kernel_dim,
        "N": shape.n(),
        "tau": tau_json(shape),
    });
    let summary = json!({
        "result": result,
        "oracle": { "method": oracle.method, "log_det": oracle.log_det, "difference": diff },
        "certification_residual": spec.residual,
    });
    if flat && diff > DET_ORACLE_TOLERANCE {
        return Err(CliError::Check(format!(
            "flat determinant differs from the lattice oracle by {diff:.3e}"
        )));
    }
    Ok((summary, vec![field_artifact("phi.bin", shape, m.phi())?]))
}

fn run_flow_command(cfg: &RunConfig, rng: &mut ChaCha8Rng) -> Result<(Value, Vec<Artifact>), CliError> {
    let shape = cfg.torus.shape()?;
    let m0 = ConformalTorus::new(shape, cfg.field_source.realize(shape, rng)?)?;
    let trace = run_flow(&m0, None, &cfg.flow)?;
    if let FlowOutcome::AdmissibilityLost { t, min } = trace.outcome {
        return Err(CliError::Admissibility(format!(
            "potential left the admissible set at t = {t:.6e} (min {min:.3e})"
        )));
    }
    if let FlowOutcome::StepCollapse { t, dt } = trace.outcome {
        return Err(CliError::Solver(format!("step size collapsed to {dt:.3e} at t = {t:.6e}")));
    }
    let report = if cfg.flow.kind != FlowKind::QlGradient && trace.samples.iter().any(|s| s.log_det.is_some()) {
        Some(monotonicity_report(&trace, 1e-6)?)
    } else {
        None
    };
    let mut csv = Vec::new();
    trace.write_csv(&mut csv)?;
    let summary = json!({
        "outcome": trace.outcome,
        "accepted_steps": trace.accepted_steps,
        "rejected_steps": trace.rejected_steps,
        "initial_metric_id": m0.metric_id(),
        "terminal_metric_id": trace.terminal.metric_id(),
        "final_sample": trace.final_sample(),
        "monotonicity": report,
    });
    let artifacts = vec![
        Artifact {
            name: "trace.csv".into(),
            bytes: csv,
        },
        field_artifact("phi0.bin", shape, m0.phi())?,
        field_artifact("terminal.bin", shape, trace.terminal.phi())?,
    ];
    Ok((summary, artifacts))
}

fn run_kenergy(cfg: &RunConfig, rng: &mut ChaCha8Rng) -> Result<(Value, Vec<Artifact>), CliError> {
    let shape = cfg.torus.shape()?;
    let g1 = ConformalTorus::new(shape, cfg.field_source.realize(shape, rng)?)?;
    let g2 = ConformalTorus::new(shape, cfg.kenergy.target.realize(shape, rng)?)?;
    // Endpoints are conformal factors; the second is rescaled into the class of the first.
    let g2 = g2.with_area(g1.area());
    let k = k_energy_between(&g1, &g2)?;
    let summary = json!({
        "value": k.value,
        "quadrature_error": k.quadrature_error,
        "c_n": k.c_n,
        "start_metric_id": g1.metric_id(),
        "end_metric_id": g2.metric_id(),
    });
    Ok((summary, Vec::new()))
}

fn run_verify_chern(cfg: &RunConfig) -> Result<(Value, Vec<Artifact>), CliError> {
    let report = run_suite(cfg.chern.n, cfg.chern.trials, cfg.seed)?;
    if !report.passes() {
        return Err(CliError::Check(format!("{:?}", report.max_residuals)));
    }
    Ok((json!({ "report": report }), Vec::new()))
}

fn run_torsion(cfg: &RunConfig, rng: &mut ChaCha8Rng) -> Result<(Value, Vec<Artifact>), CliError> {
    let shape = cfg.torus.shape()?;
    let m = ConformalTorus::new(shape, cfg.field_source.realize(shape, rng)?)?;
    let psi = cfg.torsion.direction.realize(shape, rng)?;
    let fd = torsion_variation_fd(&m, &psi, cfg.torsion.h)?;
    let quad = torsion_variation_quadrature(&m, &psi)?;
    let flat = m.phi().iter().all(|v| *v == m.phi()[0]);
    let relative = (fd - quad).abs() / quad.abs().max(f64::MIN_POSITIVE);
    let summary = json!({
        "metric_id": m.metric_id(),
        "fd": fd,
        "quadrature": quad,
        "relative_error": if flat { Value::Null } else { json!(relative) },
        "flat": flat,
    });
    let failed = if flat {
        fd.abs() >= TORSION_FLAT_TOLERANCE
    } else {
        relative >= TORSION_RELATIVE_TOLERANCE
    };
    if failed {
        return Err(CliError::Check(format!("torsion variation fd {fd:.6e} vs quadrature {quad:.6e}")));
    }
    Ok((summary, vec![field_artifact("direction.bin", shape, &psi)?]))
}

/// Validates and computes; nothing touches the file system except reading
/// configured field files.
pub fn execute(cfg: &RunConfig) -> Result<RunOutput, CliError> {
    let command = cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (body, mut artifacts) = match command {
        Command::Det => run_det(cfg, &mut rng)?,
        Command::Flow => run_flow_command(cfg, &mut rng)?,
        Command::Kenergy => run_kenergy(cfg, &mut rng)?,
        Command::VerifyChern => run_verify_chern(cfg)?,
        Command::TorsionVariation => run_torsion(cfg, &mut rng)?,
    };
    let summary = fixed_precision(json!({
        "command": command,
        "config": to_value(cfg),
        "summary": body,
    }));
    let mut text = serde_json::to_string_pretty(&summary).expect("json value");
    text.push('\n');
    artifacts.push(Artifact {
        name: "summary.json".into(),
        bytes: text.into_bytes(),
    });
    Ok(RunOutput { summary, artifacts })
}

/// Writes `bytes` to `path` through a sibling temporary file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let file_name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = path.with_file_name(format!(".{file_name}.tmp-{}", std::process::id()));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })
}

/// Output directory after the environment override.
pub fn output_dir(cfg: &RunConfig) -> PathBuf {
    match std::env::var_os(OUTPUT_ENV) {
        Some(dir) if !dir.is_empty() => PathBuf::from(dir),
        _ => cfg.output.clone(),
    }
}

/// Full run: compute, then write every artifact atomically into `out`.
pub fn run(cfg: &RunConfig, out: &Path) -> Result<RunOutput, CliError> {
    let output = execute(cfg)?;
    fs::create_dir_all(out)?;
    for a in &output.artifacts {
        write_atomic(&out.join(&a.name), &a.bytes)?;
    }
    Ok(output)
}
