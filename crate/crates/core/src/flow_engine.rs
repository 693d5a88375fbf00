//! Normalized Ricci flow (conformal and potential forms) and the `Q_L`
//! gradient flow on a conformal torus, with monitored functionals.
//!
//! * Ricci, conformal: `∂φ/∂t = (s₀ − s)/2`.
//! * Ricci, potential: `e^{2φ} = e^{2φ₀} − Δ₀u`, `Δ_t u̇ = s − s₀`, `u̇` mean zero.
//! * `Q_L` gradient: `e^{2φ} = e^{2φ₀} − Δ₀ψ`, `∂ψ/∂t = s − s₀`.
//!
//! The principal part (`−e^{−2φ}Δ₀` for the Ricci flows, `−e^{−4φ}Δ₀²`
//! for `Q_L`) with its coefficient frozen per step is integrated exactly
//! (Lawson integrating factor).
//!
//! All three are advanced by the Dormand–Prince 5(4) pair with adaptive
//! steps; the running integral `∫₀ᵗ ∫ (s − s₀)² dv dt` is carried as an
//! extra ODE component.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::energy::{c_one, k_energy_from_flat, EnergyError};
use crate::spectral_engine::{spectrum_at, zeta_log_det, SpectralError};
use crate::surface_model::{ConformalTorus, SurfaceError};

#[derive(Debug, Error)]
pub enum FlowError {
    #[error(transparent)]
    Surface(#[from] SurfaceError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error("invalid flow configuration: {0}")]
    Config(String),
    #[error("trace has no log det samples")]
    MissingLogDet,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowKind {
    RicciConformal,
    RicciPotential,
    #[serde(rename = "qL_gradient")]
    QlGradient,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowConfig {
    pub kind: FlowKind,
    /// Initial step.
    pub dt: f64,
    pub t_end: f64,
    /// Time between recorded samples.
    pub record_interval: f64,
    /// Convergence threshold on `sup |s − s₀|`.
    pub curvature_sup: f64,
    pub rtol: f64,
    pub atol: f64,
    pub step_safety: f64,
    /// Steps below this abort the run.
    pub min_dt: f64,
    pub max_steps: usize,
    /// Times at which `log det Δ` is recorded (forced sample points).
    pub det_times: Vec<f64>,
    pub det_resolution: usize,
    /// Record the K-energy relative to the flat metric of the class.
    pub track_k_energy: bool,
    /// Potential flows stop once `min(1 − Δψ)` drops to this value.
    pub admissibility_floor: f64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            kind: FlowKind::RicciConformal,
            dt: 1e-5,
            t_end: 5.0,
            record_interval: 0.01,
            curvature_sup: 1e-6,
            rtol: 1e-8,
            atol: 1e-10,
            step_safety: 0.9,
            min_dt: 1e-14,
            max_steps: 2_000_000,
            det_times: Vec::new(),
            det_resolution: crate::spectral_engine::DET_RESOLUTION,
            track_k_energy: false,
            admissibility_floor: 0.0,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<(), FlowError> {
        let bad = |m: &str| Err(FlowError::Config(m.to_string()));
        if !(self.dt > 0.0) {
            return bad("dt must be positive");
        }
        if !(self.t_end > 0.0) {
            return bad("t_end must be positive");
        }
        if !(self.record_interval > 0.0) {
            return bad("record_interval must be positive");
        }
        if !(self.rtol > 0.0 && self.atol > 0.0) {
            return bad("tolerances must be positive");
        }
        if !(self.step_safety > 0.0 && self.step_safety < 1.0) {
            return bad("step_safety must lie in (0, 1)");
        }
        if self.det_times.iter().any(|t| !(*t >= 0.0)) {
            return bad("det_times must be nonnegative");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowSample {
    pub t: f64,
    pub sup_s_dev: f64,
    /// `∫ (s − s₀)² dv`.
    pub l2_s_dev_sq: f64,
    pub area: f64,
    /// `∫₀ᵗ ∫ (s − s₀)² dv dt`.
    pub cumulative_l2: f64,
    pub log_det: Option<f64>,
    pub log_det_error: Option<f64>,
    pub k_energy: Option<f64>,
    pub k_energy_error: Option<f64>,
    /// `min(1 − Δψ)` relative to the initial metric (potential flows).
    pub admissibility: Option<f64>,
    /// `|∫ u̇ Δ_t u̇ dv − ∫ (s − s₀) u̇ dv|` (Ricci potential flow).
    pub identity_residual: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum FlowOutcome {
    Converged { t: f64 },
    ReachedHorizon { t: f64 },
    AdmissibilityLost { t: f64, min: f64 },
    StepCollapse { t: f64, dt: f64 },
}

#[derive(Clone, Debug)]
pub struct FlowTrace {
    pub kind: FlowKind,
    pub samples: Vec<FlowSample>,
    pub terminal: ConformalTorus,
    /// Potential relative to the initial metric, for potential flows.
    pub terminal_potential: Option<Vec<f64>>,
    pub outcome: FlowOutcome,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

impl FlowTrace {
    /// CSV with columns `t, sup_s_dev, l2_s_dev_sq, area, log_det, k_energy`;
    /// absent channels are left empty.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,sup_s_dev,l2_s_dev_sq,area,log_det,k_energy")?;
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.12e}")).unwrap_or_default();
        for s in &self.samples {
            writeln!(
                w,
                "{:.12e},{:.12e},{:.12e},{:.12e},{},{}",
                s.t,
                s.sup_s_dev,
                s.l2_s_dev_sq,
                s.area,
                opt(s.log_det),
                opt(s.k_energy)
            )?;
        }
        Ok(())
    }

    pub fn final_sample(&self) -> &FlowSample {
        self.samples.last().expect("traces hold at least the initial sample")
    }
}

const DP_C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const DP_B: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const DP_B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Right-hand side evaluation: field derivative (without the linear part
/// handled by the integrating factor) and the auxiliary `∫(s − s₀)² dv`.
struct Rhs {
    field: Vec<f64>,
    aux: f64,
}

enum StageError {
    Inadmissible(f64),
    Fatal(FlowError),
}

impl From<SurfaceError> for StageError {
    fn from(e: SurfaceError) -> Self {
        StageError::Fatal(e.into())
    }
}

struct Problem {
    kind: FlowKind,
    m0: ConformalTorus,
    density0: Vec<f64>,
    /// The linear part is `k · Δ₀^power`; `k` is refreshed every step.
    power: i32,
}

impl Problem {
    fn new(kind: FlowKind, m0: &ConformalTorus) -> Self {
        let power = if kind == FlowKind::QlGradient { 2 } else { 1 };
        Self {
            kind,
            m0: m0.clone(),
            density0: m0.density(),
            power,
        }
    }

    fn initial_state(&self) -> Vec<f64> {
        match self.kind {
            FlowKind::RicciConformal => self.m0.phi().to_vec(),
            _ => vec![0.0; self.m0.shape().len()],
        }
    }

    /// `min(1 − Δ_{m₀} y)` for potential states.
    fn admissibility(&self, y: &[f64]) -> Result<f64, SurfaceError> {
        crate::surface_model::admissibility_min(&self.m0, y)
    }

    fn metric(&self, y: &[f64]) -> Result<ConformalTorus, StageError> {
        match self.kind {
            FlowKind::RicciConformal => Ok(ConformalTorus::new(self.m0.shape(), y.to_vec())?),
            _ => {
                let lap = self.m0.grid().laplacian(y)?;
                let mut phi = Vec::with_capacity(y.len());
                let mut min = f64::INFINITY;
                for (d, l) in self.density0.iter().zip(&lap) {
                    let rho = d - l;
                    min = min.min(rho / d);
                    phi.push(0.5 * rho.ln());
                }
                if !(min > 0.0) {
                    return Err(StageError::Inadmissible(min));
                }
                Ok(ConformalTorus::new(self.m0.shape(), phi)?)
            }
        }
    }

    /// `min e^{−2·power·φ}` over the grid: the frozen coefficient bounds the
    /// local one from below, so the explicit remainder stays dissipative.
    /// It tends to the flat value `e^{−2·power·c}` as the flow converges.
    fn linear_coefficient(&self, y: &[f64]) -> Result<f64, StageError> {
        let m = self.metric(y)?;
        let max_density = m.density().iter().fold(0.0f64, |a, v| a.max(*v));
        Ok(max_density.powi(-self.power))
    }

    fn rhs(&self, y: &[f64], k: f64) -> Result<Rhs, StageError> {
        let m = self.metric(y)?;
        let s = m.scalar_curvature();
        let s0 = m.s0();
        let dev: Vec<f64> = s.iter().map(|v| v - s0).collect();
        let sq: Vec<f64> = dev.iter().map(|v| v * v).collect();
        let aux = m.integrate(&sq)?;
        let mut field: Vec<f64> = match self.kind {
            FlowKind::RicciConformal => dev.iter().map(|v| -0.5 * v).collect(),
            FlowKind::RicciPotential => potential_velocity(&m, &dev, &self.density0)?,
            FlowKind::QlGradient => dev,
        };
        let power = self.power;
        let lin = m.grid().apply_multiplier(y, |l| l.powi(power))?;
        for (f, l) in field.iter_mut().zip(&lin) {
            *f += k * l;
        }
        Ok(Rhs { field, aux })
    }

    /// `e^{−τ·k·Δ₀^power} v`.
    fn propagate(&self, v: &[f64], tau: f64, k: f64) -> Result<Vec<f64>, SurfaceError> {
        if tau == 0.0 {
            return Ok(v.to_vec());
        }
        let p = self.power;
        self.m0.grid().apply_multiplier(v, |l| (-tau * k * l.powi(p)).exp())
    }

    fn gauge(&self, y: &mut [f64]) {
        if self.kind == FlowKind::RicciConformal {
            return;
        }
        let total: f64 = y.iter().zip(&self.density0).map(|(v, d)| v * d).sum();
        let mass: f64 = self.density0.iter().sum();
        let mean = total / mass;
        y.iter_mut().for_each(|v| *v -= mean);
    }
}

/// Mean-zero (against `dv₀`) solution of `Δ₀ u̇ = e^{2φ}(s − s₀)`.
fn potential_velocity(m: &ConformalTorus, dev: &[f64], density0: &[f64]) -> Result<Vec<f64>, SurfaceError> {
    let rhs: Vec<f64> = dev.iter().zip(m.density()).map(|(d, w)| d * w).collect();
    let mut v = m.grid().solve_poisson(&rhs, 1e-9)?;
    let total: f64 = v.iter().zip(density0).map(|(a, d)| a * d).sum();
    let mean = total / density0.iter().sum::<f64>();
    v.iter_mut().for_each(|a| *a -= mean);
    Ok(v)
}

struct StepResult {
    y: Vec<f64>,
    aux: f64,
    err: f64,
}

fn dp_step(p: &Problem, y: &[f64], h: f64, atol: f64, rtol: f64) -> Result<StepResult, StageError> {
    let lin = p.linear_coefficient(y)?;
    let mut ks: Vec<Rhs> = Vec::with_capacity(7);
    let mut aux_stage = 0.0;
    for i in 0..7 {
        let mut stage = p.propagate(y, DP_C[i] * h, lin)?;
        for (j, k) in ks.iter().enumerate() {
            let a = DP_A[i][j];
            if a == 0.0 {
                continue;
            }
            let prop = p.propagate(&k.field, (DP_C[i] - DP_C[j]) * h, lin)?;
            for (s, f) in stage.iter_mut().zip(&prop) {
                *s += h * a * f;
            }
        }
        if i == 6 {
            // FSAL stage equals the fifth-order solution; reuse its value.
            aux_stage = ks.iter().zip(DP_B).map(|(k, b)| b * k.aux).sum::<f64>();
        }
        ks.push(p.rhs(&stage, lin)?);
    }
    let mut y_new = p.propagate(y, h, lin)?;
    let mut err_vec = vec![0.0; y.len()];
    for (j, k) in ks.iter().enumerate() {
        let prop = p.propagate(&k.field, (1.0 - DP_C[j]) * h, lin)?;
        for idx in 0..y.len() {
            y_new[idx] += h * DP_B[j] * prop[idx];
            err_vec[idx] += h * (DP_B[j] - DP_B4[j]) * prop[idx];
        }
    }
    let aux_err: f64 = ks.iter().enumerate().map(|(j, k)| h * (DP_B[j] - DP_B4[j]) * k.aux).sum();
    let aux = h * aux_stage;
    // Errors are measured after `1 + kΔ₀^power`, i.e. on the curvature
    // scale; small high modes of the state carry large curvature.
    let pw = p.power;
    let weight = |v: &[f64]| p.m0.grid().apply_multiplier(v, |l| 1.0 + lin * l.powi(pw));
    let (err_w, y_w, new_w) = (weight(&err_vec)?, weight(y)?, weight(&y_new)?);
    let mut err = 0.0f64;
    for idx in 0..y.len() {
        let scale = atol + rtol * y_w[idx].abs().max(new_w[idx].abs());
        err = err.max(err_w[idx].abs() / scale);
    }
    err = err.max(aux_err.abs() / (atol + rtol * aux.abs()));
    Ok(StepResult { y: y_new, aux, err })
}

fn record(
    p: &Problem,
    cfg: &FlowConfig,
    t: f64,
    y: &[f64],
    cumulative: f64,
    with_det: bool,
) -> Result<FlowSample, FlowError> {
    let m = match p.metric(y) {
        Ok(m) => m,
        Err(StageError::Fatal(e)) => return Err(e),
        Err(StageError::Inadmissible(min)) => {
            return Err(FlowError::Config(format!("recording an inadmissible state (min {min:.3e})")))
        }
    };
    let (log_det, log_det_error) = if with_det {
        let z = zeta_log_det(&spectrum_at(&m, cfg.det_resolution)?);
        (Some(z.log_det), Some(z.error_estimate))
    } else {
        (None, None)
    };
    let (k_energy, k_energy_error) = if cfg.track_k_energy {
        let k = k_energy_from_flat(&m)?;
        (Some(k.value), Some(k.quadrature_error))
    } else {
        (None, None)
    };
    let admissibility = match p.kind {
        FlowKind::RicciConformal => None,
        _ => Some(p.admissibility(y)?),
    };
    let identity_residual = if p.kind == FlowKind::RicciPotential {
        let s0 = m.s0();
        let dev: Vec<f64> = m.scalar_curvature().iter().map(|s| s - s0).collect();
        let udot = potential_velocity(&m, &dev, &p.density0)?;
        let lap = m.laplacian(&udot)?;
        let lhs: Vec<f64> = udot.iter().zip(&lap).map(|(a, b)| a * b).collect();
        let rhs: Vec<f64> = udot.iter().zip(&dev).map(|(a, b)| a * b).collect();
        Some((m.integrate(&lhs)? - m.integrate(&rhs)?).abs())
    } else {
        None
    };
    Ok(FlowSample {
        t,
        sup_s_dev: m.sup_curvature_deviation(),
        l2_s_dev_sq: m.curvature_deviation_sq(),
        area: m.area(),
        cumulative_l2: cumulative,
        log_det,
        log_det_error,
        k_energy,
        k_energy_error,
        admissibility,
        identity_residual,
    })
}

fn terminal_metric(p: &Problem, y: &[f64]) -> Result<ConformalTorus, FlowError> {
    match p.metric(y) {
        Ok(m) => Ok(m),
        Err(StageError::Fatal(e)) => Err(e),
        // Only reachable for an initial potential outside the positive cone.
        Err(StageError::Inadmissible(_)) => Ok(p.m0.clone()),
    }
}

/// Integrates the flow selected by `cfg.kind` from `m0`; potential flows
/// start from `psi0` relative to `m0` (zero when `None`).
pub fn run_flow(m0: &ConformalTorus, psi0: Option<&[f64]>, cfg: &FlowConfig) -> Result<FlowTrace, FlowError> {
    cfg.validate()?;
    let p = Problem::new(cfg.kind, m0);
    let mut y = match (cfg.kind, psi0) {
        (FlowKind::RicciConformal, Some(_)) => {
            return Err(FlowError::Config("the conformal Ricci flow takes no potential".into()))
        }
        (_, Some(psi)) => {
            if psi.len() != m0.shape().len() {
                return Err(SurfaceError::FieldSize {
                    expected: m0.shape().len(),
                    got: psi.len(),
                }
                .into());
            }
            psi.to_vec()
        }
        (_, None) => p.initial_state(),
    };
    let mut det_times: Vec<f64> = cfg.det_times.iter().copied().filter(|t| *t <= cfg.t_end).collect();
    det_times.sort_by(|a, b| a.total_cmp(b));
    det_times.dedup();

    let finish = |samples, y: Vec<f64>, outcome, acc, rej| -> Result<FlowTrace, FlowError> {
        let terminal = terminal_metric(&p, &y)?;
        Ok(FlowTrace {
            kind: cfg.kind,
            samples,
            terminal,
            terminal_potential: (cfg.kind != FlowKind::RicciConformal).then_some(y),
            outcome,
            accepted_steps: acc,
            rejected_steps: rej,
        })
    };

    if cfg.kind != FlowKind::RicciConformal {
        let min = p.admissibility(&y)?;
        if !(min > cfg.admissibility_floor) {
            return finish(Vec::new(), y, FlowOutcome::AdmissibilityLost { t: 0.0, min }, 0, 0);
        }
    }

    let mut t = 0.0;
    let mut cumulative = 0.0;
    let mut det_idx = 0;
    let at_det = |t: f64, idx: usize| idx < det_times.len() && (det_times[idx] - t).abs() <= 1e-12 * (1.0 + t);
    let with_det = at_det(0.0, det_idx);
    if with_det {
        det_idx += 1;
    }
    let mut samples = vec![record(&p, cfg, 0.0, &y, 0.0, with_det)?];
    if samples[0].sup_s_dev < cfg.curvature_sup {
        return finish(samples, y, FlowOutcome::Converged { t: 0.0 }, 0, 0);
    }
    let mut next_record = cfg.record_interval;
    let mut h = cfg.dt;
    let (mut accepted, mut rejected) = (0usize, 0usize);
    // Set while stages keep leaving the positive cone.
    let mut lost_positivity: Option<f64> = None;
    loop {
        let target = next_record
            .min(cfg.t_end)
            .min(det_times.get(det_idx).copied().unwrap_or(f64::INFINITY));
        let mut landing = false;
        if t + h >= target - 1e-14 * (1.0 + t) {
            h = target - t;
            landing = true;
        }
        if h < cfg.min_dt {
            let outcome = match lost_positivity {
                Some(min) => FlowOutcome::AdmissibilityLost { t, min },
                None => FlowOutcome::StepCollapse { t, dt: h },
            };
            return finish(samples, y, outcome, accepted, rejected);
        }
        if accepted + rejected >= cfg.max_steps {
            return finish(samples, y, FlowOutcome::StepCollapse { t, dt: h }, accepted, rejected);
        }
        match dp_step(&p, &y, h, cfg.atol, cfg.rtol) {
            Err(StageError::Fatal(e)) => return Err(e),
            Err(StageError::Inadmissible(min)) => {
                rejected += 1;
                lost_positivity = Some(min);
                h *= 0.25;
                continue;
            }
            Ok(step) if step.err > 1.0 || !step.err.is_finite() => {
                rejected += 1;
                let f = if step.err.is_finite() {
                    (cfg.step_safety * step.err.powf(-0.2)).max(0.2)
                } else {
                    0.2
                };
                h *= f;
            }
            Ok(step) => {
                accepted += 1;
                lost_positivity = None;
                t = if landing { target } else { t + h };
                y = step.y;
                p.gauge(&mut y);
                cumulative += step.aux;
                let grow = if step.err == 0.0 {
                    5.0
                } else {
                    (cfg.step_safety * step.err.powf(-0.2)).clamp(0.2, 5.0)
                };
                let h_next = h * grow;

                if cfg.kind != FlowKind::RicciConformal {
                    let min = p.admissibility(&y)?;
                    if !(min > cfg.admissibility_floor) {
                        samples.push(record(&p, cfg, t, &y, cumulative, false).unwrap_or_else(|_| {
                            let mut s = samples.last().expect("initial sample").clone();
                            s.t = t;
                            s.admissibility = Some(min);
                            s
                        }));
                        return finish(samples, y, FlowOutcome::AdmissibilityLost { t, min }, accepted, rejected);
                    }
                }
                let m = p.metric(&y).map_err(|e| match e {
                    StageError::Fatal(f) => f,
                    StageError::Inadmissible(min) => FlowError::Config(format!("inadmissible state {min}")),
                })?;
                let converged = m.sup_curvature_deviation() < cfg.curvature_sup;
                let hit_record = landing && (target == next_record || target == cfg.t_end);
                let hit_det = at_det(t, det_idx);
                if hit_det {
                    det_idx += 1;
                }
                if hit_record || hit_det || converged || t >= cfg.t_end {
                    samples.push(record(&p, cfg, t, &y, cumulative, hit_det)?);
                }
                if landing && target == next_record {
                    next_record += cfg.record_interval;
                }
                if converged {
                    return finish(samples, y, FlowOutcome::Converged { t }, accepted, rejected);
                }
                if t >= cfg.t_end {
                    return finish(samples, y, FlowOutcome::ReachedHorizon { t }, accepted, rejected);
                }
                // Keep the controller's step when a landing shortened it.
                h = if landing { h_next.max(cfg.dt.min(h_next)) } else { h_next };
            }
        }
    }
}

pub fn ricci_flow(m0: &ConformalTorus, cfg: &FlowConfig) -> Result<FlowTrace, FlowError> {
    let cfg = FlowConfig {
        kind: FlowKind::RicciConformal,
        ..cfg.clone()
    };
    run_flow(m0, None, &cfg)
}

pub fn ricci_flow_potential(m0: &ConformalTorus, cfg: &FlowConfig) -> Result<FlowTrace, FlowError> {
    let cfg = FlowConfig {
        kind: FlowKind::RicciPotential,
        ..cfg.clone()
    };
    run_flow(m0, None, &cfg)
}

#[allow(non_snake_case)]
pub fn qL_gradient_flow(m0: &ConformalTorus, cfg: &FlowConfig) -> Result<FlowTrace, FlowError> {
    let cfg = FlowConfig {
        kind: FlowKind::QlGradient,
        ..cfg.clone()
    };
    run_flow(m0, None, &cfg)
}

/// Least-squares fit `log y = a + b t`; returns `(b, R²)`.
pub fn exponential_fit(ts: &[f64], ys: &[f64]) -> (f64, f64) {
    let pts: Vec<(f64, f64)> = ts
        .iter()
        .zip(ys)
        .filter(|(_, y)| **y > 0.0)
        .map(|(t, y)| (*t, y.ln()))
        .collect();
    let n = pts.len() as f64;
    if pts.len() < 3 {
        return (f64::NAN, f64::NAN);
    }
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let stt: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let sty: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let b = sty / stt;
    let r2 = if syy == 0.0 { 1.0 } else { sty * sty / (stt * syy) };
    (b, r2)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    /// Samples where `∫(s − s₀)²` grew by more than the tolerance.
    pub l2_violations: usize,
    /// Consecutive det samples where `log det` fell by more than the tolerance.
    pub log_det_violations: usize,
    pub det_samples: usize,
    /// `log det(t_last) − log det(t_first)` over the det samples.
    pub delta_log_det: f64,
    /// `(1/24π) ∫∫ (s − s₀)² dv dt` over the same window.
    pub predicted_delta_log_det: f64,
    pub relative_error: f64,
    /// `log T₀` moves by half of `log det` (`2 log T₀ = log det + log 2`).
    pub delta_log_t0: f64,
    /// Tail fit of `log sup|s − s₀|` against `t`.
    pub decay_rate: f64,
    pub r_squared: f64,
}

/// Checks the recorded channels of a Ricci flow trace: `∫(s − s₀)²`
/// nonincreasing, `log det Δ` nondecreasing and equal in total to
/// `(1/24π) ∫∫ (s − s₀)²`, and exponential decay of `sup|s − s₀|`.
/// `det_tolerance` absorbs the determinant engine error.
pub fn monotonicity_report(trace: &FlowTrace, det_tolerance: f64) -> Result<MonotonicityReport, FlowError> {
    let dets: Vec<&FlowSample> = trace.samples.iter().filter(|s| s.log_det.is_some()).collect();
    if dets.is_empty() {
        return Err(FlowError::MissingLogDet);
    }
    let l2_violations = trace
        .samples
        .windows(2)
        .filter(|w| w[1].l2_s_dev_sq > w[0].l2_s_dev_sq * (1.0 + 1e-9) + 1e-14)
        .count();
    let log_det_violations = dets
        .windows(2)
        .filter(|w| w[1].log_det.unwrap_or(0.0) < w[0].log_det.unwrap_or(0.0) - det_tolerance)
        .count();
    let first = dets[0];
    let last = dets[dets.len() - 1];
    let delta = last.log_det.unwrap_or(0.0) - first.log_det.unwrap_or(0.0);
    let predicted = (last.cumulative_l2 - first.cumulative_l2) / (24.0 * PI);
    let relative_error = if predicted == 0.0 && delta == 0.0 {
        0.0
    } else {
        (delta - predicted).abs() / predicted.abs().max(delta.abs())
    };

    let t_end = trace.final_sample().t;
    let tail: Vec<&FlowSample> = trace.samples.iter().filter(|s| s.t >= 0.5 * t_end).collect();
    let ts: Vec<f64> = tail.iter().map(|s| s.t).collect();
    let ys: Vec<f64> = tail.iter().map(|s| s.sup_s_dev).collect();
    let (decay_rate, r_squared) = exponential_fit(&ts, &ys);
    Ok(MonotonicityReport {
        l2_violations,
        log_det_violations,
        det_samples: dets.len(),
        delta_log_det: delta,
        predicted_delta_log_det: predicted,
        relative_error,
        delta_log_t0: 0.5 * delta,
        decay_rate,
        r_squared,
    })
}

/// Relative allowance for the time integration in [`ql_derivative_channel`].
pub const CHANNEL_RTOL: f64 = 1e-6;

/// Along a `Q_L` gradient trace with K-energy samples: the change of
/// `log Q_L = −c_n μ + const` between consecutive samples against
/// `c_n ∫∫ (s − s₀)² dv dt`. Returns the largest discrepancy and the
/// largest allowance (quadrature error plus [`CHANNEL_RTOL`]).
pub fn ql_derivative_channel(trace: &FlowTrace) -> Option<(f64, f64)> {
    let cn = c_one(&trace.terminal);
    let mut worst = 0.0f64;
    let mut tol = 0.0f64;
    for w in trace.samples.windows(2) {
        let (k0, k1) = (w[0].k_energy?, w[1].k_energy?);
        let dlog_q = -cn * (k1 - k0);
        let integral = cn * (w[1].cumulative_l2 - w[0].cumulative_l2);
        worst = worst.max((dlog_q - integral).abs());
        let quad = cn * (w[0].k_energy_error? + w[1].k_energy_error?);
        tol = tol.max(quad + CHANNEL_RTOL * integral.abs());
    }
    Some((worst, tol))
}
