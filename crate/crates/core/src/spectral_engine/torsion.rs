//! Analytic torsion and the Quillen norm of a conformal torus, and the
//! first variation of `log T₀` along Kähler potentials.

use std::f64::consts::{LN_2, PI};

use serde::{Deserialize, Serialize};

use super::{zeta_log_det, spectrum_at, SpectralError, ZetaDeterminant, DET_RESOLUTION};
use crate::surface_model::{admissibility_min, ConformalTorus, CHI};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorsionValue {
    pub log_det: f64,
    pub log_t0: f64,
    /// `log ‖1⁻¹ ⊗ dz̄‖_{L²} = log ‖dz̄‖ − log ‖1‖`.
    pub log_l2: f64,
    pub log_quillen: f64,
    pub error_estimate: f64,
}

/// `2 log T₀ = log det Δ + (log 2)(1 − χ/6)`.
pub fn log_t0_from_det(log_det: f64, chi: f64) -> f64 {
    0.5 * (log_det + LN_2 * (1.0 - chi / 6.0))
}

/// `‖1‖²_{L²} = Area(g)`.
pub fn norm_sq_one(m: &ConformalTorus) -> f64 {
    m.area()
}

/// `‖dz̄‖²_{L²} = ∫ |dz̄|²_g dv` with `|dz̄|²_g = 2e^{−2φ}`.
pub fn norm_sq_dzbar(m: &ConformalTorus) -> f64 {
    let pointwise: Vec<f64> = m.phi().iter().map(|p| 2.0 * (-2.0 * p).exp()).collect();
    m.integrate(&pointwise).expect("field matches shape")
}

fn assemble(m: &ConformalTorus, det: ZetaDeterminant) -> TorsionValue {
    let log_t0 = log_t0_from_det(det.log_det, CHI);
    let log_l2 = 0.5 * (norm_sq_dzbar(m).ln() - norm_sq_one(m).ln());
    TorsionValue {
        log_det: det.log_det,
        log_t0,
        log_l2,
        log_quillen: log_l2 + log_t0,
        error_estimate: 0.5 * det.error_estimate,
    }
}

pub fn analytic_torsion(m: &ConformalTorus) -> Result<TorsionValue, SpectralError> {
    Ok(assemble(m, zeta_log_det(&spectrum_at(m, DET_RESOLUTION)?)))
}

/// Same as [`analytic_torsion`]; the Quillen component is `log‖v‖_{L²} + log T₀`.
pub fn quillen_log_norm(m: &ConformalTorus) -> Result<TorsionValue, SpectralError> {
    analytic_torsion(m)
}

/// Torsion from an already computed determinant.
pub fn torsion_from_det(m: &ConformalTorus, det: ZetaDeterminant) -> TorsionValue {
    assemble(m, det)
}

/// Metric of `ω + iu∂∂̄ψ`: `e^{2φ_u} = e^{2φ}(1 − uΔ_g ψ)`.
pub fn perturbed(m: &ConformalTorus, psi: &[f64], u: f64) -> Result<ConformalTorus, SpectralError> {
    let scaled: Vec<f64> = psi.iter().map(|v| u * v).collect();
    let min = admissibility_min(m, &scaled)?;
    if !(min > 0.0) {
        return Err(SpectralError::NotAdmissible { u, min });
    }
    let lap = m.laplacian(psi)?;
    let phi = m
        .phi()
        .iter()
        .zip(&lap)
        .map(|(p, l)| p + 0.5 * (1.0 - u * l).ln())
        .collect();
    Ok(ConformalTorus::new(m.shape(), phi)?)
}

/// `(log T₀(g_h) − log T₀(g_{−h})) / 2h` along `ω + iu∂∂̄ψ`.
pub fn torsion_variation_fd(m: &ConformalTorus, psi: &[f64], h: f64) -> Result<f64, SpectralError> {
    let plus = analytic_torsion(&perturbed(m, psi, h)?)?.log_t0;
    let minus = analytic_torsion(&perturbed(m, psi, -h)?)?.log_t0;
    Ok((plus - minus) / (2.0 * h))
}

/// `−(1/24) ∫ c₁(Ω) Δψ` with `c₁(Ω) = −(2K/π) dv`, i.e. `(1/12π) ∫ K Δψ dv`.
/// This is the first variation of `log det Δ`.
pub fn anomaly_integral(m: &ConformalTorus, psi: &[f64]) -> Result<f64, SpectralError> {
    let k = m.gauss_curvature();
    let lap = m.laplacian(psi)?;
    let prod: Vec<f64> = k.iter().zip(&lap).map(|(a, b)| a * b).collect();
    Ok(m.integrate(&prod)? / (12.0 * PI))
}

/// Predicted first variation of `log T₀ = ½ log det Δ + const`:
/// `(1/24π) ∫ K Δψ dv`.
pub fn torsion_variation_quadrature(m: &ConformalTorus, psi: &[f64]) -> Result<f64, SpectralError> {
    Ok(0.5 * anomaly_integral(m, psi)?)
}
