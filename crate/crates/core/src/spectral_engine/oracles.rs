//! Closed-form determinants: the flat torus through the Dedekind eta
//! function, and conformal metrics through the Polyakov anomaly.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::{DetMethod, SpectralError, ZetaDeterminant};
use crate::surface_model::ConformalTorus;

/// `log |η(τ)|` from the product `q^{1/24} Π (1 − qⁿ)`, `q = e^{2πiτ}`.
pub fn log_abs_eta(tau: Complex64) -> f64 {
    let q = (Complex64::new(0.0, 2.0 * PI) * tau).exp();
    let mut acc = -PI * tau.im / 12.0;
    let mut qn = q;
    while qn.norm() > 1e-18 {
        acc += (Complex64::new(1.0, 0.0) - qn).norm().ln();
        qn *= q;
    }
    acc
}

/// Representative of `τ` in the standard fundamental domain of `SL₂(ℤ)`.
pub fn reduce_modulus(mut tau: Complex64) -> Complex64 {
    for _ in 0..1000 {
        tau.re -= tau.re.round();
        if tau.norm_sqr() < 1.0 - 1e-15 {
            tau = -tau.inv();
        } else {
            break;
        }
    }
    tau
}

/// `log det' Δ` of the flat torus `ℂ/(ℤ + τℤ)` rescaled to area `area`:
/// `log(area · Im τ · |η(τ)|⁴)`. Evaluated at `τ` as given.
pub fn epstein_log_det_raw(tau: Complex64, area: f64) -> f64 {
    (area * tau.im).ln() + 4.0 * log_abs_eta(tau)
}

/// Flat determinant, evaluated at the reduced modulus for fast convergence.
pub fn epstein_log_det(tau: Complex64, area: f64) -> ZetaDeterminant {
    ZetaDeterminant::exact(epstein_log_det_raw(reduce_modulus(tau), area), DetMethod::EpsteinOracle)
}

/// `log det' Δ` for `e^{2φ}|dz|²`, transported from the flat metric of area
/// `A₀ = Im τ`: `epstein(τ, A₀) − (1/12π)∫|∇₀φ|² dA₀ + log(A_φ / A₀)`.
pub fn polyakov_log_det(m: &ConformalTorus) -> ZetaDeterminant {
    let shape = m.shape();
    let a0 = shape.base_area();
    let grad = m.grid().dirichlet_energy(m.phi()).expect("field matches shape");
    let flat = epstein_log_det(shape.tau(), a0).log_det;
    ZetaDeterminant::exact(flat - grad / (12.0 * PI) + (m.area() / a0).ln(), DetMethod::PolyakovTransport)
}

/// Determinant of `e^{2φ} g_base` for a flat (constant factor) base.
pub fn polyakov_log_det_from(base: &ConformalTorus, phi: &[f64]) -> Result<ZetaDeterminant, SpectralError> {
    let osc = base.oscillation();
    if osc > 1e-12 {
        return Err(SpectralError::NonFlatBase(osc));
    }
    let total: Vec<f64> = base.phi().iter().zip(phi).map(|(a, b)| a + b).collect();
    let m = ConformalTorus::new(base.shape(), total)?;
    Ok(polyakov_log_det(&m))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modular_invariance() {
        for tau in [
            Complex64::new(0.0, 1.0),
            Complex64::new(0.5, 1.0),
            Complex64::new(0.0, 2.0),
            Complex64::new(0.31, 0.77),
        ] {
            let a = epstein_log_det_raw(tau, 1.0);
            let b = epstein_log_det_raw(-tau.inv(), 1.0);
            let c = epstein_log_det_raw(tau + 1.0, 1.0);
            assert!((a - b).abs() < 1e-12, "{tau}: {a} vs {b}");
            assert!((a - c).abs() < 1e-12);
        }
    }

    #[test]
    fn reduction_lands_in_fundamental_domain() {
        let t = reduce_modulus(Complex64::new(3.3, 0.05));
        assert!(t.re.abs() <= 0.5 + 1e-12 && t.norm() >= 1.0 - 1e-12);
    }

    #[test]
    fn area_scaling_matches_zeta_zero() {
        // log det'(cΔ) = log det' Δ − log c, and rescaling the area by a
        // multiplies Δ by 1/a.
        let tau = Complex64::new(0.5, 1.0);
        let a = epstein_log_det(tau, 1.0).log_det;
        let b = epstein_log_det(tau, 2.5).log_det;
        assert!((b - a - 2.5f64.ln()).abs() < 1e-14);
    }
}
