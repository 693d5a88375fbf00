//! Conformal metrics `g = e^{2φ} g₀` on a flat torus `ℂ/(ℤ + τℤ)`, their
//! curvature, and the bridge between conformal factors and Kähler
//! potentials.
//!
//! `Δ` is the nonnegative Laplacian `d*d`. For the flat base metric
//! `|dz|²` on the fundamental domain `z = x + τy`, `(x, y) ∈ [0,1)²`, the
//! base area is `Im τ` and `Δ₀ e^{2πi(px+qy)} = (4π²/τ₂²)(|τ|²p² − 2τ₁pq + q²)`.
//! For `g = e^{2φ}g₀`: `Δ_g = e^{−2φ}Δ₀`, `K = e^{−2φ}Δ₀φ`, `s = 2K`.

pub mod grid;
pub mod io;
pub mod random;

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use grid::{flat_symbol, SpectralGrid};
pub use random::{random_field, BandLimited};

/// Euler characteristic of the torus.
pub const CHI: f64 = 0.0;

/// Relative area tolerance for membership in a Kähler class.
pub const AREA_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum SurfaceError {
    #[error("modulus must have positive imaginary part, got {0}")]
    BadModulus(Complex64),
    #[error("grid resolution {0} must be a power of two and at least 8")]
    BadResolution(usize),
    #[error("field has {got} samples, expected {expected}")]
    FieldSize { expected: usize, got: usize },
    #[error("field contains non-finite values")]
    NonFinite,
    #[error("potential not admissible: min(1 - Δψ) = {min:.6e}")]
    NotAdmissible { min: f64 },
    #[error("area {area:.12} differs from the class area {class_area:.12}")]
    AreaMismatch { area: f64, class_area: f64 },
    #[error("Poisson data has nonzero mean {mean:.3e}")]
    NotMeanZero { mean: f64 },
    #[error("band limit {max_frequency} exceeds N/4 = {limit}")]
    BandTooWide { max_frequency: usize, limit: usize },
    #[error("different tori: {0}")]
    ShapeMismatch(String),
    #[error("field file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Modulus and grid resolution of a flat torus.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TorusShape {
    tau: Complex64,
    n: usize,
}

impl TorusShape {
    pub fn new(tau: Complex64, n: usize) -> Result<Self, SurfaceError> {
        if !(tau.im > 0.0) || !tau.re.is_finite() || !tau.im.is_finite() {
            return Err(SurfaceError::BadModulus(tau));
        }
        if n < 8 || !n.is_power_of_two() {
            return Err(SurfaceError::BadResolution(n));
        }
        Ok(Self { tau, n })
    }

    pub fn square(n: usize) -> Result<Self, SurfaceError> {
        Self::new(Complex64::new(0.0, 1.0), n)
    }

    pub fn tau(&self) -> Complex64 {
        self.tau
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of grid samples `N²`.
    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Area of the flat base, `Im τ`.
    pub fn base_area(&self) -> f64 {
        self.tau.im
    }

    pub fn cell_area(&self) -> f64 {
        self.tau.im / (self.n * self.n) as f64
    }

    /// `(x, y)` of sample `k`.
    pub fn point(&self, k: usize) -> (f64, f64) {
        let n = self.n as f64;
        ((k % self.n) as f64 / n, (k / self.n) as f64 / n)
    }

    pub fn with_resolution(&self, n: usize) -> Result<Self, SurfaceError> {
        Self::new(self.tau, n)
    }

    pub fn grid(&self) -> Arc<SpectralGrid> {
        SpectralGrid::shared(*self)
    }

    /// Samples `f(x, y)` on the grid.
    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        (0..self.len())
            .map(|k| {
                let (x, y) = self.point(k);
                f(x, y)
            })
            .collect()
    }
}

fn check_field(shape: &TorusShape, f: &[f64]) -> Result<(), SurfaceError> {
    if f.len() != shape.len() {
        return Err(SurfaceError::FieldSize {
            expected: shape.len(),
            got: f.len(),
        });
    }
    if f.iter().any(|v| !v.is_finite()) {
        return Err(SurfaceError::NonFinite);
    }
    Ok(())
}

#[cfg(test)]
fn sup(f: &[f64]) -> f64 {
    f.iter().fold(0.0f64, |a, v| a.max(v.abs()))
}

/// Metric `e^{2φ}|dz|²` on a flat torus.
#[derive(Clone, Debug, PartialEq)]
pub struct ConformalTorus {
    shape: TorusShape,
    phi: Vec<f64>,
}

impl ConformalTorus {
    pub fn new(shape: TorusShape, phi: Vec<f64>) -> Result<Self, SurfaceError> {
        check_field(&shape, &phi)?;
        Ok(Self { shape, phi })
    }

    pub fn flat(shape: TorusShape) -> Self {
        Self {
            shape,
            phi: vec![0.0; shape.len()],
        }
    }

    pub fn shape(&self) -> TorusShape {
        self.shape
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    pub fn into_phi(self) -> Vec<f64> {
        self.phi
    }

    pub fn grid(&self) -> Arc<SpectralGrid> {
        self.shape.grid()
    }

    /// Density `e^{2φ}` of `dv` against `dA₀`.
    pub fn density(&self) -> Vec<f64> {
        self.phi.iter().map(|p| (2.0 * p).exp()).collect()
    }

    /// `∫ f dv`.
    pub fn integrate(&self, f: &[f64]) -> Result<f64, SurfaceError> {
        check_field(&self.shape, f)?;
        let s: f64 = f.iter().zip(&self.phi).map(|(v, p)| v * (2.0 * p).exp()).sum();
        Ok(s * self.shape.cell_area())
    }

    pub fn area(&self) -> f64 {
        self.density().iter().sum::<f64>() * self.shape.cell_area()
    }

    /// `Δ_g f = e^{−2φ} Δ₀ f`.
    pub fn laplacian(&self, f: &[f64]) -> Result<Vec<f64>, SurfaceError> {
        let lap = self.grid().laplacian(f)?;
        Ok(lap.iter().zip(&self.phi).map(|(l, p)| l * (-2.0 * p).exp()).collect())
    }

    pub fn gauss_curvature(&self) -> Vec<f64> {
        self.laplacian(&self.phi).expect("field matches shape")
    }

    pub fn scalar_curvature(&self) -> Vec<f64> {
        self.gauss_curvature().iter().map(|k| 2.0 * k).collect()
    }

    /// The topological constant `s₀ = 4πχ/A`.
    pub fn s0(&self) -> f64 {
        4.0 * PI * CHI / self.area()
    }

    /// `∫ s dv / ∫ dv`, computed by quadrature.
    pub fn average_scalar_curvature(&self) -> f64 {
        self.integrate(&self.scalar_curvature()).expect("field matches shape") / self.area()
    }

    /// `∫ K dv − 2πχ`.
    pub fn gauss_bonnet_residual(&self) -> f64 {
        self.integrate(&self.gauss_curvature()).expect("field matches shape") - 2.0 * PI * CHI
    }

    /// `sup |s − s₀|`.
    pub fn sup_curvature_deviation(&self) -> f64 {
        let s0 = self.s0();
        self.scalar_curvature().iter().fold(0.0f64, |a, s| a.max((s - s0).abs()))
    }

    /// `∫ (s − s₀)² dv`.
    pub fn curvature_deviation_sq(&self) -> f64 {
        let s0 = self.s0();
        let dev: Vec<f64> = self.scalar_curvature().iter().map(|s| (s - s0) * (s - s0)).collect();
        self.integrate(&dev).expect("field matches shape")
    }

    /// Metric `e^{2c} g`.
    pub fn rescaled(&self, c: f64) -> Self {
        Self {
            shape: self.shape,
            phi: self.phi.iter().map(|p| p + c).collect(),
        }
    }

    /// Adds the constant that brings the area to `area`.
    pub fn with_area(&self, area: f64) -> Self {
        self.rescaled(0.5 * (area / self.area()).ln())
    }

    /// Pullback by the grid translation `(x, y) ↦ (x + di/N, y + dj/N)`.
    pub fn translated(&self, di: usize, dj: usize) -> Self {
        let n = self.shape.n();
        let mut phi = vec![0.0; n * n];
        for j in 0..n {
            for i in 0..n {
                phi[j * n + i] = self.phi[((j + dj) % n) * n + (i + di) % n];
            }
        }
        Self { shape: self.shape, phi }
    }

    /// Spectral interpolation of `φ` to an `m×m` grid.
    pub fn resampled(&self, m: usize) -> Result<Self, SurfaceError> {
        let phi = self.grid().resample(&self.phi, m)?;
        Self::new(self.shape.with_resolution(m)?, phi)
    }

    /// `‖φ − mean φ‖∞`.
    pub fn oscillation(&self) -> f64 {
        let mean = self.phi.iter().sum::<f64>() / self.phi.len() as f64;
        self.phi.iter().fold(0.0f64, |a, p| a.max((p - mean).abs()))
    }

    /// Content hash of modulus, resolution and samples.
    pub fn metric_id(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.shape.tau.re.to_le_bytes());
        h.update(self.shape.tau.im.to_le_bytes());
        h.update((self.shape.n as u64).to_le_bytes());
        for p in &self.phi {
            h.update(p.to_le_bytes());
        }
        h.finalize().iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    fn same_torus(&self, other: &Self) -> Result<(), SurfaceError> {
        if self.shape != other.shape {
            return Err(SurfaceError::ShapeMismatch(format!("{:?} vs {:?}", self.shape, other.shape)));
        }
        Ok(())
    }

    /// Whether `self` lies in the Kähler class of `other` (equal areas).
    pub fn check_same_class(&self, other: &Self) -> Result<(), SurfaceError> {
        self.same_torus(other)?;
        let (a, b) = (self.area(), other.area());
        if (a - b).abs() > AREA_TOLERANCE * b {
            return Err(SurfaceError::AreaMismatch { area: a, class_area: b });
        }
        Ok(())
    }
}

/// Kähler potential `ψ` relative to a base metric, with `ω_ψ = ω + i∂∂̄ψ`
/// and `dv_ψ = (1 − Δψ) dv`.
#[derive(Clone, Debug, PartialEq)]
pub struct KahlerPotential {
    base: ConformalTorus,
    psi: Vec<f64>,
}

impl KahlerPotential {
    /// Rejects `ψ` unless `1 − Δ_base ψ > 0` everywhere on the grid.
    pub fn new(base: ConformalTorus, psi: Vec<f64>) -> Result<Self, SurfaceError> {
        check_field(&base.shape, &psi)?;
        let min = admissibility_min(&base, &psi)?;
        if !(min > 0.0) {
            return Err(SurfaceError::NotAdmissible { min });
        }
        Ok(Self { base, psi })
    }

    pub fn base(&self) -> &ConformalTorus {
        &self.base
    }

    pub fn psi(&self) -> &[f64] {
        &self.psi
    }

    /// Grid minimum of `1 − Δψ`.
    pub fn admissibility(&self) -> f64 {
        admissibility_min(&self.base, &self.psi).expect("validated at construction")
    }
}

/// `min(1 − Δ_base ψ)` over the grid.
pub fn admissibility_min(base: &ConformalTorus, psi: &[f64]) -> Result<f64, SurfaceError> {
    let lap = base.laplacian(psi)?;
    Ok(lap.iter().fold(f64::INFINITY, |a, l| a.min(1.0 - l)))
}

/// Conformal factor of `ω_ψ`: `e^{2φ} = e^{2φ_base}(1 − Δ_base ψ)`.
pub fn potential_to_conformal(p: &KahlerPotential) -> ConformalTorus {
    let lap = p.base.laplacian(&p.psi).expect("validated at construction");
    let phi = p
        .base
        .phi
        .iter()
        .zip(&lap)
        .map(|(b, l)| b + 0.5 * (1.0 - l).ln())
        .collect();
    ConformalTorus {
        shape: p.base.shape,
        phi,
    }
}

/// Potential of `m` relative to the flat base of the same area.
pub fn conformal_to_potential(m: &ConformalTorus) -> Result<KahlerPotential, SurfaceError> {
    let base = ConformalTorus::flat(m.shape).with_area(m.area());
    potential_relative_to(m, &base)
}

/// The unique `ψ` with `∫ψ dv_base = 0` and `ω_ψ = ω_m`, from
/// `Δ₀ψ = e^{2φ_base} − e^{2φ}`. Requires equal areas.
pub fn potential_relative_to(m: &ConformalTorus, base: &ConformalTorus) -> Result<KahlerPotential, SurfaceError> {
    m.check_same_class(base)?;
    let grid = m.grid();
    let mut rhs: Vec<f64> = base.density().iter().zip(m.density()).map(|(b, a)| b - a).collect();
    let mean = grid.mean(&rhs)?;
    rhs.iter_mut().for_each(|v| *v -= mean);
    let mut psi = grid.solve_poisson(&rhs, 1e-12)?;
    let shift = base.integrate(&psi)? / base.area();
    psi.iter_mut().for_each(|v| *v -= shift);
    KahlerPotential::new(base.clone(), psi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn square(n: usize) -> TorusShape {
        TorusShape::square(n).unwrap()
    }

    fn random_metric(shape: TorusShape, amp: f64, seed: u64) -> ConformalTorus {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let phi = random_field(shape, BandLimited::new(2, amp), &mut rng).unwrap();
        ConformalTorus::new(shape, phi).unwrap()
    }

    #[test]
    fn shape_validation() {
        assert!(TorusShape::new(Complex64::new(0.0, -1.0), 16).is_err());
        assert!(matches!(TorusShape::square(30), Err(SurfaceError::BadResolution(30))));
        assert!(TorusShape::square(4).is_err());
        assert_eq!(square(16).base_area(), 1.0);
    }

    #[test]
    fn constant_factor_is_flat() {
        let m = ConformalTorus::flat(square(16)).rescaled(0.7);
        assert!(sup(&m.gauss_curvature()) < 1e-12);
        assert!((m.area() - 1.4f64.exp()).abs() < 1e-12);
    }

    #[test]
    fn cosine_curvature_matches_finite_differences() {
        let n = 64;
        let s = square(n);
        let eps = 0.1;
        let m = ConformalTorus::new(s, s.sample(|x, _| eps * (2.0 * PI * x).cos())).unwrap();
        let k = m.gauss_curvature();
        // Second-order centered differences on a fine grid for the oracle.
        let h = 1e-4;
        let phi = |x: f64| eps * (2.0 * PI * x).cos();
        for i in [0, 5, 17, 40] {
            let x = i as f64 / n as f64;
            let lap = -(phi(x + h) - 2.0 * phi(x) + phi(x - h)) / (h * h);
            let oracle = (-2.0 * phi(x)).exp() * lap;
            assert!((k[i] - oracle).abs() < 1e-6, "{} vs {}", k[i], oracle);
        }
    }

    #[test]
    fn gauss_bonnet_and_average() {
        for seed in 0..4 {
            let m = random_metric(TorusShape::new(Complex64::new(0.4, 1.3), 32).unwrap(), 0.4, seed);
            assert!(m.gauss_bonnet_residual().abs() < 1e-8);
            assert!(m.average_scalar_curvature().abs() < 1e-8);
            assert_eq!(m.s0(), 0.0);
        }
    }

    #[test]
    fn curvature_scaling_law() {
        let m = random_metric(square(32), 0.3, 9);
        let c = -0.4;
        let k = m.gauss_curvature();
        let kc = m.rescaled(c).gauss_curvature();
        let scale = sup(&k);
        for (a, b) in k.iter().zip(&kc) {
            assert!((a * (-2.0 * c).exp() - b).abs() < 1e-12 * scale);
        }
    }

    #[test]
    fn potential_bridge_round_trip() {
        let s = TorusShape::new(Complex64::new(0.5, 1.0), 32).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut psi = random_field(s, BandLimited::new(3, 0.002), &mut rng).unwrap();
        let mean = psi.iter().sum::<f64>() / psi.len() as f64;
        psi.iter_mut().for_each(|v| *v -= mean);
        let base = ConformalTorus::flat(s);
        let pot = KahlerPotential::new(base.clone(), psi.clone()).unwrap();
        let m = potential_to_conformal(&pot);
        assert!((m.area() - base.area()).abs() < 1e-10);
        let back = conformal_to_potential(&m).unwrap();
        for (a, b) in back.psi().iter().zip(&psi) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn bridge_over_curved_base() {
        let base = random_metric(square(32), 0.3, 4);
        let target = random_metric(square(32), 0.2, 5).with_area(base.area());
        let pot = potential_relative_to(&target, &base).unwrap();
        let again = potential_to_conformal(&pot);
        for (a, b) in again.phi().iter().zip(target.phi()) {
            assert!((a - b).abs() < 1e-10);
        }
        assert!(base.integrate(pot.psi()).unwrap().abs() < 1e-12);
    }

    #[test]
    fn constant_potential_gives_base() {
        let base = ConformalTorus::flat(square(16));
        let m = potential_to_conformal(&KahlerPotential::new(base.clone(), vec![3.0; 256]).unwrap());
        assert!(sup(m.phi()) < 1e-14);
        assert!(sup(conformal_to_potential(&base).unwrap().psi()) < 1e-14);
    }

    #[test]
    fn rejects_inadmissible_and_off_class() {
        let s = square(16);
        let base = ConformalTorus::flat(s);
        let psi = s.sample(|x, _| (2.0 * PI * x).cos());
        match KahlerPotential::new(base.clone(), psi) {
            Err(SurfaceError::NotAdmissible { min }) => assert!(min < 0.0),
            other => panic!("{other:?}"),
        }
        let bigger = base.rescaled(0.1);
        assert!(matches!(
            potential_relative_to(&bigger, &base),
            Err(SurfaceError::AreaMismatch { .. })
        ));
    }

    #[test]
    fn translation_and_metric_id() {
        let m = random_metric(square(16), 0.3, 1);
        let t = m.translated(3, 5);
        assert!((t.area() - m.area()).abs() < 1e-12);
        assert_ne!(m.metric_id(), t.metric_id());
        assert_eq!(m.metric_id(), m.clone().metric_id());
        assert_eq!(m.metric_id().len(), 16);
    }
}
