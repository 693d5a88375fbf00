//! Laplacian spectra of conformal tori, zeta-regularized determinants,
//! analytic torsion and Quillen norms, with two closed-form oracles.

pub mod oracles;
pub mod torsion;

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::exponential::integral as exp_integral;
use thiserror::Error;

use crate::surface_model::{flat_symbol, ConformalTorus, SurfaceError, CHI};

pub use oracles::{epstein_log_det, epstein_log_det_raw, polyakov_log_det, polyakov_log_det_from, reduce_modulus};
pub use torsion::{
    analytic_torsion, anomaly_integral, quillen_log_norm, torsion_variation_fd, torsion_variation_quadrature,
    TorsionValue,
};

/// Eigenvalues below `KERNEL_THRESHOLD · λ_max` count as kernel.
pub const KERNEL_THRESHOLD: f64 = 1e-10;
/// Bound on `‖Δ₀f − λe^{2φ}f‖ / (‖f‖ max(1, λ_max))` for every eigenpair.
pub const CERTIFICATION_TOLERANCE: f64 = 1e-8;
/// Resolution at which determinants are computed by default.
pub const DET_RESOLUTION: usize = 32;

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error(transparent)]
    Surface(#[from] SurfaceError),
    #[error("symmetric eigensolver did not converge for N = {n}")]
    NoConvergence { n: usize },
    #[error("eigenpair residual {residual:.3e} exceeds {tolerance:.1e}")]
    Uncertified { residual: f64, tolerance: f64 },
    #[error("expected a one-dimensional kernel, found {0}")]
    Kernel(usize),
    #[error("base metric is not flat (oscillation {0:.3e})")]
    NonFlatBase(f64),
    #[error("perturbed potential not admissible at u = {u}: min(1 - uΔψ) = {min:.3e}")]
    NotAdmissible { u: f64, min: f64 },
}

/// Heat-trace data of the metric that produced a spectrum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeatData {
    pub area: f64,
    pub chi: f64,
    /// `(1/60π) ∫ K² dv`, the `t¹` coefficient of the heat trace.
    pub a2: f64,
    /// `(1/4π) ∫ (4K³/315 − |∇K|²/70) dv`, the `t²` coefficient.
    #[serde(default)]
    pub a3: f64,
    /// Lower bound for the first eigenvalue the grid does not resolve.
    pub lambda_cut: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumResult {
    pub eigenvalues: Vec<f64>,
    pub kernel_dim: usize,
    pub metric_id: String,
    pub n: usize,
    pub tau: [f64; 2],
    pub heat: HeatData,
    /// Largest normalized eigenpair residual.
    pub residual: f64,
}

impl SpectrumResult {
    pub fn positive(&self) -> &[f64] {
        &self.eigenvalues[self.kernel_dim..]
    }

    pub fn lambda_max(&self) -> f64 {
        *self.eigenvalues.last().expect("nonempty spectrum")
    }

    /// Spectrum of `c·Δ`: eigenvalues and heat data rescaled consistently.
    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.eigenvalues.iter_mut().for_each(|l| *l *= c);
        out.heat.area /= c;
        out.heat.a2 *= c;
        out.heat.a3 *= c * c;
        out.heat.lambda_cut *= c;
        out
    }
}

/// Dense matrix of the spectral flat Laplacian on the `N×N` grid.
pub fn dense_flat_laplacian(m: &ConformalTorus) -> DMatrix<f64> {
    let grid = m.grid();
    let n = grid.n();
    let symbol: Vec<Complex64> = grid.symbol().iter().map(|&s| Complex64::new(s, 0.0)).collect();
    let kernel = grid.ifft_real(&symbol);
    let len = n * n;
    DMatrix::from_fn(len, len, |a, b| {
        let (ia, ja) = (a % n, a / n);
        let (ib, jb) = (b % n, b / n);
        kernel[((ja + n - jb) % n) * n + (ia + n - ib) % n]
    })
}

fn lambda_cut(m: &ConformalTorus) -> f64 {
    let n = m.shape().n() as i64;
    let h = n / 2;
    let tau = m.shape().tau();
    let mut best = f64::INFINITY;
    for p in -h - 1..=h + 1 {
        for q in -h - 1..=h + 1 {
            if p.abs().max(q.abs()) >= h {
                best = best.min(flat_symbol(tau, p as f64, q as f64));
            }
        }
    }
    let min_weight = m.phi().iter().fold(f64::INFINITY, |a, p| a.min((-2.0 * p).exp()));
    best * min_weight
}

/// Heat coefficients and cutoff of `m`.
pub fn heat_data(m: &ConformalTorus) -> HeatData {
    let k = m.gauss_curvature();
    let k2: Vec<f64> = k.iter().map(|v| v * v).collect();
    let lap_k = m.laplacian(&k).expect("field matches shape");
    // ∫|∇K|² dv = ∫ K Δ_g K dv.
    let a3_density: Vec<f64> = k
        .iter()
        .zip(&lap_k)
        .map(|(k, l)| 4.0 * k * k * k / 315.0 - k * l / 70.0)
        .collect();
    HeatData {
        area: m.area(),
        chi: CHI,
        a2: m.integrate(&k2).expect("field matches shape") / (60.0 * PI),
        a3: m.integrate(&a3_density).expect("field matches shape") / (4.0 * PI),
        lambda_cut: lambda_cut(m),
    }
}

/// All `N²` eigenvalues of `Δ₀ f = λ e^{2φ} f` on the grid, via the
/// symmetric form `e^{−φ} Δ₀ e^{−φ}`, with every eigenpair certified.
pub fn laplacian_spectrum(m: &ConformalTorus) -> Result<SpectrumResult, SpectralError> {
    let n = m.shape().n();
    let d = dense_flat_laplacian(m);
    let w: DVector<f64> = DVector::from_iterator(n * n, m.phi().iter().map(|p| (-p).exp()));
    let sym = DMatrix::from_fn(n * n, n * n, |a, b| w[a] * d[(a, b)] * w[b]);
    let eig = SymmetricEigen::try_new(sym.clone(), 1e-15, 0).ok_or(SpectralError::NoConvergence { n })?;

    // Residual of the original generalized problem for f = e^{−φ} y:
    // Δ₀ f − λ e^{2φ} f = e^{φ} (M y − λ y).
    let mut r = &sym * &eig.eigenvectors;
    for (j, lam) in eig.eigenvalues.iter().enumerate() {
        let mut col = r.column_mut(j);
        col.axpy(-lam, &eig.eigenvectors.column(j), 1.0);
    }
    let mut values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    let lambda_max = values.iter().fold(0.0f64, |a, v| a.max(*v));
    let mut residual = 0.0f64;
    for j in 0..n * n {
        let mut num = 0.0;
        let mut den = 0.0;
        for a in 0..n * n {
            num += (r[(a, j)] / w[a]).powi(2);
            den += (eig.eigenvectors[(a, j)] * w[a]).powi(2);
        }
        residual = residual.max((num / den).sqrt() / lambda_max.max(1.0));
    }
    if residual > CERTIFICATION_TOLERANCE {
        return Err(SpectralError::Uncertified {
            residual,
            tolerance: CERTIFICATION_TOLERANCE,
        });
    }

    values.sort_by(|a, b| a.total_cmp(b));
    let threshold = KERNEL_THRESHOLD * lambda_max;
    let kernel_dim = values.iter().take_while(|v| v.abs() < threshold).count();
    if kernel_dim != 1 {
        return Err(SpectralError::Kernel(kernel_dim));
    }
    values.iter_mut().take(kernel_dim).for_each(|v| *v = 0.0);
    Ok(SpectrumResult {
        eigenvalues: values,
        kernel_dim,
        metric_id: m.metric_id(),
        n,
        tau: [m.shape().tau().re, m.shape().tau().im],
        heat: heat_data(m),
        residual,
    })
}

/// Spectrum after spectral resampling to at most `resolution` points per
/// axis; the dense eigensolve is the cost center.
pub fn spectrum_at(m: &ConformalTorus, resolution: usize) -> Result<SpectrumResult, SpectralError> {
    if m.shape().n() > resolution {
        laplacian_spectrum(&m.resampled(resolution)?)
    } else {
        laplacian_spectrum(m)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetMethod {
    MellinSplit,
    EpsteinOracle,
    PolyakovTransport,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZetaDeterminant {
    pub log_det: f64,
    pub zeta_prime_zero: f64,
    pub error_estimate: f64,
    pub method: DetMethod,
}

impl ZetaDeterminant {
    pub fn exact(log_det: f64, method: DetMethod) -> Self {
        Self {
            log_det,
            zeta_prime_zero: -log_det,
            error_estimate: 0.0,
            method,
        }
    }
}

/// Regularization protocol for the Mellin split.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MellinOptions {
    /// `t* = split_factor / λ_cut`.
    pub split_factor: f64,
    /// Combine `t*` and `2t*` to cancel the leading `O(t*³)` remainder.
    pub richardson: bool,
    /// Multiples of `t*` whose spread defines the error estimate.
    pub scan: [f64; 2],
}

impl Default for MellinOptions {
    fn default() -> Self {
        Self {
            split_factor: 20.0,
            richardson: true,
            scan: [0.5, 2.0],
        }
    }
}

/// Exponential integral `E₁(x)`, `x > 0`. The continued fraction used by
/// statrs occasionally misses its stopping test just above `x = 1`; the
/// power series covers that range.
pub fn e1(x: f64) -> f64 {
    if x > 2.0 {
        if let Some(v) = exp_integral(x, 1) {
            return v;
        }
    }
    let mut term = 1.0;
    let mut sum = 0.0;
    for k in 1..200 {
        term *= -x / k as f64;
        let add = term / k as f64;
        sum += add;
        if add.abs() < 1e-17 * sum.abs().max(1e-300) {
            break;
        }
    }
    -statrs::consts::EULER_MASCHERONI - x.ln() - sum
}

/// `−ζ'(0)` at a fixed split point `t`: the heat expansion
/// `A/4πt + χ/6 + a₂t + a₃t²` is integrated in closed form below `t`, the exact
/// trace above it.
pub fn mellin_value(s: &SpectrumResult, t: f64) -> f64 {
    let a0 = s.heat.area / (4.0 * PI);
    let a1 = s.heat.chi / 6.0 - s.kernel_dim as f64;
    let tail: f64 = s
        .positive()
        .iter()
        .map(|&l| e1(l * t))
        .sum();
    let zeta_prime = statrs::consts::EULER_MASCHERONI * a1 - a0 / t + a1 * t.ln() + s.heat.a2 * t + 0.5 * s.heat.a3 * t * t + tail;
    -zeta_prime
}

fn split_value(s: &SpectrumResult, t: f64, richardson: bool) -> f64 {
    if richardson {
        (8.0 * mellin_value(s, t) - mellin_value(s, 2.0 * t)) / 7.0
    } else {
        mellin_value(s, t)
    }
}

pub fn zeta_log_det_with(s: &SpectrumResult, opts: MellinOptions) -> ZetaDeterminant {
    let t = opts.split_factor / s.heat.lambda_cut;
    let v = split_value(s, t, opts.richardson);
    let error_estimate = opts
        .scan
        .iter()
        .map(|f| (split_value(s, f * t, opts.richardson) - v).abs())
        .fold(0.0, f64::max);
    ZetaDeterminant {
        log_det: v,
        zeta_prime_zero: -v,
        error_estimate,
        method: DetMethod::MellinSplit,
    }
}

/// `log det' Δ = −ζ'(0)` by the Mellin split with default options.
pub fn zeta_log_det(s: &SpectrumResult) -> ZetaDeterminant {
    zeta_log_det_with(s, MellinOptions::default())
}

/// `ζ(0) = χ/6 − dim ker`.
pub fn zeta_at_zero(s: &SpectrumResult) -> f64 {
    s.heat.chi / 6.0 - s.kernel_dim as f64
}

/// Spectrum plus determinant at [`DET_RESOLUTION`].
pub fn log_det(m: &ConformalTorus) -> Result<ZetaDeterminant, SpectralError> {
    Ok(zeta_log_det(&spectrum_at(m, DET_RESOLUTION)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface_model::TorusShape;

    #[test]
    fn flat_square_spectrum_is_lattice() {
        let s = TorusShape::square(8).unwrap();
        let spec = laplacian_spectrum(&ConformalTorus::flat(s)).unwrap();
        assert_eq!(spec.eigenvalues.len(), 64);
        assert_eq!(spec.kernel_dim, 1);
        let l1 = 4.0 * PI * PI;
        for v in &spec.eigenvalues[1..5] {
            assert!((v - l1).abs() < 1e-9 * l1);
        }
        assert!((spec.eigenvalues[5] - 2.0 * l1).abs() < 1e-9 * l1);
    }

    #[test]
    fn exponential_integral_values() {
        // Reference values of E₁.
        for (x, v) in [
            (0.01, 4.037929576538113),
            (1.0, 0.2193839343955205),
            (1.0451, 0.20351369839094843),
            (2.0, 0.048900510708061125),
            (10.0, 4.156968929685325e-06),
            (40.0, 1.036773261451657e-19),
        ] {
            assert!((e1(x) - v).abs() < 1e-14 * v.max(1e-3), "E1({x}) = {}", e1(x));
        }
    }

    #[test]
    fn scaling_law_is_exact() {
        let s = TorusShape::new(Complex64::new(0.2, 1.1), 16).unwrap();
        let spec = laplacian_spectrum(&ConformalTorus::flat(s)).unwrap();
        let c = 3.7;
        let a = zeta_log_det(&spec).log_det;
        let b = zeta_log_det(&spec.scaled(c)).log_det;
        assert!((b - (a + zeta_at_zero(&spec) * c.ln())).abs() < 1e-10);
    }

    #[test]
    fn t_squared_heat_term_tightens_the_expansion() {
        let s = TorusShape::square(16).unwrap();
        let phi = s.sample(|x, y| 0.15 * (2.0 * PI * x).cos() + 0.1 * (2.0 * PI * (x + y)).sin());
        let spec = laplacian_spectrum(&ConformalTorus::new(s, phi).unwrap()).unwrap();
        let h = spec.heat;
        assert!(h.a3.is_finite());
        let t = 10.0 / h.lambda_cut;
        let trace: f64 = spec.eigenvalues.iter().map(|l| (-l * t).exp()).sum();
        let two = h.area / (4.0 * PI * t) + h.chi / 6.0 + h.a2 * t;
        let three = two + h.a3 * t * t;
        assert!((trace - three).abs() < 0.5 * (trace - two).abs(), "{trace} {two} {three}");
        assert_eq!(heat_data(&ConformalTorus::flat(s)).a3, 0.0);
    }

    #[test]
    fn dense_operator_matches_fft_laplacian() {
        let s = TorusShape::new(Complex64::new(0.5, 1.0), 8).unwrap();
        let m = ConformalTorus::flat(s);
        let d = dense_flat_laplacian(&m);
        let f = s.sample(|x, y| (x * 3.0).sin() + (y * 5.0).cos() * x);
        let via_fft = m.grid().laplacian(&f).unwrap();
        let via_dense = &d * DVector::from_vec(f);
        for (a, b) in via_fft.iter().zip(via_dense.iter()) {
            assert!((a - b).abs() < 1e-9);
        }
        assert!((&d - d.transpose()).abs().max() < 1e-9);
    }
}
