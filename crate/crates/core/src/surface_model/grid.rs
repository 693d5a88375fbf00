//! Fourier machinery on the `N×N` grid of a flat torus.
//!
//! Samples are stored row-major with index `j·N + i` at the point
//! `(x, y) = (i/N, j/N)` of the fundamental domain, `z = x + τy`.

use std::cell::RefCell;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::{SurfaceError, TorusShape};

/// Signed frequency of FFT index `k` on an axis of length `n`.
pub fn signed_frequency(k: usize, n: usize) -> i64 {
    if k < n / 2 {
        k as i64
    } else {
        k as i64 - n as i64
    }
}

/// Eigenvalue of the flat nonnegative Laplacian on `e^{2πi(px+qy)}`:
/// `(4π²/τ₂²)(|τ|² p² − 2τ₁ p q + q²)`.
pub fn flat_symbol(tau: Complex64, p: f64, q: f64) -> f64 {
    let (t1, t2) = (tau.re, tau.im);
    4.0 * PI * PI / (t2 * t2) * (tau.norm_sqr() * p * p - 2.0 * t1 * p * q + q * q)
}

pub struct SpectralGrid {
    shape: TorusShape,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    symbol: Vec<f64>,
}

impl std::fmt::Debug for SpectralGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralGrid").field("shape", &self.shape).finish()
    }
}

thread_local! {
    static GRIDS: RefCell<HashMap<(u64, u64, usize), Arc<SpectralGrid>>> = RefCell::new(HashMap::new());
}

impl SpectralGrid {
    pub fn new(shape: TorusShape) -> Self {
        let n = shape.n();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let tau = shape.tau();
        let mut symbol = vec![0.0; n * n];
        for jq in 0..n {
            for ip in 0..n {
                let p = signed_frequency(ip, n);
                let q = signed_frequency(jq, n);
                // The Nyquist line is its own mirror image; averaging the
                // two branches drops the odd cross term and keeps the
                // discrete operator real and symmetric.
                let nyquist = -(n as i64) / 2;
                let s = if p == nyquist || q == nyquist {
                    0.5 * (flat_symbol(tau, p as f64, q as f64) + flat_symbol(tau, p as f64, -(q as f64)))
                } else {
                    flat_symbol(tau, p as f64, q as f64)
                };
                symbol[jq * n + ip] = s;
            }
        }
        Self {
            shape,
            forward,
            inverse,
            symbol,
        }
    }

    /// Shared grid for `shape`, built once per thread.
    pub fn shared(shape: TorusShape) -> Arc<Self> {
        let key = (shape.tau().re.to_bits(), shape.tau().im.to_bits(), shape.n());
        GRIDS.with(|g| {
            g.borrow_mut()
                .entry(key)
                .or_insert_with(|| Arc::new(Self::new(shape)))
                .clone()
        })
    }

    pub fn shape(&self) -> TorusShape {
        self.shape
    }

    pub fn n(&self) -> usize {
        self.shape.n()
    }

    /// Flat Laplacian eigenvalue attached to each Fourier slot.
    pub fn symbol(&self) -> &[f64] {
        &self.symbol
    }

    fn check(&self, f: &[f64]) -> Result<(), SurfaceError> {
        let len = self.n() * self.n();
        if f.len() != len {
            return Err(SurfaceError::FieldSize { expected: len, got: f.len() });
        }
        Ok(())
    }

    fn transform(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let n = self.n();
        for row in data.chunks_exact_mut(n) {
            plan.process(row);
        }
        let mut col = vec![Complex64::new(0.0, 0.0); n];
        for i in 0..n {
            for j in 0..n {
                col[j] = data[j * n + i];
            }
            plan.process(&mut col);
            for j in 0..n {
                data[j * n + i] = col[j];
            }
        }
    }

    /// Unnormalized forward 2-D transform.
    pub fn fft(&self, f: &[f64]) -> Result<Vec<Complex64>, SurfaceError> {
        self.check(f)?;
        let mut data: Vec<Complex64> = f.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform(&mut data, &self.forward);
        Ok(data)
    }

    /// Inverse of [`Self::fft`], keeping the real part.
    pub fn ifft_real(&self, coeffs: &[Complex64]) -> Vec<f64> {
        let mut data = coeffs.to_vec();
        self.transform(&mut data, &self.inverse);
        let scale = 1.0 / (self.n() * self.n()) as f64;
        data.iter().map(|c| c.re * scale).collect()
    }

    /// Applies the Fourier multiplier `m(λ)` where `λ` is the flat symbol.
    pub fn apply_multiplier(&self, f: &[f64], m: impl Fn(f64) -> f64) -> Result<Vec<f64>, SurfaceError> {
        let mut c = self.fft(f)?;
        for (v, &s) in c.iter_mut().zip(&self.symbol) {
            *v *= m(s);
        }
        Ok(self.ifft_real(&c))
    }

    /// Flat nonnegative Laplacian `Δ₀ f`.
    pub fn laplacian(&self, f: &[f64]) -> Result<Vec<f64>, SurfaceError> {
        self.apply_multiplier(f, |s| s)
    }

    /// Mean-zero solution of `Δ₀ u = rhs`. The mean of `rhs` must vanish to
    /// `tol` relative to its sup norm.
    pub fn solve_poisson(&self, rhs: &[f64], tol: f64) -> Result<Vec<f64>, SurfaceError> {
        let mean = self.mean(rhs)?;
        let scale = rhs.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        if mean.abs() > tol * scale {
            return Err(SurfaceError::NotMeanZero { mean });
        }
        self.apply_multiplier(rhs, |s| if s == 0.0 { 0.0 } else { 1.0 / s })
    }

    /// `∫ f dA₀`, exact for band-limited integrands.
    pub fn integrate(&self, f: &[f64]) -> Result<f64, SurfaceError> {
        self.check(f)?;
        Ok(f.iter().sum::<f64>() * self.shape.cell_area())
    }

    pub fn mean(&self, f: &[f64]) -> Result<f64, SurfaceError> {
        self.check(f)?;
        Ok(f.iter().sum::<f64>() / f.len() as f64)
    }

    /// `∫ |∇₀ f|² dA₀ = ∫ f Δ₀ f dA₀`, computed on the Fourier side.
    pub fn dirichlet_energy(&self, f: &[f64]) -> Result<f64, SurfaceError> {
        let c = self.fft(f)?;
        let len = (self.n() * self.n()) as f64;
        let sum: f64 = c.iter().zip(&self.symbol).map(|(v, s)| v.norm_sqr() * s).sum();
        Ok(sum / len * self.shape.cell_area())
    }

    /// Spectral interpolation onto an `m×m` grid of the same torus. Modes
    /// with `|p|` or `|q| ≥ min(n, m)/2` are dropped.
    pub fn resample(&self, f: &[f64], m: usize) -> Result<Vec<f64>, SurfaceError> {
        let target = SpectralGrid::shared(self.shape.with_resolution(m)?);
        let n = self.n();
        if m == n {
            self.check(f)?;
            return Ok(f.to_vec());
        }
        let c = self.fft(f)?;
        let half = (n.min(m) / 2) as i64;
        let mut out = vec![Complex64::new(0.0, 0.0); m * m];
        let ratio = (m * m) as f64 / (n * n) as f64;
        for jq in 0..n {
            let q = signed_frequency(jq, n);
            for ip in 0..n {
                let p = signed_frequency(ip, n);
                if p.abs() >= half || q.abs() >= half {
                    continue;
                }
                let ti = p.rem_euclid(m as i64) as usize;
                let tj = q.rem_euclid(m as i64) as usize;
                out[tj * m + ti] = c[jq * n + ip] * ratio;
            }
        }
        Ok(target.ifft_real(&out))
    }

    /// Largest `max(|p|, |q|)` carrying a coefficient above `tol·max`.
    pub fn bandwidth(&self, f: &[f64], tol: f64) -> Result<usize, SurfaceError> {
        let c = self.fft(f)?;
        let n = self.n();
        let top = c.iter().fold(0.0f64, |a, v| a.max(v.norm()));
        let mut band = 0;
        for jq in 0..n {
            for ip in 0..n {
                if c[jq * n + ip].norm() > tol * top {
                    let k = signed_frequency(ip, n).unsigned_abs().max(signed_frequency(jq, n).unsigned_abs());
                    band = band.max(k as usize);
                }
            }
        }
        Ok(band)
    }
}
