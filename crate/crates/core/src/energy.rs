//! Mabuchi K-energy by path quadrature in potential space, the relative
//! `log Q_L` functional and critical-point diagnostics.
//!
//! Along a path `ψ_u` of potentials over a base metric,
//! `d/du log Q_L(ψ_u) = c_n ∫ ψ̇_u (s_u − s₀) dv_u`, and
//! `M(ψ_a, ψ_b) = −∫_a^b ∫ ψ̇_u (s_u − s₀) dv_u du`, so that
//! `log Q_L(ψ_a) − log Q_L(ψ_b) = c_n M(ψ_a, ψ_b)`.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::surface_model::{
    admissibility_min, potential_relative_to, potential_to_conformal, ConformalTorus, KahlerPotential,
    SurfaceError,
};

/// `κ₁` of the torus: `c₁(X) = 0`.
pub const KAPPA1_TORUS: i64 = 0;

#[derive(Debug, Error)]
pub enum EnergyError {
    #[error(transparent)]
    Surface(#[from] SurfaceError),
    #[error("path leaves the admissible set at u = {u}: min(1 - Δψ) = {min:.3e}")]
    Inadmissible { u: f64, min: f64 },
    #[error("quadrature needs at least one panel and one node")]
    EmptyRule,
}

/// `c_n = κ₂ (n + 1) 2^{n−1}` with `κ₂ = ∫ ωⁿ`.
pub fn c_n(n: u32, kappa2: f64) -> f64 {
    kappa2 * (n + 1) as f64 * 2f64.powi(n as i32 - 1)
}

/// `c_1 = 2A` for a surface of area `A`.
pub fn c_one(m: &ConformalTorus) -> f64 {
    c_n(1, m.area())
}

/// Gauss–Legendre nodes and weights on `[−1, 1]`, roots by Newton's method.
pub fn gauss_legendre(k: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; k];
    let mut weights = vec![0.0; k];
    for i in 0..k {
        let mut x = (PI * (i as f64 + 0.75) / (k as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for j in 2..=k {
                let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if k == 0 { 1.0 } else if k == 1 { x } else { p1 };
            let pm = if k == 1 { 1.0 } else { p0 };
            dp = k as f64 * (x * p - pm) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// Composite Gauss–Legendre rule.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuadratureRule {
    pub panels: usize,
    pub nodes: usize,
}

impl Default for QuadratureRule {
    fn default() -> Self {
        Self { panels: 8, nodes: 4 }
    }
}

impl QuadratureRule {
    /// `(u, weight)` pairs on `[a, b]`.
    pub fn points(&self, a: f64, b: f64) -> Result<Vec<(f64, f64)>, EnergyError> {
        if self.panels == 0 || self.nodes == 0 {
            return Err(EnergyError::EmptyRule);
        }
        let (x, w) = gauss_legendre(self.nodes);
        let h = (b - a) / self.panels as f64;
        let mut out = Vec::with_capacity(self.panels * self.nodes);
        for p in 0..self.panels {
            let mid = a + (p as f64 + 0.5) * h;
            for (xi, wi) in x.iter().zip(&w) {
                out.push((mid + 0.5 * h * xi, 0.5 * h * wi));
            }
        }
        Ok(out)
    }

    pub fn refined(&self) -> Self {
        Self {
            panels: 2 * self.panels,
            nodes: self.nodes,
        }
    }
}

type Generator = dyn Fn(f64) -> (Vec<f64>, Vec<f64>) + Send + Sync;

/// A path `u ↦ ψ_u` over `[a, b]` of potentials relative to `base`,
/// together with `ψ̇_u`.
#[derive(Clone)]
pub struct PotentialPath {
    base: ConformalTorus,
    a: f64,
    b: f64,
    generator: Arc<Generator>,
}

impl std::fmt::Debug for PotentialPath {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PotentialPath")
            .field("a", &self.a)
            .field("b", &self.b)
            .finish_non_exhaustive()
    }
}

/// One node of a sampled path.
#[derive(Clone, Debug)]
pub struct PathSample {
    pub u: f64,
    pub weight: f64,
    pub psi: Vec<f64>,
    pub psi_dot: Vec<f64>,
    pub metric: ConformalTorus,
}

impl PotentialPath {
    pub fn new(
        base: ConformalTorus,
        a: f64,
        b: f64,
        generator: impl Fn(f64) -> (Vec<f64>, Vec<f64>) + Send + Sync + 'static,
    ) -> Self {
        Self {
            base,
            a,
            b,
            generator: Arc::new(generator),
        }
    }

    /// `ψ_u = (1 − u) ψ₁ + u ψ₂` on `[0, 1]`.
    pub fn straight(base: ConformalTorus, psi1: Vec<f64>, psi2: Vec<f64>) -> Self {
        let dot: Vec<f64> = psi2.iter().zip(&psi1).map(|(b, a)| b - a).collect();
        Self::new(base, 0.0, 1.0, move |u| {
            let psi = psi1.iter().zip(&dot).map(|(p, d)| p + u * d).collect();
            (psi, dot.clone())
        })
    }

    /// Quadratic path through `mid` at `u = 1/2`, from `psi1` to `psi2`.
    pub fn through(base: ConformalTorus, psi1: Vec<f64>, mid: Vec<f64>, psi2: Vec<f64>) -> Self {
        Self::new(base, 0.0, 1.0, move |u| {
            let l0 = 2.0 * (u - 0.5) * (u - 1.0);
            let l1 = -4.0 * u * (u - 1.0);
            let l2 = 2.0 * u * (u - 0.5);
            let d0 = 4.0 * u - 3.0;
            let d1 = -8.0 * u + 4.0;
            let d2 = 4.0 * u - 1.0;
            let mut psi = Vec::with_capacity(psi1.len());
            let mut dot = Vec::with_capacity(psi1.len());
            for k in 0..psi1.len() {
                psi.push(l0 * psi1[k] + l1 * mid[k] + l2 * psi2[k]);
                dot.push(d0 * psi1[k] + d1 * mid[k] + d2 * psi2[k]);
            }
            (psi, dot)
        })
    }

    /// The path `v ↦ ψ_{σ(v)}` on `[σ⁻¹(a), σ⁻¹(b)] = [c, d]` for an increasing `σ`.
    pub fn reparametrized(
        &self,
        c: f64,
        d: f64,
        sigma: impl Fn(f64) -> f64 + Send + Sync + 'static,
        sigma_dot: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        let inner = self.generator.clone();
        Self::new(self.base.clone(), c, d, move |v| {
            let (psi, dot) = inner(sigma(v));
            let s = sigma_dot(v);
            (psi, dot.into_iter().map(|x| x * s).collect())
        })
    }

    /// The same path run backwards.
    pub fn reversed(&self) -> Self {
        let (a, b) = (self.a, self.b);
        self.reparametrized(a, b, move |v| a + b - v, |_| -1.0)
    }

    pub fn base(&self) -> &ConformalTorus {
        &self.base
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    /// `(ψ_u, ψ̇_u)`.
    pub fn at(&self, u: f64) -> (Vec<f64>, Vec<f64>) {
        (self.generator)(u)
    }

    /// Metric of `ψ_u`; fails outside the admissible set.
    pub fn metric_at(&self, u: f64) -> Result<ConformalTorus, EnergyError> {
        let (psi, _) = self.at(u);
        let min = admissibility_min(&self.base, &psi)?;
        if !(min > 0.0) {
            return Err(EnergyError::Inadmissible { u, min });
        }
        Ok(potential_to_conformal(&KahlerPotential::new(self.base.clone(), psi)?))
    }

    pub fn sample(&self, rule: QuadratureRule) -> Result<Vec<PathSample>, EnergyError> {
        rule.points(self.a, self.b)?
            .into_iter()
            .map(|(u, weight)| {
                let metric = self.metric_at(u)?;
                let (psi, psi_dot) = self.at(u);
                Ok(PathSample {
                    u,
                    weight,
                    psi,
                    psi_dot,
                    metric,
                })
            })
            .collect()
    }

    /// Smallest `min(1 − Δψ_u)` over a uniform scan of `points` values of `u`.
    pub fn admissibility_scan(&self, points: usize) -> Result<f64, EnergyError> {
        let mut worst = f64::INFINITY;
        for k in 0..=points.max(1) {
            let u = self.a + (self.b - self.a) * k as f64 / points.max(1) as f64;
            worst = worst.min(admissibility_min(&self.base, &self.at(u).0)?);
        }
        Ok(worst)
    }

    /// `∫ ψ̇_u (s_u − s₀) dv_u`, the `u`-derivative of `log Q_L / c_n`.
    pub fn integrand(&self, u: f64) -> Result<f64, EnergyError> {
        let m = self.metric_at(u)?;
        let (_, dot) = self.at(u);
        Ok(mabuchi_integrand(&m, &dot))
    }
}

/// `∫ ψ̇ (s − s₀) dv` for the metric `m`.
pub fn mabuchi_integrand(m: &ConformalTorus, psi_dot: &[f64]) -> f64 {
    let s0 = m.s0();
    let f: Vec<f64> = m.scalar_curvature().iter().zip(psi_dot).map(|(s, d)| d * (s - s0)).collect();
    m.integrate(&f).expect("field matches shape")
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KEnergyValue {
    pub value: f64,
    pub quadrature_error: f64,
    pub c_n: f64,
}

fn path_integral(path: &PotentialPath, rule: QuadratureRule) -> Result<(f64, f64), EnergyError> {
    let mut acc = 0.0;
    let mut abs = 0.0;
    for s in path.sample(rule)? {
        let v = s.weight * mabuchi_integrand(&s.metric, &s.psi_dot);
        acc += v;
        abs += v.abs();
    }
    Ok((acc, abs))
}

/// `M` along `path` with the given rule. The error estimate is the change
/// under panel doubling plus a rounding floor.
pub fn k_energy_with(path: &PotentialPath, rule: QuadratureRule) -> Result<KEnergyValue, EnergyError> {
    let (coarse, _) = path_integral(path, rule)?;
    let (fine, abs) = path_integral(path, rule.refined())?;
    Ok(KEnergyValue {
        value: -fine,
        quadrature_error: (fine - coarse).abs() + 1e3 * f64::EPSILON * abs,
        c_n: c_one(path.base()),
    })
}

pub fn k_energy(path: &PotentialPath) -> Result<KEnergyValue, EnergyError> {
    k_energy_with(path, QuadratureRule::default())
}

/// Potential of `m` relative to the flat metric of its class.
pub fn flat_potential(m: &ConformalTorus) -> Result<(ConformalTorus, Vec<f64>), EnergyError> {
    let flat = ConformalTorus::flat(m.shape()).with_area(m.area());
    let psi = potential_relative_to(m, &flat)?.psi().to_vec();
    Ok((flat, psi))
}

/// `M(g₁, g₂)` along the straight segment between their potentials over
/// the common flat metric. Segments stay admissible because the
/// admissible set is convex.
pub fn k_energy_between(g1: &ConformalTorus, g2: &ConformalTorus) -> Result<KEnergyValue, EnergyError> {
    g2.check_same_class(g1)?;
    let (flat, psi1) = flat_potential(g1)?;
    let psi2 = potential_relative_to(g2, &flat)?.psi().to_vec();
    k_energy(&PotentialPath::straight(flat, psi1, psi2))
}

/// `|M(g₁,g₂) + M(g₂,g₃) − M(g₁,g₃)|` and the summed quadrature errors.
pub fn k_energy_cocycle_check(
    g1: &ConformalTorus,
    g2: &ConformalTorus,
    g3: &ConformalTorus,
) -> Result<(f64, f64), EnergyError> {
    let a = k_energy_between(g1, g2)?;
    let b = k_energy_between(g2, g3)?;
    let c = k_energy_between(g1, g3)?;
    Ok((
        (a.value + b.value - c.value).abs(),
        a.quadrature_error + b.quadrature_error + c.quadrature_error,
    ))
}

/// `log Q_L(g) − log Q_L(base) = −c_n M(base, g)` with its quadrature error.
pub fn relative_ql_detailed(g: &ConformalTorus, base: &ConformalTorus) -> Result<(f64, f64), EnergyError> {
    let m = k_energy_between(base, g)?;
    Ok((-m.c_n * m.value, m.c_n * m.quadrature_error))
}

/// `log Q_L(g) − log Q_L(base)`.
#[allow(non_snake_case)]
pub fn relative_qL(g: &ConformalTorus, base: &ConformalTorus) -> Result<f64, EnergyError> {
    Ok(relative_ql_detailed(g, base)?.0)
}

/// K-energy `μ(g) = M(flat, g)` relative to the flat metric of the class.
pub fn k_energy_from_flat(g: &ConformalTorus) -> Result<KEnergyValue, EnergyError> {
    let flat = ConformalTorus::flat(g.shape()).with_area(g.area());
    k_energy_between(&flat, g)
}

/// `‖s − s₀‖_{L²(dv)}`.
pub fn critical_point_residual(g: &ConformalTorus) -> f64 {
    g.curvature_deviation_sq().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface_model::{random_field, BandLimited, TorusShape};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        for k in 1..=6 {
            let (x, w) = gauss_legendre(k);
            for deg in 0..2 * k {
                let q: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(deg as i32)).sum();
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg + 1) as f64 };
                assert!((q - exact).abs() < 1e-14, "k={k} deg={deg}");
            }
        }
    }

    #[test]
    fn composite_rule_weights_sum_to_length() {
        let pts = QuadratureRule::default().points(-1.0, 2.0).unwrap();
        assert_eq!(pts.len(), 32);
        assert!((pts.iter().map(|p| p.1).sum::<f64>() - 3.0).abs() < 1e-14);
        assert!(QuadratureRule { panels: 0, nodes: 4 }.points(0.0, 1.0).is_err());
    }

    #[test]
    fn c_n_values() {
        assert_eq!(c_n(1, 3.0), 6.0);
        assert_eq!(c_n(2, 1.0), 6.0);
        assert_eq!(c_n(3, 2.0), 32.0);
    }

    #[test]
    fn constant_path_has_zero_energy() {
        let s = TorusShape::square(16).unwrap();
        let base = ConformalTorus::flat(s);
        let psi = random_field(s, BandLimited::new(2, 0.002), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let path = PotentialPath::straight(base, psi.clone(), psi);
        assert_eq!(k_energy(&path).unwrap().value, 0.0);
    }

    #[test]
    fn constant_direction_has_zero_energy() {
        let s = TorusShape::square(16).unwrap();
        let base = ConformalTorus::flat(s);
        let psi = random_field(s, BandLimited::new(2, 0.002), &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let shifted: Vec<f64> = psi.iter().map(|v| v + 0.7).collect();
        let m = k_energy(&PotentialPath::straight(base, psi, shifted)).unwrap();
        assert!(m.value.abs() < 1e-10);
    }

    #[test]
    fn inadmissible_path_rejected() {
        let s = TorusShape::square(16).unwrap();
        let base = ConformalTorus::flat(s);
        let bad = s.sample(|x, _| (2.0 * PI * x).cos());
        let path = PotentialPath::straight(base, vec![0.0; 256], bad);
        assert!(matches!(k_energy(&path), Err(EnergyError::Inadmissible { .. })));
        assert!(path.admissibility_scan(10).unwrap() < 0.0);
    }

    #[test]
    fn flat_metric_is_critical() {
        let s = TorusShape::square(16).unwrap();
        assert_eq!(critical_point_residual(&ConformalTorus::flat(s).rescaled(0.3)), 0.0);
    }
}
