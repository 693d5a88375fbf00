//! Randomized identity suites for the Chern calculus, with a finite
//! difference oracle in the variation parameter `b`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::{
    bare_chern, chern_by_delta, chern_by_newton, chern_from_curvature, classes_from_power_sums,
    closed_form_integrand_n2, constant_h_chern_classes, constant_h_curvature, lemma21_derivative,
    lemma42_trace, power_sums, power_sums_from_classes, todd::Rational, todd_components,
    variational_integrand, variation_from_hessian, ChernError, PointMetric, PotentialHessian,
};
use crate::form_algebra::{ExtElement, FormMatrix, MAX_DIM};

pub const DERIVATIVE_TOLERANCE: f64 = 1e-8;
pub const IDENTITY_TOLERANCE: f64 = 1e-10;

fn normal<R: Rng>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

fn cnormal<R: Rng>(rng: &mut R) -> Complex64 {
    Complex64::new(normal(rng), normal(rng))
}

/// `n×n` matrix of random (1,1)-forms.
pub fn random_curvature<R: Rng>(n: usize, rng: &mut R) -> Result<FormMatrix, ChernError> {
    Ok(FormMatrix::from_fn(n, n, |_, _| {
        let mut e = ExtElement::zero(n)?;
        for p in 0..n {
            for k in 0..n {
                e = e.try_add(&ExtElement::dz_dzbar(n, p, k)?.scale(cnormal(rng)))?;
            }
        }
        Ok(e)
    })?)
}

/// `n×n` matrix of random complex 0-forms.
pub fn random_scalar_matrix<R: Rng>(n: usize, rng: &mut R) -> Result<FormMatrix, ChernError> {
    let vals: Vec<Complex64> = (0..n * n).map(|_| cnormal(rng)).collect();
    Ok(FormMatrix::from_scalars(n, n, &vals)?)
}

/// Random positive hermitian `g = A A* + I/2`.
pub fn random_metric<R: Rng>(n: usize, rng: &mut R) -> Result<PointMetric, ChernError> {
    let a = DMatrix::from_fn(n, n, |_, _| cnormal(rng) * 0.5);
    let g = &a * a.adjoint() + DMatrix::identity(n, n) * Complex64::new(0.5, 0.0);
    PointMetric::new((&g + g.adjoint()) * Complex64::new(0.5, 0.0))
}

/// Random hermitian Hessian `φ_{qk̄}` of a real potential.
pub fn random_hessian<R: Rng>(n: usize, rng: &mut R) -> DMatrix<Complex64> {
    let b = DMatrix::from_fn(n, n, |_, _| cnormal(rng));
    (&b + b.adjoint()) * Complex64::new(0.5, 0.0)
}

fn scaled_distance(a: &ExtElement, b: &ExtElement) -> Result<f64, ChernError> {
    let scale = 1.0f64.max(a.max_abs()).max(b.max_abs());
    Ok(a.distance(b)? / scale)
}

/// Finite-difference oracle for `∂/∂b c_j(-Ω - bU)|_{b=0}` (bare classes):
/// central differences with two Richardson levels, exact for the
/// polynomial-in-`b` dependence up to degree 6.
pub fn chern_derivative_fd(omega: &FormMatrix, u: &FormMatrix, j: usize, b: f64) -> Result<ExtElement, ChernError> {
    let class_at = |t: f64| -> Result<ExtElement, ChernError> {
        let m = omega.scale_re(-1.0).try_add(&u.scale_re(-t))?;
        Ok(bare_chern(&m)?.class(j))
    };
    let central = |h: f64| -> Result<ExtElement, ChernError> {
        Ok(class_at(h)?.try_add(&class_at(-h)?.scale_re(-1.0))?.scale_re(0.5 / h))
    };
    let d1 = central(b)?;
    let d2 = central(b / 2.0)?;
    let d4 = central(b / 4.0)?;
    let r1 = d2.scale_re(4.0 / 3.0).try_add(&d1.scale_re(-1.0 / 3.0))?;
    let r2 = d4.scale_re(4.0 / 3.0).try_add(&d2.scale_re(-1.0 / 3.0))?;
    Ok(r2.scale_re(16.0 / 15.0).try_add(&r1.scale_re(-1.0 / 15.0))?)
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct ResidualSummary {
    /// Derivative formula vs finite differences in `b`.
    pub derivative_fd: f64,
    /// Kronecker delta vs Newton power-sum route for `c_j`.
    pub chern_delta_vs_newton: f64,
    /// classes -> power sums -> classes.
    pub newton_round_trip: f64,
    /// Constant holomorphic curvature classes vs the binomial closed form.
    pub constant_h_chern: f64,
    /// Both sides of the `Tr(Ω^j U)` identity for constant curvature.
    pub constant_h_trace: f64,
    /// Todd pipeline vs the closed-form `n = 2` integrand (only for `n = 2`).
    pub n2_integrand: Option<f64>,
    /// Spread of `integrand / (Δφ ωⁿ)` over Hessians at a constant
    /// holomorphic curvature point: zero when the integrand is a fixed
    /// multiple of the exact form `Δφ ωⁿ`.
    pub constant_h_exactness: f64,
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct ChernReport {
    pub n: usize,
    pub trials: usize,
    pub seed: u64,
    pub max_residuals: ResidualSummary,
    /// `Td_3 = c_1 c_2 / 24` exactly, which is what reproduces the `1/48`
    /// coefficients of the `n = 2` integrand.
    pub todd_n2_exact: bool,
}

impl ChernReport {
    pub fn passes(&self) -> bool {
        let r = &self.max_residuals;
        r.derivative_fd < DERIVATIVE_TOLERANCE
            && r.chern_delta_vs_newton < IDENTITY_TOLERANCE
            && r.newton_round_trip < IDENTITY_TOLERANCE
            && r.constant_h_chern < IDENTITY_TOLERANCE
            && r.constant_h_trace < IDENTITY_TOLERANCE
            && r.n2_integrand.is_none_or(|v| v < IDENTITY_TOLERANCE)
            && r.constant_h_exactness < IDENTITY_TOLERANCE
            && self.todd_n2_exact
    }
}

/// Top coefficient of the variational integrand at a constant holomorphic
/// curvature point divided by that of `Δφ ωⁿ`.
pub fn constant_h_integrand_ratio(
    h: f64,
    g: &PointMetric,
    hess: DMatrix<Complex64>,
) -> Result<Complex64, ChernError> {
    let n = g.dim();
    let hess = PotentialHessian::from_hessian(hess, g)?;
    let omega = constant_h_curvature(h, g)?;
    let u = variation_from_hessian(g, &hess)?;
    let integrand = variational_integrand(&omega, &u, n)?.top_coefficient();
    let reference = g.kahler_form()?.wedge_pow(n).top_coefficient() * hess.laplacian();
    Ok(integrand / reference)
}

fn todd_n2_exact() -> Result<bool, ChernError> {
    let td = todd_components(3)?;
    let p = td.component(3);
    Ok(p.terms().count() == 1 && p.coefficient(&[1, 1, 0]) == Rational::new(1, 24))
}

/// Runs every identity suite on `trials` random instances in dimension `n`.
pub fn run_suite(n: usize, trials: usize, seed: u64) -> Result<ChernReport, ChernError> {
    if n == 0 || n > MAX_DIM {
        return Err(ChernError::OrderOutOfRange { order: n, max: MAX_DIM });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut r = ResidualSummary {
        derivative_fd: 0.0,
        chern_delta_vs_newton: 0.0,
        newton_round_trip: 0.0,
        constant_h_chern: 0.0,
        constant_h_trace: 0.0,
        n2_integrand: (n == 2).then_some(0.0),
        constant_h_exactness: 0.0,
    };
    let geometric = super::inv_two_pi_i();
    for _ in 0..trials {
        let omega = random_curvature(n, &mut rng)?;
        let u = random_scalar_matrix(n, &mut rng)?;

        for j in 1..=n + 1 {
            let closed = lemma21_derivative(&omega, &u, j)?;
            let fd = chern_derivative_fd(&omega, &u, j, 0.1)?;
            r.derivative_fd = r.derivative_fd.max(scaled_distance(&closed, &fd)?);
        }

        let delta = chern_by_delta(&omega, geometric)?;
        let newton = chern_by_newton(&omega, geometric)?;
        for j in 0..=n {
            r.chern_delta_vs_newton = r
                .chern_delta_vs_newton
                .max(scaled_distance(&delta.class(j), &newton.class(j))?);
        }

        let sums = power_sums_from_classes(delta.classes(), n, n)?;
        let direct = power_sums(&omega, geometric, n);
        let back = classes_from_power_sums(&sums, n)?;
        for k in 0..=n {
            r.newton_round_trip = r
                .newton_round_trip
                .max(scaled_distance(&sums[k], &direct[k])?)
                .max(scaled_distance(&back[k], &delta.class(k))?);
        }

        let g = random_metric(n, &mut rng)?;
        let h: f64 = 2.0 * normal(&mut rng);
        let from_curv = chern_from_curvature(&constant_h_curvature(h, &g)?)?;
        let closed_h = constant_h_chern_classes(h, &g)?;
        for j in 0..=n {
            r.constant_h_chern = r
                .constant_h_chern
                .max(scaled_distance(&from_curv.class(j), &closed_h.class(j))?);
        }

        let hess = PotentialHessian::from_hessian(random_hessian(n, &mut rng), &g)?;
        for j in 1..=n + 1 {
            let (lhs, rhs) = lemma42_trace(h, &g, &hess, j)?;
            r.constant_h_trace = r.constant_h_trace.max(scaled_distance(&lhs, &rhs)?);
        }

        let ratios = (0..3)
            .map(|_| constant_h_integrand_ratio(h, &g, random_hessian(n, &mut rng)))
            .collect::<Result<Vec<_>, _>>()?;
        for w in &ratios[1..] {
            let d = (w - ratios[0]).norm() / 1.0f64.max(ratios[0].norm());
            r.constant_h_exactness = r.constant_h_exactness.max(d);
        }

        if n == 2 {
            let pipeline = variational_integrand(&omega, &u, 2)?;
            let closed = closed_form_integrand_n2(&omega, &u)?;
            let d = scaled_distance(&pipeline, &closed)?;
            r.n2_integrand = r.n2_integrand.map(|v| v.max(d));
            // Also on the physically relevant U built from a Hessian.
            let u_h = variation_from_hessian(&g, &hess)?;
            let d = scaled_distance(
                &variational_integrand(&omega, &u_h, 2)?,
                &closed_form_integrand_n2(&omega, &u_h)?,
            )?;
            r.n2_integrand = r.n2_integrand.map(|v| v.max(d));
        }
    }
    Ok(ChernReport {
        n,
        trials,
        seed,
        max_residuals: r,
        todd_n2_exact: todd_n2_exact()?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suites_pass_in_low_dimensions() {
        for n in 1..=3 {
            let report = run_suite(n, 10, 11).unwrap();
            assert!(report.passes(), "{report:?}");
        }
    }

    #[test]
    fn fd_oracle_is_exact_on_low_order_classes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let omega = random_curvature(2, &mut rng).unwrap();
        let u = random_scalar_matrix(2, &mut rng).unwrap();
        let fd = chern_derivative_fd(&omega, &u, 1, 0.1).unwrap();
        assert!(fd.distance(&u.trace().scale_re(-1.0)).unwrap() < 1e-12);
    }

    #[test]
    fn dimension_bounds() {
        assert!(run_suite(0, 1, 0).is_err());
        assert!(run_suite(MAX_DIM + 1, 1, 0).is_err());
    }
}
