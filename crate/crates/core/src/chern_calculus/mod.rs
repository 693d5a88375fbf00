//! Chern classes, Todd components and the variational integrands of the
//! Quillen norm, evaluated pointwise on [`FormMatrix`] curvature data.
//!
//! Two normalizations of the Chern forms appear:
//!
//! * geometric: `c_j(Ω) = e_j(Ω / 2πi)`, the generalized Kronecker delta
//!   formula. [`chern_from_curvature`] returns these.
//! * bare: `c_j(R) = e_j(R)` with no `2πi` factors. The derivative formula
//!   [`lemma21_derivative`] and the Todd integrand use this one and carry
//!   the `(1/2πi)^n` prefactor explicitly.
//!
//! The Kähler form of a pointwise hermitian metric `g_{jk̄}` is
//! `ω = (i/2) Σ g_{jk̄} dz_j ∧ dz̄_k`, and `g^{lk̄}` denotes the inverse with
//! `Σ_l g_{lm̄} g^{lk̄} = δ_{mk}`.

pub mod todd;
pub mod verify;

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

use crate::form_algebra::{ExtElement, FormError, FormMatrix, MAX_DIM};

pub use todd::{todd_components, ChernPolynomial, ToddExpansion};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChernError {
    #[error(transparent)]
    Form(#[from] FormError),
    #[error("order {order} outside the supported range (max {max})")]
    OrderOutOfRange { order: usize, max: usize },
    #[error("metric is not positive definite hermitian")]
    NotPositive,
    #[error("pointwise data inconsistent: supplied Laplacian {supplied} vs -2 tr(g^-1 Hess) = {expected}")]
    InconsistentData { supplied: f64, expected: f64 },
}

fn cx(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// `1 / (2πi)`.
pub fn inv_two_pi_i() -> Complex64 {
    cx(0.0, -1.0 / (2.0 * PI))
}

/// Chern forms `c_0..c_n` at a point.
#[derive(Clone, Debug, PartialEq)]
pub struct ChernVector {
    n: usize,
    classes: Vec<ExtElement>,
}

impl ChernVector {
    pub fn ambient(&self) -> usize {
        self.n
    }

    /// `c_j`; zero for `j` beyond the stored range.
    pub fn class(&self, j: usize) -> ExtElement {
        self.classes
            .get(j)
            .cloned()
            .unwrap_or_else(|| ExtElement::zero(self.n).expect("valid dimension"))
    }

    pub fn classes(&self) -> &[ExtElement] {
        &self.classes
    }

    /// Largest coefficient difference over all classes.
    pub fn distance(&self, other: &Self) -> Result<f64, ChernError> {
        let len = self.classes.len().max(other.classes.len());
        let mut d: f64 = 0.0;
        for j in 0..len {
            d = d.max(self.class(j).distance(&other.class(j))?);
        }
        Ok(d)
    }
}

fn permutations(k: usize) -> Vec<(Vec<usize>, f64)> {
    fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                rec(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut perms = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; k], &mut perms);
    perms
        .into_iter()
        .map(|p| {
            let mut inversions = 0;
            for a in 0..k {
                for b in a + 1..k {
                    if p[a] > p[b] {
                        inversions += 1;
                    }
                }
            }
            let s = if inversions % 2 == 0 { 1.0 } else { -1.0 };
            (p, s)
        })
        .collect()
}

fn distinct_tuples(dim: usize, j: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..j {
        let mut next = Vec::new();
        for t in &out {
            for i in 0..dim {
                if !t.contains(&i) {
                    let mut u = t.clone();
                    u.push(i);
                    next.push(u);
                }
            }
        }
        out = next;
    }
    out
}

/// `c_j(scale·R)` for `j = 0..dim` from the generalized Kronecker delta sum
/// `(1/j!) Σ δ^{l_1..l_j}_{k_1..k_j} R^{k_1}_{l_1} ∧ … ∧ R^{k_j}_{l_j}`.
pub fn chern_by_delta(r: &FormMatrix, scale: Complex64) -> Result<ChernVector, ChernError> {
    let n = r.ambient();
    let dim = r.dim();
    let mut classes = vec![ExtElement::one(n)?];
    for j in 1..=dim {
        let mut acc = ExtElement::zero(n)?;
        let perms = permutations(j);
        for ks in distinct_tuples(dim, j) {
            for (p, sign) in &perms {
                let mut prod = ExtElement::scalar(n, cx(*sign, 0.0))?;
                for (pos, &k) in ks.iter().enumerate() {
                    let l = ks[p[pos]];
                    prod = prod.wedge(r.get(k, l))?;
                    if prod.is_zero() {
                        break;
                    }
                }
                acc = acc.try_add(&prod)?;
            }
        }
        let fact: f64 = (1..=j).map(|x| x as f64).product();
        classes.push(acc.scale(scale.powu(j as u32) / fact));
    }
    Ok(ChernVector { n, classes })
}

/// Power sums `s_k = Tr((scale·R)^k)` for `k = 0..=kmax` (`s_0 = dim`).
pub fn power_sums(r: &FormMatrix, scale: Complex64, kmax: usize) -> Vec<ExtElement> {
    let scaled = r.scale(scale);
    let mut out = Vec::with_capacity(kmax + 1);
    let mut power = FormMatrix::identity(r.ambient(), r.dim()).expect("valid dimension");
    out.push(power.trace());
    for _ in 1..=kmax {
        power = power.mat_mul(&scaled).expect("same shape");
        out.push(power.trace());
    }
    out
}

/// Newton's identities: `c_j = (1/j) Σ_{k=1}^{j} (-1)^{k+1} c_{j-k} s_k`.
pub fn classes_from_power_sums(sums: &[ExtElement], jmax: usize) -> Result<Vec<ExtElement>, ChernError> {
    let n = sums[0].dim();
    let mut c = vec![ExtElement::one(n)?];
    for j in 1..=jmax {
        let mut acc = ExtElement::zero(n)?;
        for k in 1..=j {
            let sign = if (k + 1) % 2 == 0 { 1.0 } else { -1.0 };
            acc = acc.try_add(&c[j - k].wedge(&sums[k])?.scale_re(sign))?;
        }
        c.push(acc.scale_re(1.0 / j as f64));
    }
    Ok(c)
}

/// Inverse Newton identities: `s_k = (-1)^{k-1} k c_k + Σ_{i=1}^{k-1} (-1)^{i-1} c_i s_{k-i}`.
pub fn power_sums_from_classes(classes: &[ExtElement], kmax: usize, dim: usize) -> Result<Vec<ExtElement>, ChernError> {
    let n = classes[0].dim();
    let zero = ExtElement::zero(n)?;
    let c = |i: usize| classes.get(i).cloned().unwrap_or_else(|| zero.clone());
    let mut s = vec![ExtElement::scalar(n, cx(dim as f64, 0.0))?];
    for k in 1..=kmax {
        let sign = if (k - 1) % 2 == 0 { 1.0 } else { -1.0 };
        let mut acc = c(k).scale_re(sign * k as f64);
        for i in 1..k {
            let si = if (i - 1) % 2 == 0 { 1.0 } else { -1.0 };
            acc = acc.try_add(&c(i).wedge(&s[k - i])?.scale_re(si))?;
        }
        s.push(acc);
    }
    Ok(s)
}

/// Same classes as [`chern_by_delta`], computed through power sums and
/// Newton's identities.
pub fn chern_by_newton(r: &FormMatrix, scale: Complex64) -> Result<ChernVector, ChernError> {
    let sums = power_sums(r, scale, r.dim());
    let classes = classes_from_power_sums(&sums, r.dim())?;
    Ok(ChernVector {
        n: r.ambient(),
        classes,
    })
}

/// Geometric Chern forms `c_j(Ω)` of a curvature matrix of (1,1)-forms.
pub fn chern_from_curvature(omega: &FormMatrix) -> Result<ChernVector, ChernError> {
    omega.require_bidegree(1, 1)?;
    chern_by_delta(omega, inv_two_pi_i())
}

/// Bare classes `e_j(R)` used by the variational formulas.
pub fn bare_chern(r: &FormMatrix) -> Result<ChernVector, ChernError> {
    chern_by_delta(r, cx(1.0, 0.0))
}

/// `∂/∂b c_j(-Ω - bU)|_{b=0} = Σ_{k=0}^{j-1} (-1)^{j+k} Tr(Ω^k U) c_{j-k-1}(Ω)`
/// in the bare normalization.
pub fn lemma21_derivative(omega: &FormMatrix, u: &FormMatrix, j: usize) -> Result<ExtElement, ChernError> {
    let n = omega.ambient();
    if j == 0 || j > n + 1 {
        return Err(ChernError::OrderOutOfRange { order: j, max: n + 1 });
    }
    let classes = bare_chern(omega)?;
    let mut acc = ExtElement::zero(n)?;
    let mut omega_k = FormMatrix::identity(n, omega.dim())?;
    for k in 0..j {
        let tr = omega_k.mat_mul(u)?.trace();
        let sign = if (j + k) % 2 == 0 { 1.0 } else { -1.0 };
        acc = acc.try_add(&tr.wedge(&classes.class(j - k - 1))?.scale_re(sign))?;
        omega_k = omega_k.mat_mul(omega)?;
    }
    Ok(acc)
}

/// `(1/2)(1/2πi)^n ∂/∂b Td_{n+1}(-Ω - bU)|_{b=0}`: the pointwise integrand of
/// the variation of `log Q` for the trivial bundle.
pub fn variational_integrand(omega: &FormMatrix, u: &FormMatrix, n: usize) -> Result<ExtElement, ChernError> {
    if n == 0 || n > MAX_DIM {
        return Err(ChernError::OrderOutOfRange { order: n, max: MAX_DIM });
    }
    if omega.ambient() != n {
        return Err(FormError::AmbientMismatch(n, omega.ambient()).into());
    }
    let td = todd_components(n + 1)?;
    let poly = td.component(n + 1);
    let bare = bare_chern(omega)?;
    // Bare classes of -Ω: c_k(-Ω) = (-1)^k c_k(Ω).
    let mut at_minus: Vec<ExtElement> = (0..=td.vars())
        .map(|k| bare.class(k).scale_re(if k % 2 == 0 { 1.0 } else { -1.0 }))
        .collect();
    at_minus[0] = ExtElement::one(n)?;
    let mut acc = ExtElement::zero(n)?;
    for k in 1..=n + 1 {
        let dpoly = poly.partial(k);
        if dpoly.terms().next().is_none() {
            continue;
        }
        let dc = lemma21_derivative(omega, u, k)?;
        acc = acc.try_add(&dpoly.evaluate(&at_minus)?.wedge(&dc)?)?;
    }
    Ok(acc.scale(inv_two_pi_i().powu(n as u32) * 0.5))
}

/// `(1/48) Tr(Ω̃ U) c_1 - (1/48) Tr(U)(c_2 + c_1²)` with `Ω̃ = Ω/2πi` and
/// geometric classes: the closed form of the `n = 2` integrand.
pub fn closed_form_integrand_n2(omega: &FormMatrix, u: &FormMatrix) -> Result<ExtElement, ChernError> {
    if omega.ambient() != 2 {
        return Err(FormError::AmbientMismatch(2, omega.ambient()).into());
    }
    let c = chern_from_curvature(omega)?;
    let c1 = c.class(1);
    let c2 = c.class(2);
    let tr_omega_u = omega.scale(inv_two_pi_i()).mat_mul(u)?.trace();
    let tr_u = u.trace();
    let first = tr_omega_u.wedge(&c1)?.scale_re(1.0 / 48.0);
    let second = tr_u.wedge(&c2.try_add(&c1.wedge(&c1)?)?)?.scale_re(-1.0 / 48.0);
    Ok(first.try_add(&second)?)
}

/// Positive hermitian metric `g_{jk̄}` at a point.
#[derive(Clone, Debug, PartialEq)]
pub struct PointMetric {
    g: DMatrix<Complex64>,
    inverse: DMatrix<Complex64>,
}

impl PointMetric {
    pub fn new(g: DMatrix<Complex64>) -> Result<Self, ChernError> {
        let n = g.nrows();
        if n == 0 || n > MAX_DIM || g.ncols() != n {
            return Err(ChernError::NotPositive);
        }
        let herm = (&g - g.adjoint()).iter().map(|c| c.norm()).fold(0.0, f64::max);
        if herm > 1e-12 * (1.0 + g.norm()) {
            return Err(ChernError::NotPositive);
        }
        let min_eig = g.clone().symmetric_eigenvalues().min();
        if !(min_eig > 0.0) {
            return Err(ChernError::NotPositive);
        }
        let inverse = g.clone().try_inverse().ok_or(ChernError::NotPositive)?;
        Ok(Self { g, inverse })
    }

    pub fn identity(n: usize) -> Result<Self, ChernError> {
        Self::new(DMatrix::identity(n, n))
    }

    pub fn dim(&self) -> usize {
        self.g.nrows()
    }

    /// `g_{jk̄}`.
    pub fn lower(&self, j: usize, k: usize) -> Complex64 {
        self.g[(j, k)]
    }

    /// `g^{lk̄}`, normalized so that `Σ_l g_{lm̄} g^{lk̄} = δ_{mk}`.
    pub fn upper(&self, l: usize, k: usize) -> Complex64 {
        self.inverse[(k, l)]
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.g
    }

    /// `ω = (i/2) Σ g_{jk̄} dz_j ∧ dz̄_k`.
    pub fn kahler_form(&self) -> Result<ExtElement, ChernError> {
        let n = self.dim();
        let mut w = ExtElement::zero(n)?;
        for j in 0..n {
            for k in 0..n {
                let t = ExtElement::dz_dzbar(n, j, k)?.scale(cx(0.0, 0.5) * self.g[(j, k)]);
                w = w.try_add(&t)?;
            }
        }
        Ok(w)
    }
}

/// Curvature of a metric with constant holomorphic curvature `H`:
/// `Ω^j_k = -iH δ_{jk} ω + (H/2) Σ_m g_{km̄} dz_j ∧ dz̄_m`.
pub fn constant_h_curvature(h: f64, g: &PointMetric) -> Result<FormMatrix, ChernError> {
    let n = g.dim();
    let omega_form = g.kahler_form()?;
    let diag = omega_form.scale(cx(0.0, -h));
    Ok(FormMatrix::from_fn(n, n, |j, k| {
        let mut e = if j == k { diag.clone() } else { ExtElement::zero(n)? };
        for m in 0..n {
            e = e.try_add(&ExtElement::dz_dzbar(n, j, m)?.scale(g.lower(k, m) * (h / 2.0)))?;
        }
        Ok(e)
    })?)
}

fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `c_j = C(n+1, j) (-H/2π ω)^j`, the closed form for constant holomorphic
/// curvature.
pub fn constant_h_chern_classes(h: f64, g: &PointMetric) -> Result<ChernVector, ChernError> {
    let n = g.dim();
    let base = g.kahler_form()?.scale_re(-h / (2.0 * PI));
    let classes = (0..=n)
        .map(|j| base.wedge_pow(j).scale_re(binomial(n + 1, j)))
        .collect();
    Ok(ChernVector { n, classes })
}

/// Second derivatives `φ_{qk̄}` of a real potential at a point, together
/// with an independently supplied `Δφ`.
#[derive(Clone, Debug)]
pub struct PotentialHessian {
    hess: DMatrix<Complex64>,
    laplacian: f64,
}

impl PotentialHessian {
    /// Checks `Δφ = -2 Σ g^{qk̄} φ_{qk̄}` against the metric.
    pub fn new(hess: DMatrix<Complex64>, laplacian: f64, g: &PointMetric) -> Result<Self, ChernError> {
        let expected = -2.0 * trace_against(g, &hess).re;
        let tol = 1e-9 * (1.0 + expected.abs());
        if (expected - laplacian).abs() > tol || hess.nrows() != g.dim() {
            return Err(ChernError::InconsistentData {
                supplied: laplacian,
                expected,
            });
        }
        Ok(Self { hess, laplacian })
    }

    /// Builds the consistent Laplacian from the Hessian.
    pub fn from_hessian(hess: DMatrix<Complex64>, g: &PointMetric) -> Result<Self, ChernError> {
        let lap = -2.0 * trace_against(g, &hess).re;
        Self::new(hess, lap, g)
    }

    pub fn laplacian(&self) -> f64 {
        self.laplacian
    }

    pub fn entry(&self, q: usize, k: usize) -> Complex64 {
        self.hess[(q, k)]
    }

    /// `∂∂̄φ = Σ φ_{pk̄} dz_p ∧ dz̄_k`.
    pub fn ddbar(&self) -> Result<ExtElement, ChernError> {
        let n = self.hess.nrows();
        let mut e = ExtElement::zero(n)?;
        for p in 0..n {
            for k in 0..n {
                e = e.try_add(&ExtElement::dz_dzbar(n, p, k)?.scale(self.hess[(p, k)]))?;
            }
        }
        Ok(e)
    }
}

fn trace_against(g: &PointMetric, hess: &DMatrix<Complex64>) -> Complex64 {
    let n = g.dim();
    let mut acc = cx(0.0, 0.0);
    for q in 0..n.min(hess.nrows()) {
        for k in 0..n.min(hess.ncols()) {
            acc += g.upper(q, k) * hess[(q, k)];
        }
    }
    acc
}

/// Variation matrix `U^l_q = Σ_k g^{lk̄} φ_{qk̄}` of 0-forms.
pub fn variation_from_hessian(g: &PointMetric, hess: &PotentialHessian) -> Result<FormMatrix, ChernError> {
    let n = g.dim();
    Ok(FormMatrix::from_fn(n, n, |l, q| {
        let mut v = cx(0.0, 0.0);
        for k in 0..n {
            v += g.upper(l, k) * hess.entry(q, k);
        }
        ExtElement::scalar(n, v)
    })?)
}

/// Both sides of `Tr(Ω^j U) = -(Δφ/2)(-iHω)^j + ∂∂̄((H/2) φ (-iHω)^{j-1})`
/// for constant holomorphic curvature; `∂∂̄` acts only on `φ` because `ω`
/// is closed.
pub fn lemma42_trace(
    h: f64,
    g: &PointMetric,
    hess: &PotentialHessian,
    j: usize,
) -> Result<(ExtElement, ExtElement), ChernError> {
    if j == 0 {
        return Err(ChernError::OrderOutOfRange { order: 0, max: usize::MAX });
    }
    let omega = constant_h_curvature(h, g)?;
    let u = variation_from_hessian(g, hess)?;
    let lhs = omega.pow(j).mat_mul(&u)?.trace();
    let hw = g.kahler_form()?.scale(cx(0.0, -h));
    let first = hw.wedge_pow(j).scale_re(-hess.laplacian() / 2.0);
    let second = hw.wedge_pow(j - 1).wedge(&hess.ddbar()?)?.scale_re(h / 2.0);
    Ok((lhs, first.try_add(&second)?))
}
