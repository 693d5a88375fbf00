//! Pointwise exterior algebra over `dz_1..dz_n, dz̄_1..dz̄_n` with complex
//! coefficients, and square matrices of such forms.
//!
//! Generators are ordered `dz_1 < .. < dz_n < dz̄_1 < .. < dz̄_n`; a basis
//! monomial is a bitmask over that ordering (bit `p` for `dz_{p+1}`, bit
//! `n + k` for `dz̄_{k+1}`), stored in increasing generator order. The
//! volume orientation used by [`ExtElement::top_coefficient`] is
//! `dz_1∧dz̄_1∧dz_2∧dz̄_2∧…∧dz_n∧dz̄_n`.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use thiserror::Error;

/// Largest supported complex dimension. Brute-force term counts grow as 4ⁿ.
pub const MAX_DIM: usize = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FormError {
    #[error("ambient dimension mismatch: {0} vs {1}")]
    AmbientMismatch(usize, usize),
    #[error("matrix dimension mismatch: {0} vs {1}")]
    MatrixMismatch(usize, usize),
    #[error("complex dimension {0} outside 1..={MAX_DIM}")]
    BadDimension(usize),
    #[error("index {index} out of range for dimension {n}")]
    BadIndex { index: usize, n: usize },
    #[error("form of bidegree {found:?} where {expected:?} was required")]
    WrongBidegree {
        expected: (usize, usize),
        found: (usize, usize),
    },
}

/// A basis monomial `dz_I ∧ dz̄_J` in canonical generator order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Monomial(u16);

impl Monomial {
    pub const ONE: Monomial = Monomial(0);

    pub fn bits(self) -> u16 {
        self.0
    }

    pub fn degree(self) -> usize {
        self.0.count_ones() as usize
    }

    /// Holomorphic indices (0-based, increasing).
    pub fn holomorphic(self, n: usize) -> Vec<usize> {
        (0..n).filter(|&p| self.0 & (1 << p) != 0).collect()
    }

    /// Antiholomorphic indices (0-based, increasing).
    pub fn antiholomorphic(self, n: usize) -> Vec<usize> {
        (0..n).filter(|&k| self.0 & (1 << (n + k)) != 0).collect()
    }

    pub fn bidegree(self, n: usize) -> (usize, usize) {
        let low = (1u16 << n) - 1;
        (
            (self.0 & low).count_ones() as usize,
            ((self.0 >> n) & low).count_ones() as usize,
        )
    }

    /// Product of two monomials with its sign, or `None` when they share a
    /// generator.
    fn wedge(self, other: Monomial) -> Option<(Monomial, f64)> {
        if self.0 & other.0 != 0 {
            return None;
        }
        // Sign is (-1)^{#(i in self, j in other, i > j)}.
        let mut swaps = 0u32;
        let mut rest = other.0;
        while rest != 0 {
            let j = rest.trailing_zeros();
            swaps += (self.0 >> (j + 1)).count_ones();
            rest &= rest - 1;
        }
        let sign = if swaps % 2 == 0 { 1.0 } else { -1.0 };
        Some((Monomial(self.0 | other.0), sign))
    }
}

/// Element of the complexified exterior algebra at a point of an
/// `n`-dimensional complex manifold. Zero coefficients are never stored.
#[derive(Clone, PartialEq)]
pub struct ExtElement {
    n: usize,
    terms: BTreeMap<Monomial, Complex64>,
}

impl fmt::Debug for ExtElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ExtElement(n={}) {{", self.n)?;
        for (m, c) in &self.terms {
            write!(
                f,
                " ({:?};{:?}):{}",
                m.holomorphic(self.n),
                m.antiholomorphic(self.n),
                c
            )?;
        }
        write!(f, " }}")
    }
}

fn check_dim(n: usize) -> Result<(), FormError> {
    if n == 0 || n > MAX_DIM {
        Err(FormError::BadDimension(n))
    } else {
        Ok(())
    }
}

impl ExtElement {
    pub fn zero(n: usize) -> Result<Self, FormError> {
        check_dim(n)?;
        Ok(Self {
            n,
            terms: BTreeMap::new(),
        })
    }

    pub fn scalar(n: usize, c: Complex64) -> Result<Self, FormError> {
        let mut e = Self::zero(n)?;
        e.insert(Monomial::ONE, c);
        Ok(e)
    }

    pub fn one(n: usize) -> Result<Self, FormError> {
        Self::scalar(n, Complex64::new(1.0, 0.0))
    }

    /// `dz_p` with 0-based `p`.
    pub fn dz(n: usize, p: usize) -> Result<Self, FormError> {
        check_dim(n)?;
        if p >= n {
            return Err(FormError::BadIndex { index: p, n });
        }
        let mut e = Self::zero(n)?;
        e.insert(Monomial(1 << p), Complex64::new(1.0, 0.0));
        Ok(e)
    }

    /// `dz̄_k` with 0-based `k`.
    pub fn dzbar(n: usize, k: usize) -> Result<Self, FormError> {
        check_dim(n)?;
        if k >= n {
            return Err(FormError::BadIndex { index: k, n });
        }
        let mut e = Self::zero(n)?;
        e.insert(Monomial(1 << (n + k)), Complex64::new(1.0, 0.0));
        Ok(e)
    }

    /// `dz_p ∧ dz̄_k`.
    pub fn dz_dzbar(n: usize, p: usize, k: usize) -> Result<Self, FormError> {
        Self::dz(n, p)?.wedge(&Self::dzbar(n, k)?)
    }

    /// Builds an element from raw `(holomorphic, antiholomorphic)` index
    /// lists, which need not be sorted; the sign of the reordering is applied.
    pub fn from_indices(
        n: usize,
        hol: &[usize],
        antihol: &[usize],
        c: Complex64,
    ) -> Result<Self, FormError> {
        let mut acc = Self::scalar(n, c)?;
        for &p in hol {
            acc = acc.wedge(&Self::dz(n, p)?)?;
        }
        for &k in antihol {
            acc = acc.wedge(&Self::dzbar(n, k)?)?;
        }
        Ok(acc)
    }

    fn insert(&mut self, m: Monomial, c: Complex64) {
        if c == Complex64::new(0.0, 0.0) {
            return;
        }
        let slot = self.terms.entry(m).or_insert(Complex64::new(0.0, 0.0));
        *slot += c;
        if *slot == Complex64::new(0.0, 0.0) {
            self.terms.remove(&m);
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn terms(&self) -> impl Iterator<Item = (Monomial, Complex64)> + '_ {
        self.terms.iter().map(|(m, c)| (*m, *c))
    }

    pub fn coefficient(&self, m: Monomial) -> Complex64 {
        self.terms.get(&m).copied().unwrap_or_default()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Largest coefficient modulus (0 for the zero element).
    pub fn max_abs(&self) -> f64 {
        self.terms.values().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Re-canonicalizes: drops any exact zeros. Idempotent.
    pub fn canonical(&self) -> Self {
        let mut out = Self {
            n: self.n,
            terms: BTreeMap::new(),
        };
        for (m, c) in &self.terms {
            out.insert(*m, *c);
        }
        out
    }

    /// `Some(d)` when every term has total degree `d`.
    pub fn pure_degree(&self) -> Option<usize> {
        let mut it = self.terms.keys().map(|m| m.degree());
        let first = it.next().unwrap_or(0);
        it.all(|d| d == first).then_some(first)
    }

    /// `Some((p, q))` when every term has bidegree `(p, q)`; zero counts as
    /// any bidegree and reports `None` only when terms disagree.
    pub fn pure_bidegree(&self) -> Option<(usize, usize)> {
        let mut it = self.terms.keys().map(|m| m.bidegree(self.n));
        let first = it.next().unwrap_or((0, 0));
        it.all(|d| d == first).then_some(first)
    }

    fn same_dim(&self, other: &Self) -> Result<(), FormError> {
        if self.n != other.n {
            Err(FormError::AmbientMismatch(self.n, other.n))
        } else {
            Ok(())
        }
    }

    pub fn try_add(&self, other: &Self) -> Result<Self, FormError> {
        self.same_dim(other)?;
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.insert(*m, *c);
        }
        Ok(out)
    }

    pub fn scale(&self, c: Complex64) -> Self {
        let mut out = Self {
            n: self.n,
            terms: BTreeMap::new(),
        };
        for (m, v) in &self.terms {
            out.insert(*m, v * c);
        }
        out
    }

    pub fn scale_re(&self, c: f64) -> Self {
        self.scale(Complex64::new(c, 0.0))
    }

    /// Graded-commutative wedge product.
    pub fn wedge(&self, other: &Self) -> Result<Self, FormError> {
        self.same_dim(other)?;
        let mut out = Self {
            n: self.n,
            terms: BTreeMap::new(),
        };
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                if let Some((m, sign)) = ma.wedge(*mb) {
                    out.insert(m, ca * cb * sign);
                }
            }
        }
        Ok(out)
    }

    /// `self ∧ self ∧ … ∧ self` (`k` factors; `k = 0` gives 1).
    pub fn wedge_pow(&self, k: usize) -> Self {
        let mut acc = Self::one(self.n).expect("dimension already validated");
        for _ in 0..k {
            acc = acc.wedge(self).expect("same ambient");
        }
        acc
    }

    /// Sign of the orientation form `dz_1∧dz̄_1∧…∧dz_n∧dz̄_n` relative to
    /// the canonical top monomial `dz_1∧…∧dz_n∧dz̄_1∧…∧dz̄_n`.
    pub fn orientation_sign(n: usize) -> Result<f64, FormError> {
        let mut vol = Self::one(n)?;
        for p in 0..n {
            vol = vol.wedge(&Self::dz_dzbar(n, p, p)?)?;
        }
        let top = Monomial(((1u32 << (2 * n)) - 1) as u16);
        Ok(vol.coefficient(top).re)
    }

    /// Coefficient of the top-degree part with respect to the volume
    /// orientation `dz_1∧dz̄_1∧…∧dz_n∧dz̄_n`.
    pub fn top_coefficient(&self) -> Complex64 {
        let top = Monomial(((1u32 << (2 * self.n)) - 1) as u16);
        let sign = Self::orientation_sign(self.n).expect("dimension already validated");
        self.coefficient(top) * sign
    }

    /// Part of total degree `d`.
    pub fn degree_part(&self, d: usize) -> Self {
        Self {
            n: self.n,
            terms: self
                .terms
                .iter()
                .filter(|(m, _)| m.degree() == d)
                .map(|(m, c)| (*m, *c))
                .collect(),
        }
    }

    /// Largest coefficient modulus of `self - other`.
    pub fn distance(&self, other: &Self) -> Result<f64, FormError> {
        Ok(self.try_add(&other.scale_re(-1.0))?.max_abs())
    }
}

impl Add for &ExtElement {
    type Output = ExtElement;
    fn add(self, rhs: &ExtElement) -> ExtElement {
        self.try_add(rhs).expect("ambient dimension mismatch")
    }
}

impl Sub for &ExtElement {
    type Output = ExtElement;
    fn sub(self, rhs: &ExtElement) -> ExtElement {
        self.try_add(&rhs.scale_re(-1.0))
            .expect("ambient dimension mismatch")
    }
}

impl Neg for &ExtElement {
    type Output = ExtElement;
    fn neg(self) -> ExtElement {
        self.scale_re(-1.0)
    }
}

impl Mul for &ExtElement {
    type Output = ExtElement;
    fn mul(self, rhs: &ExtElement) -> ExtElement {
        self.wedge(rhs).expect("ambient dimension mismatch")
    }
}

/// Square matrix of forms; entries multiply by wedge product.
#[derive(Clone, Debug, PartialEq)]
pub struct FormMatrix {
    n: usize,
    dim: usize,
    entries: Vec<ExtElement>,
}

impl FormMatrix {
    pub fn zero(n: usize, dim: usize) -> Result<Self, FormError> {
        let z = ExtElement::zero(n)?;
        Ok(Self {
            n,
            dim,
            entries: vec![z; dim * dim],
        })
    }

    /// Scalar identity matrix.
    pub fn identity(n: usize, dim: usize) -> Result<Self, FormError> {
        let mut m = Self::zero(n, dim)?;
        for i in 0..dim {
            m.set(i, i, ExtElement::one(n)?);
        }
        Ok(m)
    }

    pub fn from_fn<F>(n: usize, dim: usize, mut f: F) -> Result<Self, FormError>
    where
        F: FnMut(usize, usize) -> Result<ExtElement, FormError>,
    {
        let mut entries = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                let e = f(i, j)?;
                if e.dim() != n {
                    return Err(FormError::AmbientMismatch(n, e.dim()));
                }
                entries.push(e);
            }
        }
        Ok(Self { n, dim, entries })
    }

    /// Matrix of 0-forms from complex scalars (row-major).
    pub fn from_scalars(n: usize, dim: usize, values: &[Complex64]) -> Result<Self, FormError> {
        if values.len() != dim * dim {
            return Err(FormError::MatrixMismatch(values.len(), dim * dim));
        }
        Self::from_fn(n, dim, |i, j| ExtElement::scalar(n, values[i * dim + j]))
    }

    pub fn ambient(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> &ExtElement {
        &self.entries[i * self.dim + j]
    }

    pub fn set(&mut self, i: usize, j: usize, e: ExtElement) {
        assert_eq!(e.dim(), self.n, "ambient dimension mismatch");
        self.entries[i * self.dim + j] = e;
    }

    pub fn entries(&self) -> &[ExtElement] {
        &self.entries
    }

    fn compatible(&self, other: &Self) -> Result<(), FormError> {
        if self.n != other.n {
            return Err(FormError::AmbientMismatch(self.n, other.n));
        }
        if self.dim != other.dim {
            return Err(FormError::MatrixMismatch(self.dim, other.dim));
        }
        Ok(())
    }

    pub fn mat_mul(&self, other: &Self) -> Result<Self, FormError> {
        self.compatible(other)?;
        let d = self.dim;
        let mut out = Self::zero(self.n, d)?;
        for i in 0..d {
            for j in 0..d {
                let mut acc = ExtElement::zero(self.n)?;
                for k in 0..d {
                    acc = acc.try_add(&self.get(i, k).wedge(other.get(k, j))?)?;
                }
                out.set(i, j, acc);
            }
        }
        Ok(out)
    }

    pub fn try_add(&self, other: &Self) -> Result<Self, FormError> {
        self.compatible(other)?;
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a.try_add(b))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            n: self.n,
            dim: self.dim,
            entries,
        })
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self {
            n: self.n,
            dim: self.dim,
            entries: self.entries.iter().map(|e| e.scale(c)).collect(),
        }
    }

    pub fn scale_re(&self, c: f64) -> Self {
        self.scale(Complex64::new(c, 0.0))
    }

    pub fn trace(&self) -> ExtElement {
        let mut acc = ExtElement::zero(self.n).expect("dimension already validated");
        for i in 0..self.dim {
            acc = &acc + self.get(i, i);
        }
        acc
    }

    /// `self^k` under matrix multiplication (`k = 0` gives the identity).
    pub fn pow(&self, k: usize) -> Self {
        let mut acc = Self::identity(self.n, self.dim).expect("dimension already validated");
        for _ in 0..k {
            acc = acc.mat_mul(self).expect("same shape");
        }
        acc
    }

    /// Checks that every entry is of pure bidegree `(p, q)` (zero entries pass).
    pub fn require_bidegree(&self, p: usize, q: usize) -> Result<(), FormError> {
        for e in &self.entries {
            if e.is_zero() {
                continue;
            }
            match e.pure_bidegree() {
                Some(b) if b == (p, q) => {}
                found => {
                    return Err(FormError::WrongBidegree {
                        expected: (p, q),
                        found: found.unwrap_or((usize::MAX, usize::MAX)),
                    })
                }
            }
        }
        Ok(())
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().map(ExtElement::max_abs).fold(0.0, f64::max)
    }
}
