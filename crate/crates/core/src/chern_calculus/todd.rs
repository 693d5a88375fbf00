//! Todd genus components as weighted polynomials in the Chern classes.
//!
//! Td is the multiplicative sequence with characteristic series
//! `x / (1 - e^{-x})`. We take its logarithm, rewrite the power sums in
//! Chern classes with Newton's identities and exponentiate, all in exact
//! rational arithmetic truncated by weight.

use std::collections::BTreeMap;
use std::fmt;

use num_rational::Ratio;

use super::ChernError;
use crate::form_algebra::ExtElement;

pub type Rational = Ratio<i128>;

/// Highest supported Todd component.
pub const MAX_ORDER: usize = 5;

/// Polynomial in `c_1..c_m` with rational coefficients. Keys are exponent
/// vectors of length `m`.
#[derive(Clone, PartialEq, Eq)]
pub struct ChernPolynomial {
    vars: usize,
    terms: BTreeMap<Vec<u32>, Rational>,
}

impl fmt::Debug for ChernPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (exps, c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "({c})")?;
            for (k, e) in exps.iter().enumerate() {
                if *e > 0 {
                    write!(f, "·c{}", k + 1)?;
                    if *e > 1 {
                        write!(f, "^{e}")?;
                    }
                }
            }
        }
        Ok(())
    }
}

impl ChernPolynomial {
    pub fn zero(vars: usize) -> Self {
        Self {
            vars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(vars: usize, c: Rational) -> Self {
        let mut p = Self::zero(vars);
        p.add_term(vec![0; vars], c);
        p
    }

    /// The variable `c_k` (1-based).
    pub fn var(vars: usize, k: usize) -> Self {
        let mut e = vec![0; vars];
        e[k - 1] = 1;
        let mut p = Self::zero(vars);
        p.add_term(e, Rational::from_integer(1));
        p
    }

    fn add_term(&mut self, exps: Vec<u32>, c: Rational) {
        if c == Rational::from_integer(0) {
            return;
        }
        let slot = self
            .terms
            .entry(exps.clone())
            .or_insert(Rational::from_integer(0));
        *slot += c;
        if *slot == Rational::from_integer(0) {
            self.terms.remove(&exps);
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[u32], Rational)> {
        self.terms.iter().map(|(e, c)| (e.as_slice(), *c))
    }

    pub fn coefficient(&self, exps: &[u32]) -> Rational {
        self.terms
            .get(exps)
            .copied()
            .unwrap_or(Rational::from_integer(0))
    }

    fn weight(exps: &[u32]) -> usize {
        exps.iter()
            .enumerate()
            .map(|(k, e)| (k + 1) * *e as usize)
            .sum()
    }

    /// `Some(w)` when every term has weight `w` (weight of `c_k` is `k`).
    pub fn homogeneous_weight(&self) -> Option<usize> {
        let mut it = self.terms.keys().map(|e| Self::weight(e));
        let first = it.next().unwrap_or(0);
        it.all(|w| w == first).then_some(first)
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.add_term(e.clone(), *c);
        }
        out
    }

    pub fn scale(&self, c: Rational) -> Self {
        let mut out = Self::zero(self.vars);
        for (e, v) in &self.terms {
            out.add_term(e.clone(), v * c);
        }
        out
    }

    /// Product truncated to weight `<= max_weight`.
    pub fn mul_truncated(&self, other: &Self, max_weight: usize) -> Self {
        let mut out = Self::zero(self.vars);
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                let e: Vec<u32> = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                if Self::weight(&e) <= max_weight {
                    out.add_term(e, ca * cb);
                }
            }
        }
        out
    }

    pub fn weight_part(&self, w: usize) -> Self {
        let mut out = Self::zero(self.vars);
        for (e, c) in &self.terms {
            if Self::weight(e) == w {
                out.add_term(e.clone(), *c);
            }
        }
        out
    }

    /// Partial derivative with respect to `c_k` (1-based).
    pub fn partial(&self, k: usize) -> Self {
        let mut out = Self::zero(self.vars);
        for (e, c) in &self.terms {
            let pow = e[k - 1];
            if pow == 0 {
                continue;
            }
            let mut d = e.clone();
            d[k - 1] -= 1;
            out.add_term(d, c * Rational::from_integer(pow as i128));
        }
        out
    }

    /// Evaluates with `classes[k]` substituted for `c_k` (`classes[0]` is
    /// ignored); products are wedge products.
    pub fn evaluate(&self, classes: &[ExtElement]) -> Result<ExtElement, ChernError> {
        let n = classes[0].dim();
        let mut acc = ExtElement::zero(n)?;
        for (e, c) in &self.terms {
            let mut term = ExtElement::one(n)?;
            for (k, pow) in e.iter().enumerate() {
                for _ in 0..*pow {
                    let class = classes
                        .get(k + 1)
                        .ok_or(ChernError::OrderOutOfRange { order: k + 1, max: classes.len() - 1 })?;
                    term = term.wedge(class)?;
                }
            }
            let coef = *c.numer() as f64 / *c.denom() as f64;
            acc = acc.try_add(&term.scale_re(coef))?;
        }
        Ok(acc)
    }
}

/// `Td_0..Td_order` as polynomials in `c_1..c_order`.
#[derive(Clone, Debug)]
pub struct ToddExpansion {
    order: usize,
    components: Vec<ChernPolynomial>,
}

impl ToddExpansion {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn component(&self, j: usize) -> &ChernPolynomial {
        &self.components[j]
    }

    pub fn components(&self) -> &[ChernPolynomial] {
        &self.components
    }

    /// Number of Chern variables the polynomials range over.
    pub fn vars(&self) -> usize {
        self.order.max(1)
    }
}

fn r(n: i128, d: i128) -> Rational {
    Rational::new(n, d)
}

/// Coefficients of `x / (1 - e^{-x})` up to `x^m`.
fn todd_series(m: usize) -> Vec<Rational> {
    // (1 - e^{-x}) / x = sum_k (-1)^k x^k / (k+1)!
    let mut fact = vec![Rational::from_integer(1); m + 2];
    for k in 1..m + 2 {
        fact[k] = fact[k - 1] * Rational::from_integer(k as i128);
    }
    let denom: Vec<Rational> = (0..=m)
        .map(|k| {
            let s = if k % 2 == 0 { 1 } else { -1 };
            Rational::from_integer(s) / fact[k + 1]
        })
        .collect();
    // Series inverse.
    let mut inv = vec![Rational::from_integer(0); m + 1];
    inv[0] = Rational::from_integer(1) / denom[0];
    for k in 1..=m {
        let mut acc = Rational::from_integer(0);
        for i in 1..=k {
            acc += denom[i] * inv[k - i];
        }
        inv[k] = -acc / denom[0];
    }
    inv
}

/// Logarithm of a series with constant term 1.
fn series_log(b: &[Rational]) -> Vec<Rational> {
    let m = b.len() - 1;
    let mut l = vec![Rational::from_integer(0); m + 1];
    for k in 1..=m {
        let kk = Rational::from_integer(k as i128);
        let mut acc = kk * b[k];
        for i in 1..k {
            acc -= Rational::from_integer(i as i128) * l[i] * b[k - i];
        }
        l[k] = acc / kk;
    }
    l
}

/// Power sums `p_1..p_m` of the Chern roots as polynomials in `c_1..c_m`.
pub fn power_sums_in_chern(m: usize) -> Vec<ChernPolynomial> {
    let vars = m.max(1);
    let mut p: Vec<ChernPolynomial> = vec![ChernPolynomial::zero(vars)];
    for k in 1..=m {
        let sign_k = if (k - 1) % 2 == 0 { 1 } else { -1 };
        let mut acc = ChernPolynomial::var(vars, k).scale(Rational::from_integer(sign_k * k as i128));
        for i in 1..k {
            let sign_i = if (i - 1) % 2 == 0 { 1 } else { -1 };
            let t = ChernPolynomial::var(vars, i)
                .mul_truncated(&p[k - i], m)
                .scale(Rational::from_integer(sign_i));
            acc = acc.add(&t);
        }
        p.push(acc);
    }
    p
}

/// Todd components `Td_0..Td_order` from the generating function.
pub fn todd_components(order: usize) -> Result<ToddExpansion, ChernError> {
    if order > MAX_ORDER {
        return Err(ChernError::OrderOutOfRange {
            order,
            max: MAX_ORDER,
        });
    }
    let vars = order.max(1);
    let ell = series_log(&todd_series(order));
    let p = power_sums_in_chern(order);
    let mut log_td = ChernPolynomial::zero(vars);
    for k in 1..=order {
        log_td = log_td.add(&p[k].scale(ell[k]));
    }
    // exp(L) = sum_j L^j / j!, truncated by weight.
    let mut td = ChernPolynomial::constant(vars, Rational::from_integer(1));
    let mut power = ChernPolynomial::constant(vars, Rational::from_integer(1));
    for j in 1..=order {
        power = power.mul_truncated(&log_td, order);
        td = td.add(&power.scale(r(1, (1..=j as i128).product())));
    }
    let components = (0..=order).map(|w| td.weight_part(w)).collect();
    Ok(ToddExpansion { order, components })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mono(vars: usize, exps: &[u32]) -> Vec<u32> {
        let mut e = exps.to_vec();
        e.resize(vars, 0);
        e
    }

    #[test]
    fn characteristic_series_matches_bernoulli() {
        // x/(1-e^{-x}) = 1 + x/2 + x^2/12 - x^4/720 + ...
        let b = todd_series(5);
        assert_eq!(b[0], r(1, 1));
        assert_eq!(b[1], r(1, 2));
        assert_eq!(b[2], r(1, 12));
        assert_eq!(b[3], r(0, 1));
        assert_eq!(b[4], r(-1, 720));
        assert_eq!(b[5], r(0, 1));
    }

    #[test]
    fn low_components() {
        let td = todd_components(5).unwrap();
        let v = td.vars();
        assert_eq!(td.component(0), &ChernPolynomial::constant(v, r(1, 1)));
        assert_eq!(td.component(1), &ChernPolynomial::var(v, 1).scale(r(1, 2)));
        let td2 = td.component(2);
        assert_eq!(td2.coefficient(&mono(v, &[2])), r(1, 12));
        assert_eq!(td2.coefficient(&mono(v, &[0, 1])), r(1, 12));
        let td3 = td.component(3);
        assert_eq!(td3.terms().count(), 1);
        assert_eq!(td3.coefficient(&mono(v, &[1, 1])), r(1, 24));
        let td4 = td.component(4);
        assert_eq!(td4.coefficient(&mono(v, &[4])), r(-1, 720));
        assert_eq!(td4.coefficient(&mono(v, &[2, 1])), r(4, 720));
        assert_eq!(td4.coefficient(&mono(v, &[0, 2])), r(3, 720));
        assert_eq!(td4.coefficient(&mono(v, &[1, 0, 1])), r(1, 720));
        assert_eq!(td4.coefficient(&mono(v, &[0, 0, 0, 1])), r(-1, 720));
        let td5 = td.component(5);
        assert_eq!(td5.coefficient(&mono(v, &[3, 1])), r(-1, 1440));
        assert_eq!(td5.coefficient(&mono(v, &[1, 2])), r(3, 1440));
        assert_eq!(td5.coefficient(&mono(v, &[2, 0, 1])), r(1, 1440));
        assert_eq!(td5.coefficient(&mono(v, &[1, 0, 0, 1])), r(-1, 1440));
        assert_eq!(td5.terms().count(), 4);
    }

    #[test]
    fn components_are_homogeneous() {
        let td = todd_components(5).unwrap();
        for j in 1..=5 {
            assert_eq!(td.component(j).homogeneous_weight(), Some(j));
        }
    }

    #[test]
    fn order_bound() {
        assert!(todd_components(6).is_err());
    }

    #[test]
    fn newton_power_sums() {
        let p = power_sums_in_chern(3);
        // p2 = c1^2 - 2 c2, p3 = c1^3 - 3 c1 c2 + 3 c3
        assert_eq!(p[2].coefficient(&[2, 0, 0]), r(1, 1));
        assert_eq!(p[2].coefficient(&[0, 1, 0]), r(-2, 1));
        assert_eq!(p[3].coefficient(&[3, 0, 0]), r(1, 1));
        assert_eq!(p[3].coefficient(&[1, 1, 0]), r(-3, 1));
        assert_eq!(p[3].coefficient(&[0, 0, 1]), r(3, 1));
    }
}
