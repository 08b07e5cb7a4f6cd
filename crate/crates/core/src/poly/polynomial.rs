use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::Monomial;
use crate::error::{Error, Result};

/// Coefficients with magnitude below this are dropped after every operation.
pub const CANON_EPS: f64 = 1e-14;

/// Sparse multivariate polynomial with real coefficients.
///
/// Terms are kept in a sorted map, so iteration order (and therefore every
/// derived matrix layout) is deterministic.
#[derive(Clone, PartialEq)]
pub struct Polynomial {
    n_vars: usize,
    terms: BTreeMap<Monomial, f64>,
}

impl Polynomial {
    pub fn zero(n_vars: usize) -> Self {
        Polynomial {
            n_vars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(n_vars: usize, c: f64) -> Self {
        Self::from_terms(n_vars, [(Monomial::one(n_vars), c)])
    }

    /// The polynomial `x_index`.
    pub fn var(n_vars: usize, index: usize) -> Self {
        Self::from_terms(n_vars, [(Monomial::var(n_vars, index), 1.0)])
    }

    pub fn monomial(m: Monomial, c: f64) -> Self {
        let n = m.n_vars();
        Self::from_terms(n, [(m, c)])
    }

    /// Builds a polynomial, summing repeated monomials.
    ///
    /// Panics if a monomial has the wrong length; use [`Polynomial::try_from_terms`]
    /// for untrusted input.
    pub fn from_terms(n_vars: usize, terms: impl IntoIterator<Item = (Monomial, f64)>) -> Self {
        Self::try_from_terms(n_vars, terms).expect("monomial length must equal n_vars")
    }

    pub fn try_from_terms(
        n_vars: usize,
        terms: impl IntoIterator<Item = (Monomial, f64)>,
    ) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (m, c) in terms {
            if m.n_vars() != n_vars {
                return Err(Error::VarCountMismatch {
                    left: n_vars,
                    right: m.n_vars(),
                });
            }
            *map.entry(m).or_insert(0.0) += c;
        }
        let mut p = Polynomial { n_vars, terms: map };
        p.canonicalize();
        Ok(p)
    }

    fn canonicalize(&mut self) {
        self.terms.retain(|_, c| c.abs() >= CANON_EPS);
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn n_terms(&self) -> usize {
        self.terms.len()
    }

    /// Total degree; the zero polynomial has degree 0.
    pub fn degree(&self) -> u32 {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, f64)> {
        self.terms.iter().map(|(m, &c)| (m, c))
    }

    pub fn coeff(&self, m: &Monomial) -> f64 {
        self.terms.get(m).copied().unwrap_or(0.0)
    }

    pub fn support(&self) -> impl Iterator<Item = &Monomial> {
        self.terms.keys()
    }

    /// Largest absolute coefficient (0 for the zero polynomial).
    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.values().fold(0.0, |a, c| a.max(c.abs()))
    }

    fn check_vars(&self, other: &Polynomial) -> Result<()> {
        if self.n_vars != other.n_vars {
            return Err(Error::VarCountMismatch {
                left: self.n_vars,
                right: other.n_vars,
            });
        }
        Ok(())
    }

    pub fn add(&self, other: &Polynomial) -> Result<Polynomial> {
        self.check_vars(other)?;
        let mut terms = self.terms.clone();
        for (m, c) in &other.terms {
            *terms.entry(m.clone()).or_insert(0.0) += c;
        }
        let mut p = Polynomial {
            n_vars: self.n_vars,
            terms,
        };
        p.canonicalize();
        Ok(p)
    }

    pub fn sub(&self, other: &Polynomial) -> Result<Polynomial> {
        self.add(&other.negate())
    }

    pub fn negate(&self) -> Polynomial {
        self.scale(-1.0)
    }

    pub fn scale(&self, s: f64) -> Polynomial {
        let mut p = Polynomial {
            n_vars: self.n_vars,
            terms: self.terms.iter().map(|(m, c)| (m.clone(), c * s)).collect(),
        };
        p.canonicalize();
        p
    }

    pub fn mul(&self, other: &Polynomial) -> Result<Polynomial> {
        self.check_vars(other)?;
        let mut terms: BTreeMap<Monomial, f64> = BTreeMap::new();
        for (a, ca) in &self.terms {
            for (b, cb) in &other.terms {
                *terms.entry(a.mul(b)).or_insert(0.0) += ca * cb;
            }
        }
        let mut p = Polynomial {
            n_vars: self.n_vars,
            terms,
        };
        p.canonicalize();
        Ok(p)
    }

    pub fn pow(&self, k: u32) -> Polynomial {
        let mut acc = Polynomial::constant(self.n_vars, 1.0);
        for _ in 0..k {
            acc = acc.mul(self).expect("same variable count");
        }
        acc
    }

    /// Exact partial derivative with respect to `var_index`.
    pub fn differentiate(&self, var_index: usize) -> Result<Polynomial> {
        if var_index >= self.n_vars {
            return Err(Error::VarIndexOutOfRange {
                index: var_index,
                n_vars: self.n_vars,
            });
        }
        let terms = self.terms.iter().filter_map(|(m, &c)| {
            let e = m.exponents()[var_index];
            (e > 0).then(|| {
                let mut exps = m.exponents().to_vec();
                exps[var_index] -= 1;
                (Monomial::new(exps), c * e as f64)
            })
        });
        Ok(Polynomial::from_terms(self.n_vars, terms))
    }

    pub fn evaluate(&self, point: &[f64]) -> Result<f64> {
        if point.len() != self.n_vars {
            return Err(Error::DimensionMismatch {
                expected: self.n_vars,
                got: point.len(),
            });
        }
        Ok(self.terms.iter().map(|(m, c)| c * m.eval(point)).sum())
    }

    /// Replaces `x_var_index` by an affine polynomial and expands.
    pub fn substitute_affine(
        &self,
        var_index: usize,
        replacement: &Polynomial,
    ) -> Result<Polynomial> {
        self.check_vars(replacement)?;
        if var_index >= self.n_vars {
            return Err(Error::VarIndexOutOfRange {
                index: var_index,
                n_vars: self.n_vars,
            });
        }
        if replacement.degree() > 1 {
            return Err(Error::NonlinearReplacement(replacement.degree()));
        }
        let max_e = self
            .terms
            .keys()
            .map(|m| m.exponents()[var_index])
            .max()
            .unwrap_or(0);
        let mut powers = vec![Polynomial::constant(self.n_vars, 1.0)];
        for k in 1..=max_e as usize {
            let next = powers[k - 1].mul(replacement)?;
            powers.push(next);
        }
        let mut out = Polynomial::zero(self.n_vars);
        for (m, &c) in &self.terms {
            let mut exps = m.exponents().to_vec();
            let e = std::mem::replace(&mut exps[var_index], 0) as usize;
            let rest = Polynomial::monomial(Monomial::new(exps), c);
            out = out.add(&rest.mul(&powers[e])?)?;
        }
        Ok(out)
    }

    /// Re-embeds into a larger variable space, shifting variable `k` to `offset + k`.
    pub fn embed(&self, n_vars: usize, offset: usize) -> Polynomial {
        assert!(offset + self.n_vars <= n_vars);
        Polynomial {
            n_vars,
            terms: self
                .terms
                .iter()
                .map(|(m, &c)| (m.embed(n_vars, offset), c))
                .collect(),
        }
    }

    /// Coefficient-wise max absolute difference.
    pub fn max_abs_diff(&self, other: &Polynomial) -> Result<f64> {
        Ok(self.sub(other)?.max_abs_coeff())
    }
}

impl fmt::Debug for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, (m, c)) in self.terms.iter().rev().enumerate() {
            let sep = if k == 0 {
                if *c < 0.0 {
                    "-"
                } else {
                    ""
                }
            } else if *c < 0.0 {
                " - "
            } else {
                " + "
            };
            if m.is_one() {
                write!(f, "{sep}{}", c.abs())?;
            } else if (c.abs() - 1.0).abs() < CANON_EPS {
                write!(f, "{sep}{m}")?;
            } else {
                write!(f, "{sep}{}*{m}", c.abs())?;
            }
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct TermRepr {
    exps: Vec<u32>,
    coeff: f64,
}

#[derive(Serialize, Deserialize)]
struct PolynomialRepr {
    n_vars: usize,
    terms: Vec<TermRepr>,
}

impl Serialize for Polynomial {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        PolynomialRepr {
            n_vars: self.n_vars,
            terms: self
                .terms
                .iter()
                .map(|(m, &c)| TermRepr {
                    exps: m.exponents().to_vec(),
                    coeff: c,
                })
                .collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Polynomial {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Self, D::Error> {
        let repr = PolynomialRepr::deserialize(deserializer)?;
        if repr.terms.iter().any(|t| !t.coeff.is_finite()) {
            return Err(serde::de::Error::custom("non-finite coefficient"));
        }
        Polynomial::try_from_terms(
            repr.n_vars,
            repr.terms
                .into_iter()
                .map(|t| (Monomial::new(t.exps), t.coeff)),
        )
        .map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x(n: usize, i: usize) -> Polynomial {
        Polynomial::var(n, i)
    }

    fn c(n: usize, v: f64) -> Polynomial {
        Polynomial::constant(n, v)
    }

    #[test]
    fn add_cancels() {
        let x2 = x(1, 0).pow(2);
        let p = x2.add(&c(1, 1.0)).unwrap();
        assert_eq!(p.add(&x2.negate()).unwrap(), c(1, 1.0));
        assert_eq!(p.add(&Polynomial::zero(1)).unwrap(), p);
        let q = x2.scale(-3.0).add(&x(1, 0).scale(4.0)).unwrap();
        assert_eq!(q.add(&x2.scale(3.0)).unwrap(), x(1, 0).scale(4.0));
    }

    #[test]
    fn add_mismatch_errors() {
        assert!(matches!(
            x(1, 0).add(&x(2, 0)),
            Err(Error::VarCountMismatch { .. })
        ));
        assert!(x(1, 0).mul(&x(2, 0)).is_err());
    }

    #[test]
    fn mul_examples() {
        assert_eq!(x(1, 0).mul(&x(1, 0)).unwrap(), x(1, 0).pow(2));
        let p = x(2, 0).pow(2).add(&x(2, 1)).unwrap();
        assert_eq!(p.mul(&c(2, 1.0)).unwrap(), p);
        // (1 - y^2) * (-6) = -6 + 6y^2
        let h = c(1, 1.0).sub(&x(1, 0).pow(2)).unwrap();
        let expect = c(1, -6.0).add(&x(1, 0).pow(2).scale(6.0)).unwrap();
        assert_eq!(h.mul(&c(1, -6.0)).unwrap(), expect);
    }

    #[test]
    fn mul_degree_adds() {
        let p = x(2, 0).pow(2).add(&x(2, 1)).unwrap();
        let q = x(2, 1).pow(3).add(&c(2, 2.0)).unwrap();
        assert_eq!(p.mul(&q).unwrap().degree(), 5);
    }

    #[test]
    fn differentiate_examples() {
        let u = x(1, 0).pow(2).scale(-3.0).add(&x(1, 0).scale(4.0)).unwrap();
        let expect = x(1, 0).scale(-6.0).add(&c(1, 4.0)).unwrap();
        assert_eq!(u.differentiate(0).unwrap(), expect);
        assert!(c(1, 7.0).differentiate(0).unwrap().is_zero());
        assert!(matches!(
            u.differentiate(1),
            Err(Error::VarIndexOutOfRange {
                index: 1,
                n_vars: 1
            })
        ));
    }

    #[test]
    fn evaluate_examples() {
        let u = x(1, 0).pow(2).scale(-3.0).add(&x(1, 0).scale(4.0)).unwrap();
        assert_eq!(u.evaluate(&[1.0]).unwrap(), 1.0);
        let p = x(2, 0)
            .pow(2)
            .add(&x(2, 0).mul(&x(2, 1)).unwrap().scale(4.0))
            .unwrap();
        assert!((p.evaluate(&[0.5, 0.5]).unwrap() - 1.25).abs() < 1e-15);
        let q = p.add(&c(2, 3.5)).unwrap();
        assert_eq!(q.evaluate(&[0.0, 0.0]).unwrap(), 3.5);
        assert!(matches!(
            q.evaluate(&[1.0]),
            Err(Error::DimensionMismatch {
                expected: 2,
                got: 1
            })
        ));
    }

    #[test]
    fn substitute_examples() {
        // x1^2 + 4 x1 x2 with x2 <- 1 - x1 gives -3 x1^2 + 4 x1
        let p = x(2, 0)
            .pow(2)
            .add(&x(2, 0).mul(&x(2, 1)).unwrap().scale(4.0))
            .unwrap();
        let r = c(2, 1.0).sub(&x(2, 0)).unwrap();
        let got = p.substitute_affine(1, &r).unwrap();
        let expect = x(2, 0).pow(2).scale(-3.0).add(&x(2, 0).scale(4.0)).unwrap();
        assert_eq!(got, expect);

        assert_eq!(c(2, 2.0).substitute_affine(0, &r).unwrap(), c(2, 2.0));
        assert_eq!(p.substitute_affine(0, &x(2, 0)).unwrap(), p);
    }

    #[test]
    fn substitute_rejects_nonlinear_and_bad_index() {
        let p = x(2, 0);
        assert!(matches!(
            p.substitute_affine(0, &x(2, 1).pow(2)),
            Err(Error::NonlinearReplacement(2))
        ));
        assert!(p.substitute_affine(5, &x(2, 1)).is_err());
    }

    #[test]
    fn zero_degree_is_zero() {
        assert_eq!(Polynomial::zero(3).degree(), 0);
    }

    #[test]
    fn tiny_coefficients_dropped() {
        let p = Polynomial::from_terms(1, [(Monomial::var(1, 0), 1e-15), (Monomial::one(1), 1.0)]);
        assert_eq!(p.n_terms(), 1);
    }

    #[test]
    fn json_encoding() {
        let p = x(2, 0).scale(2.0).add(&c(2, -1.0)).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(
            s,
            r#"{"n_vars":2,"terms":[{"exps":[0,0],"coeff":-1.0},{"exps":[1,0],"coeff":2.0}]}"#
        );
        let back: Polynomial = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
        let bad = r#"{"n_vars":2,"terms":[{"exps":[0],"coeff":1.0}]}"#;
        assert!(serde_json::from_str::<Polynomial>(bad).is_err());
    }

    #[test]
    fn display() {
        let p = x(2, 0).pow(2).scale(-3.0).add(&x(2, 1).scale(4.0)).unwrap();
        assert_eq!(p.to_string(), "-3*x1^2 + 4*x2");
    }
}
