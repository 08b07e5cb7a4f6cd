use std::cmp::Ordering;
use std::fmt;

/// Exponent vector over a fixed ambient variable set.
///
/// Ordered by total degree first; within one degree, graded reverse
/// lexicographic order with the larger monomial first, so that sorting a
/// basis ascending yields `1, x1, x2, x1^2, x1*x2, x2^2, ...`.
#[derive(Clone, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct Monomial(Vec<u32>);

impl Monomial {
    pub fn new(exponents: Vec<u32>) -> Self {
        Monomial(exponents)
    }

    pub fn one(n_vars: usize) -> Self {
        Monomial(vec![0; n_vars])
    }

    /// The monomial `x_index`.
    pub fn var(n_vars: usize, index: usize) -> Self {
        let mut e = vec![0; n_vars];
        e[index] = 1;
        Monomial(e)
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    pub fn n_vars(&self) -> usize {
        self.0.len()
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn is_one(&self) -> bool {
        self.0.iter().all(|&e| e == 0)
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        debug_assert_eq!(self.0.len(), other.0.len());
        Monomial(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// `self / other` when `other` divides `self`.
    pub fn div(&self, other: &Monomial) -> Option<Monomial> {
        let mut out = Vec::with_capacity(self.0.len());
        for (a, b) in self.0.iter().zip(&other.0) {
            if b > a {
                return None;
            }
            out.push(a - b);
        }
        Some(Monomial(out))
    }

    pub fn eval(&self, point: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(point)
            .filter(|(&e, _)| e > 0)
            .map(|(&e, &v)| v.powi(e as i32))
            .product()
    }

    /// Re-embed into `n_vars` variables, placing the existing exponents at `offset`.
    pub fn embed(&self, n_vars: usize, offset: usize) -> Monomial {
        let mut e = vec![0; n_vars];
        e[offset..offset + self.0.len()].copy_from_slice(&self.0);
        Monomial(e)
    }

    fn grevlex_cmp(&self, other: &Monomial) -> Ordering {
        // a >_grevlex b iff the last nonzero entry of a - b is negative
        for (a, b) in self.0.iter().zip(&other.0).rev() {
            if a != b {
                return if a < b {
                    Ordering::Greater
                } else {
                    Ordering::Less
                };
            }
        }
        Ordering::Equal
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| other.grevlex_cmp(self))
            .then_with(|| self.0.len().cmp(&other.0.len()))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_one() {
            return write!(f, "1");
        }
        let mut first = true;
        for (i, &e) in self.0.iter().enumerate() {
            if e == 0 {
                continue;
            }
            if !first {
                write!(f, "*")?;
            }
            first = false;
            write!(f, "x{}", i + 1)?;
            if e > 1 {
                write!(f, "^{e}")?;
            }
        }
        Ok(())
    }
}

/// All monomials in `n_vars` variables of total degree `<= max_degree`, sorted.
pub fn monomials_up_to(n_vars: usize, max_degree: u32) -> Vec<Monomial> {
    let mut out = Vec::new();
    for d in 0..=max_degree {
        let mut cur = vec![0u32; n_vars];
        of_degree(&mut cur, 0, d, &mut out);
    }
    out.sort();
    out
}

fn of_degree(cur: &mut Vec<u32>, pos: usize, remaining: u32, out: &mut Vec<Monomial>) {
    if cur.is_empty() {
        if remaining == 0 {
            out.push(Monomial(Vec::new()));
        }
        return;
    }
    if pos == cur.len() - 1 {
        cur[pos] = remaining;
        out.push(Monomial(cur.clone()));
        cur[pos] = 0;
        return;
    }
    for e in (0..=remaining).rev() {
        cur[pos] = e;
        of_degree(cur, pos + 1, remaining - e, out);
    }
    cur[pos] = 0;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_order_is_graded_revlex() {
        let b = monomials_up_to(2, 2);
        let shown: Vec<String> = b.iter().map(|m| m.to_string()).collect();
        assert_eq!(shown, ["1", "x1", "x2", "x1^2", "x1*x2", "x2^2"]);
    }

    #[test]
    fn revlex_differs_from_lex_in_degree_three() {
        // grevlex puts x1*x2^2 above x1^2*x3; lex would not
        let b = monomials_up_to(3, 3);
        let pos = |e: [u32; 3]| b.iter().position(|m| m.exponents() == e).unwrap();
        assert!(pos([1, 2, 0]) < pos([2, 0, 1]));
    }

    #[test]
    fn counts_match_binomials() {
        assert_eq!(monomials_up_to(4, 4).len(), 70);
        assert_eq!(monomials_up_to(8, 2).len(), 45);
        assert_eq!(monomials_up_to(0, 3).len(), 1);
    }

    #[test]
    fn division() {
        let a = Monomial::new(vec![2, 1]);
        let b = Monomial::new(vec![1, 1]);
        assert_eq!(a.div(&b), Some(Monomial::new(vec![1, 0])));
        assert_eq!(b.div(&a), None);
    }
}
