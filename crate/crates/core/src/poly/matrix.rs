use super::Polynomial;
use crate::error::Result;

/// Square matrix of polynomials over a shared variable space.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyMatrix {
    dim: usize,
    entries: Vec<Polynomial>,
    symmetric: bool,
}

impl PolyMatrix {
    pub fn zeros(dim: usize, n_vars: usize) -> Self {
        PolyMatrix {
            dim,
            entries: vec![Polynomial::zero(n_vars); dim * dim],
            symmetric: true,
        }
    }

    /// Builds from row-major entries; the symmetric flag is computed.
    pub fn from_rows(rows: Vec<Vec<Polynomial>>) -> Self {
        let dim = rows.len();
        assert!(rows.iter().all(|r| r.len() == dim), "matrix must be square");
        let entries: Vec<Polynomial> = rows.into_iter().flatten().collect();
        let mut m = PolyMatrix {
            dim,
            entries,
            symmetric: false,
        };
        m.symmetric = m.is_exactly_symmetric();
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_vars(&self) -> usize {
        self.entries.first().map(Polynomial::n_vars).unwrap_or(0)
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn get(&self, i: usize, j: usize) -> &Polynomial {
        &self.entries[i * self.dim + j]
    }

    fn is_exactly_symmetric(&self) -> bool {
        (0..self.dim).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }

    pub fn transpose(&self) -> PolyMatrix {
        let rows = (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.get(j, i).clone()).collect())
            .collect();
        PolyMatrix::from_rows(rows)
    }

    /// `(M + M^T) / 2`, built so that mirrored entries are bit-identical.
    pub fn symmetrize(&self) -> Result<PolyMatrix> {
        let n = self.dim;
        let mut entries = vec![Polynomial::zero(self.n_vars()); n * n];
        for i in 0..n {
            for j in i..n {
                let s = self.get(i, j).add(self.get(j, i))?.scale(0.5);
                entries[j * n + i] = s.clone();
                entries[i * n + j] = s;
            }
        }
        Ok(PolyMatrix {
            dim: n,
            entries,
            symmetric: true,
        })
    }

    pub fn sub(&self, other: &PolyMatrix) -> Result<PolyMatrix> {
        assert_eq!(self.dim, other.dim);
        let rows = (0..self.dim)
            .map(|i| {
                (0..self.dim)
                    .map(|j| self.get(i, j).sub(other.get(i, j)))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(PolyMatrix::from_rows(rows))
    }

    /// Numerical value at `point`, row-major.
    pub fn evaluate(&self, point: &[f64]) -> Result<Vec<f64>> {
        self.entries.iter().map(|p| p.evaluate(point)).collect()
    }

    /// `y^T M(x) y` as a polynomial in `x` followed by `dim` fresh `y` variables.
    ///
    /// The result lives in `n_vars + dim` variables when `y_offset == n_vars`;
    /// in general it has `max(n_vars, y_offset + dim)` variables.
    pub fn quadratic_form(&self, y_offset: usize) -> Result<Polynomial> {
        let n_x = self.n_vars();
        let total = n_x.max(y_offset + self.dim);
        let lifted: Vec<Polynomial> = self.entries.iter().map(|p| p.embed(total, 0)).collect();
        let y = |k: usize| Polynomial::var(total, y_offset + k);
        let mut out = Polynomial::zero(total);
        for i in 0..self.dim {
            let d = lifted[i * self.dim + i].mul(&y(i).pow(2))?;
            out = out.add(&d)?;
            for j in i + 1..self.dim {
                let sum = lifted[i * self.dim + j].add(&lifted[j * self.dim + i])?;
                let yy = y(i).mul(&y(j))?;
                out = out.add(&sum.mul(&yy)?)?;
            }
        }
        Ok(out)
    }
}
