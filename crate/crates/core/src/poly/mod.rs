//! Sparse multivariate polynomials, monomials and polynomial matrices.

mod matrix;
mod monomial;
mod polynomial;

pub use matrix::PolyMatrix;
pub use monomial::{monomials_up_to, Monomial};
pub use polynomial::{Polynomial, CANON_EPS};
