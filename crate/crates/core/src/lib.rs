//! Sum-of-squares certificates of monotonicity and concavity for polynomial
//! games, projection onto certifiable games, and extensive-form conversion.

pub mod corpus;
pub mod efg;
pub mod error;
pub mod game;
pub mod hierarchy;
pub mod io;
pub mod oracles;
pub mod poly;
pub mod projector;
pub mod sdp;
pub mod sos;

pub use error::{Error, Result};
pub use game::{PolynomialGame, SemialgebraicSet};
pub use poly::{Monomial, PolyMatrix, Polynomial};
