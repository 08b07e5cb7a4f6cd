//! Polynomial games over basic semialgebraic sets and their derivative objects.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::{PolyMatrix, Polynomial};

/// `{x : g_j(x) >= 0, h_k(x) = 0}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SemialgebraicSet {
    #[serde(skip)]
    n_vars: usize,
    #[serde(rename = "ineq", default)]
    inequalities: Vec<Polynomial>,
    #[serde(rename = "eq", default)]
    equalities: Vec<Polynomial>,
}

impl SemialgebraicSet {
    pub fn new(
        n_vars: usize,
        inequalities: Vec<Polynomial>,
        equalities: Vec<Polynomial>,
    ) -> Result<Self> {
        let set = SemialgebraicSet {
            n_vars,
            inequalities,
            equalities,
        };
        set.validate()?;
        Ok(set)
    }

    /// All of `R^n`.
    pub fn whole_space(n_vars: usize) -> Self {
        SemialgebraicSet {
            n_vars,
            inequalities: Vec::new(),
            equalities: Vec::new(),
        }
    }

    /// The unit sphere `{y : 1 - y^T y = 0}`.
    pub fn sphere(dim: usize) -> Self {
        let mut h = Polynomial::constant(dim, 1.0);
        for k in 0..dim {
            h = h.sub(&Polynomial::var(dim, k).pow(2)).expect("same space");
        }
        SemialgebraicSet {
            n_vars: dim,
            inequalities: Vec::new(),
            equalities: vec![h],
        }
    }

    /// `[lo, hi]^n` as `x_k - lo >= 0`, `hi - x_k >= 0`.
    pub fn boxed(n_vars: usize, lo: f64, hi: f64) -> Self {
        let mut ineq = Vec::with_capacity(2 * n_vars);
        for k in 0..n_vars {
            let x = Polynomial::var(n_vars, k);
            ineq.push(x.sub(&Polynomial::constant(n_vars, lo)).unwrap());
            ineq.push(Polynomial::constant(n_vars, hi).sub(&x).unwrap());
        }
        SemialgebraicSet {
            n_vars,
            inequalities: ineq,
            equalities: Vec::new(),
        }
    }

    /// Probability simplex in the variables of `vars`, with the last
    /// coordinate eliminated: `x_k >= 0` and `1 - sum x_k >= 0`.
    pub fn simplex_constraints(n_vars: usize, vars: Range<usize>) -> Vec<Polynomial> {
        let mut out: Vec<Polynomial> = vars.clone().map(|k| Polynomial::var(n_vars, k)).collect();
        let mut rest = Polynomial::constant(n_vars, 1.0);
        for k in vars {
            rest = rest.sub(&Polynomial::var(n_vars, k)).unwrap();
        }
        out.push(rest);
        out
    }

    pub fn validate(&self) -> Result<()> {
        for p in self.inequalities.iter().chain(&self.equalities) {
            if p.n_vars() != self.n_vars {
                return Err(Error::VarCountMismatch {
                    left: self.n_vars,
                    right: p.n_vars(),
                });
            }
        }
        Ok(())
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn inequalities(&self) -> &[Polynomial] {
        &self.inequalities
    }

    pub fn equalities(&self) -> &[Polynomial] {
        &self.equalities
    }

    pub fn max_degree(&self) -> u32 {
        self.inequalities
            .iter()
            .chain(&self.equalities)
            .map(Polynomial::degree)
            .max()
            .unwrap_or(0)
    }

    /// Appends `R^2 - sum x_k^2 >= 0`.
    pub fn add_ball_constraint(&self, radius: f64) -> SemialgebraicSet {
        let n = self.n_vars;
        let mut g = Polynomial::constant(n, radius * radius);
        for k in 0..n {
            g = g.sub(&Polynomial::var(n, k).pow(2)).unwrap();
        }
        let mut out = self.clone();
        out.inequalities.push(g);
        out
    }

    /// Cartesian product `self x other` in the concatenated variable space.
    pub fn product(&self, other: &SemialgebraicSet) -> SemialgebraicSet {
        let n = self.n_vars + other.n_vars;
        let lift_a = |p: &Polynomial| p.embed(n, 0);
        let lift_b = |p: &Polynomial| p.embed(n, self.n_vars);
        SemialgebraicSet {
            n_vars: n,
            inequalities: self
                .inequalities
                .iter()
                .map(lift_a)
                .chain(other.inequalities.iter().map(lift_b))
                .collect(),
            equalities: self
                .equalities
                .iter()
                .map(lift_a)
                .chain(other.equalities.iter().map(lift_b))
                .collect(),
        }
    }

    /// Membership with tolerance `tol` on every constraint.
    pub fn contains(&self, point: &[f64], tol: f64) -> bool {
        self.inequalities
            .iter()
            .all(|g| g.evaluate(point).map(|v| v >= -tol).unwrap_or(false))
            && self
                .equalities
                .iter()
                .all(|h| h.evaluate(point).map(|v| v.abs() <= tol).unwrap_or(false))
    }
}

/// An n-player game whose payoffs are polynomials in the joint action vector.
///
/// Player `i` controls the contiguous variable range `blocks[i]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PolynomialGame {
    blocks: Vec<Range<usize>>,
    payoffs: Vec<Polynomial>,
    domain: SemialgebraicSet,
}

impl PolynomialGame {
    /// `block_sizes[i]` is the number of variables player `i` controls. A
    /// player without decisions (size 0) has a payoff but nothing to certify.
    pub fn new(
        block_sizes: &[usize],
        payoffs: Vec<Polynomial>,
        domain: SemialgebraicSet,
    ) -> Result<Self> {
        let mut blocks = Vec::with_capacity(block_sizes.len());
        let mut start = 0;
        for &m in block_sizes {
            blocks.push(start..start + m);
            start += m;
        }
        if payoffs.len() != blocks.len() {
            return Err(Error::MalformedGame(format!(
                "{} payoffs for {} players",
                payoffs.len(),
                blocks.len()
            )));
        }
        if blocks.is_empty() {
            return Err(Error::MalformedGame("game has no players".into()));
        }
        for p in &payoffs {
            if p.n_vars() != start {
                return Err(Error::MalformedGame(format!(
                    "payoff has {} variables, players control {}",
                    p.n_vars(),
                    start
                )));
            }
        }
        if domain.n_vars() != start {
            return Err(Error::MalformedGame(format!(
                "domain has {} variables, players control {}",
                domain.n_vars(),
                start
            )));
        }
        domain.validate()?;
        Ok(PolynomialGame {
            blocks,
            payoffs,
            domain,
        })
    }

    /// The game with payoffs `-||x_i||^2`, whose symmetrized Jacobian is `-2I`.
    pub fn quadratic(block_sizes: &[usize], domain: SemialgebraicSet) -> Result<Self> {
        let zero = Self::zero(block_sizes, domain)?;
        let payoffs = (0..zero.n_players())
            .map(|i| zero.block_norm_sq(i).negate())
            .collect();
        Self::new(block_sizes, payoffs, zero.domain)
    }

    pub fn zero(block_sizes: &[usize], domain: SemialgebraicSet) -> Result<Self> {
        let m: usize = block_sizes.iter().sum();
        Self::new(
            block_sizes,
            vec![Polynomial::zero(m); block_sizes.len()],
            domain,
        )
    }

    pub fn n_players(&self) -> usize {
        self.blocks.len()
    }

    pub fn n_vars(&self) -> usize {
        self.domain.n_vars()
    }

    pub fn blocks(&self) -> &[Range<usize>] {
        &self.blocks
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.len()).collect()
    }

    pub fn payoffs(&self) -> &[Polynomial] {
        &self.payoffs
    }

    pub fn payoff(&self, i: usize) -> &Polynomial {
        &self.payoffs[i]
    }

    pub fn domain(&self) -> &SemialgebraicSet {
        &self.domain
    }

    pub fn with_domain(&self, domain: SemialgebraicSet) -> Result<Self> {
        Self::new(&self.block_sizes(), self.payoffs.clone(), domain)
    }

    pub fn with_payoffs(&self, payoffs: Vec<Polynomial>) -> Result<Self> {
        Self::new(&self.block_sizes(), payoffs, self.domain.clone())
    }

    /// Maximum degree over payoffs and constraints.
    pub fn degree(&self) -> u32 {
        self.payoffs
            .iter()
            .map(Polynomial::degree)
            .max()
            .unwrap_or(0)
            .max(self.domain.max_degree())
    }

    /// Errors unless every player controls at least one variable.
    pub fn require_decisions(&self) -> Result<()> {
        match self.blocks.iter().position(|b| b.is_empty()) {
            Some(i) => Err(Error::MalformedGame(format!(
                "player {i} controls no variables"
            ))),
            None => Ok(()),
        }
    }

    fn check_player(&self, i: usize) -> Result<()> {
        if i >= self.n_players() {
            return Err(Error::PlayerOutOfRange {
                index: i,
                n_players: self.n_players(),
            });
        }
        Ok(())
    }

    fn block_norm_sq(&self, i: usize) -> Polynomial {
        let m = self.n_vars();
        self.blocks[i].clone().fold(Polynomial::zero(m), |acc, k| {
            acc.add(&Polynomial::var(m, k).pow(2)).unwrap()
        })
    }

    /// Stacked own-block gradients `(grad_{x_1} u_1, ..., grad_{x_n} u_n)`.
    pub fn pseudogradient(&self) -> Vec<Polynomial> {
        let mut v = Vec::with_capacity(self.n_vars());
        for (block, u) in self.blocks.iter().zip(&self.payoffs) {
            for k in block.clone() {
                v.push(u.differentiate(k).expect("index within game variables"));
            }
        }
        v
    }

    /// Jacobian of the pseudogradient, `J[r][c] = d v_r / d x_c`.
    pub fn jacobian(&self) -> PolyMatrix {
        let v = self.pseudogradient();
        let m = self.n_vars();
        let rows = v
            .iter()
            .map(|vr| (0..m).map(|c| vr.differentiate(c).unwrap()).collect())
            .collect();
        PolyMatrix::from_rows(rows)
    }

    pub fn symmetrized_jacobian(&self) -> PolyMatrix {
        self.jacobian().symmetrize().expect("shared variable space")
    }

    /// Hessian of `u_i` with respect to player `i`'s own variables.
    pub fn player_hessian(&self, i: usize) -> Result<PolyMatrix> {
        self.check_player(i)?;
        let block = self.blocks[i].clone();
        let u = &self.payoffs[i];
        let grads: Vec<Polynomial> = block.clone().map(|k| u.differentiate(k).unwrap()).collect();
        let rows = grads
            .iter()
            .map(|g| block.clone().map(|k| g.differentiate(k).unwrap()).collect())
            .collect();
        // mixed partials commute exactly for polynomials, but rebuild the
        // mirror explicitly so the symmetric flag is guaranteed
        PolyMatrix::from_rows(rows).symmetrize()
    }

    /// Payoffs `u_i - (eps / 2) ||x_i||^2`; shifts `J_S` by `-eps * I`.
    pub fn regularize(&self, eps: f64) -> Result<PolynomialGame> {
        if !(eps > 0.0) {
            return Err(Error::MalformedGame(format!(
                "regularization must be positive, got {eps}"
            )));
        }
        let payoffs = (0..self.n_players())
            .map(|i| self.payoffs[i].sub(&self.block_norm_sq(i).scale(eps / 2.0)))
            .collect::<Result<Vec<_>>>()?;
        self.with_payoffs(payoffs)
    }

    /// The same game with `R^2 - ||x||^2 >= 0` appended to the domain.
    pub fn with_ball_constraint(&self, radius: f64) -> Result<PolynomialGame> {
        if !(radius > 0.0) {
            return Err(Error::MalformedGame(format!(
                "ball radius must be positive, got {radius}"
            )));
        }
        self.with_domain(self.domain.add_ball_constraint(radius))
    }

    /// `max_i ||coeffs(u_i) - coeffs(v_i)||_inf`.
    pub fn distance(&self, other: &PolynomialGame) -> Result<f64> {
        if self.block_sizes() != other.block_sizes() {
            return Err(Error::MalformedGame(
                "games have different player structure".into(),
            ));
        }
        let mut d: f64 = 0.0;
        for (a, b) in self.payoffs.iter().zip(&other.payoffs) {
            d = d.max(a.max_abs_diff(b)?);
        }
        Ok(d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use rand::{Rng, SeedableRng};

    fn c(n: usize, v: f64) -> Polynomial {
        Polynomial::constant(n, v)
    }

    #[test]
    fn driver_pseudogradient_and_jacobian() {
        let g = corpus::driver_game();
        let v = g.pseudogradient();
        let expect = Polynomial::var(1, 0).scale(-6.0).add(&c(1, 4.0)).unwrap();
        assert_eq!(v, vec![expect]);
        let js = g.symmetrized_jacobian();
        assert_eq!(js.get(0, 0), &c(1, -6.0));
        assert_eq!(g.player_hessian(0).unwrap().get(0, 0), &c(1, -6.0));
    }

    #[test]
    fn zero_game_has_zero_pseudogradient() {
        let g = PolynomialGame::zero(&[2, 1], SemialgebraicSet::boxed(3, 0.0, 1.0)).unwrap();
        assert!(g.pseudogradient().iter().all(Polynomial::is_zero));
    }

    #[test]
    fn fig1_pseudogradient() {
        let g = corpus::fig1_game();
        let v = g.pseudogradient();
        let x1 = Polynomial::var(3, 0);
        let x2 = Polynomial::var(3, 1);
        let y = Polynomial::var(3, 2);
        let e0 = x2
            .scale(10.0)
            .add(&y.scale(2.0))
            .unwrap()
            .add(&c(3, -6.0))
            .unwrap();
        let e1 = x1
            .scale(10.0)
            .add(&y.scale(2.0))
            .unwrap()
            .add(&c(3, -6.0))
            .unwrap();
        let e2 = x1
            .scale(-2.0)
            .sub(&x2.scale(2.0))
            .unwrap()
            .add(&c(3, 2.0))
            .unwrap();
        assert_eq!(v, vec![e0, e1, e2]);
    }

    #[test]
    fn fig1_symmetrized_jacobian_is_constant() {
        let js = corpus::fig1_game().symmetrized_jacobian();
        let expect = [[0.0, 10.0, 0.0], [10.0, 0.0, 0.0], [0.0, 0.0, 0.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(js.get(i, j), &c(3, expect[i][j]));
            }
        }
        let q = js.quadratic_form(3).unwrap();
        let y1y2 = Polynomial::var(6, 3)
            .mul(&Polynomial::var(6, 4))
            .unwrap()
            .scale(20.0);
        assert_eq!(q, y1y2);
    }

    #[test]
    fn fig1_player_hessian() {
        let h = corpus::fig1_game().player_hessian(0).unwrap();
        assert_eq!(h.dim(), 2);
        assert_eq!(h.get(0, 1), &c(3, 10.0));
        assert!(h.get(0, 0).is_zero());
        assert!(corpus::fig1_game().player_hessian(2).is_err());
    }

    #[test]
    fn quadratic_game_jacobian() {
        let g = PolynomialGame::quadratic(&[2, 1], SemialgebraicSet::boxed(3, 0.0, 1.0)).unwrap();
        let js = g.symmetrized_jacobian();
        for i in 0..3 {
            for j in 0..3 {
                let v = if i == j { -2.0 } else { 0.0 };
                assert_eq!(js.get(i, j), &c(3, v));
            }
        }
        assert_eq!(g.player_hessian(0).unwrap().get(1, 1), &c(3, -2.0));
        let half = PolynomialGame::zero(&[2, 1], SemialgebraicSet::boxed(3, 0.0, 1.0))
            .unwrap()
            .regularize(1.0)
            .unwrap();
        assert_eq!(half.symmetrized_jacobian().get(2, 2), &c(3, -1.0));
    }

    #[test]
    fn regularize_shifts_by_identity() {
        let g = corpus::deg4_game();
        let eps = 0.37;
        let diff = g
            .regularize(eps)
            .unwrap()
            .symmetrized_jacobian()
            .sub(&g.symmetrized_jacobian())
            .unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let v = if i == j { -eps } else { 0.0 };
                assert!(diff.get(i, j).sub(&c(4, v)).unwrap().is_zero(), "({i},{j})");
            }
        }
        assert!(g.regularize(0.0).is_err());
    }

    #[test]
    fn regularize_shift_identity_in_quadratic_form() {
        let g = corpus::fig3_game();
        let eps = 0.25;
        let m = g.n_vars();
        let q_reg = g
            .regularize(eps)
            .unwrap()
            .symmetrized_jacobian()
            .quadratic_form(m)
            .unwrap();
        let q = g.symmetrized_jacobian().quadratic_form(m).unwrap();
        let mut ysq = Polynomial::zero(2 * m);
        for k in 0..m {
            ysq = ysq.add(&Polynomial::var(2 * m, m + k).pow(2)).unwrap();
        }
        assert_eq!(q_reg.add(&ysq.scale(eps)).unwrap(), q);
    }

    #[test]
    fn ball_constraint() {
        let set = SemialgebraicSet::boxed(1, 0.0, 1.0).add_ball_constraint(2.0);
        let x = Polynomial::var(1, 0);
        assert_eq!(set.inequalities().len(), 3);
        assert_eq!(set.inequalities()[2], c(1, 4.0).sub(&x.pow(2)).unwrap());
        let base = SemialgebraicSet::boxed(1, 0.0, 1.0);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let p = [rng.gen_range(-2.0..3.0)];
            assert_eq!(base.contains(&p, 0.0), set.contains(&p, 0.0));
        }
        let simplex =
            SemialgebraicSet::new(2, SemialgebraicSet::simplex_constraints(2, 0..2), vec![])
                .unwrap();
        let with_ball = simplex.add_ball_constraint(2.0);
        let expect = c(2, 4.0)
            .sub(&Polynomial::var(2, 0).pow(2))
            .unwrap()
            .sub(&Polynomial::var(2, 1).pow(2))
            .unwrap();
        assert_eq!(with_ball.inequalities().last().unwrap(), &expect);
    }

    #[test]
    fn malformed_games_rejected() {
        let d = SemialgebraicSet::boxed(2, 0.0, 1.0);
        assert!(PolynomialGame::new(&[1, 1], vec![Polynomial::zero(2)], d.clone()).is_err());
        assert!(PolynomialGame::new(&[1], vec![Polynomial::zero(2)], d.clone()).is_err());
        assert!(PolynomialGame::new(&[1, 1], vec![Polynomial::zero(3); 2], d).is_err());
    }

    #[test]
    fn jacobian_diagonal_blocks_are_player_hessians() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let g = corpus::random_game(&mut rng, &[2, 2], 4);
            let j = g.jacobian();
            for (i, block) in g.blocks().iter().enumerate() {
                let h = g.player_hessian(i).unwrap();
                for (a, ra) in block.clone().enumerate() {
                    for (b, rb) in block.clone().enumerate() {
                        let d = j.get(ra, rb).sub(h.get(a, b)).unwrap();
                        assert!(d.max_abs_coeff() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn symmetrized_jacobian_matches_finite_differences() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let g = corpus::random_game(&mut rng, &[1, 2], 4);
        let js = g.symmetrized_jacobian();
        let v = g.pseudogradient();
        let m = g.n_vars();
        let h = 1e-6;
        for _ in 0..20 {
            let pt: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..1.0)).collect();
            let exact = js.evaluate(&pt).unwrap();
            let mut jac = vec![0.0; m * m];
            for col in 0..m {
                let mut a = pt.clone();
                let mut b = pt.clone();
                a[col] += h;
                b[col] -= h;
                for row in 0..m {
                    jac[row * m + col] =
                        (v[row].evaluate(&a).unwrap() - v[row].evaluate(&b).unwrap()) / (2.0 * h);
                }
            }
            for r in 0..m {
                for s in 0..m {
                    let fd = 0.5 * (jac[r * m + s] + jac[s * m + r]);
                    assert!((fd - exact[r * m + s]).abs() < 1e-4);
                }
            }
        }
    }
}
