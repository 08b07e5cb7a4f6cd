//! Reference games used throughout the tests, benches and the bundled corpus.
//!
//! Each constructor builds the game directly from its published polynomial
//! coefficients; none of them goes through the extensive-form converter, so
//! they double as independent fixtures for it.

use rand::Rng;

use crate::efg::{EfgNode, EfgTree};
use crate::game::{PolynomialGame, SemialgebraicSet};
use crate::poly::{monomials_up_to, Monomial, Polynomial};

/// Builds a polynomial from `(coefficient, exponents)` pairs.
pub fn poly(n_vars: usize, terms: &[(f64, &[u32])]) -> Polynomial {
    Polynomial::from_terms(
        n_vars,
        terms.iter().map(|(c, e)| (Monomial::new(e.to_vec()), *c)),
    )
}

fn simplex_domain(n_vars: usize, blocks: &[std::ops::Range<usize>]) -> SemialgebraicSet {
    let ineq = blocks
        .iter()
        .flat_map(|b| SemialgebraicSet::simplex_constraints(n_vars, b.clone()))
        .collect();
    SemialgebraicSet::new(n_vars, ineq, vec![]).unwrap()
}

/// Unit box written per variable as `x_k >= 0, 1 - x_k >= 0`.
pub fn unit_box(n_vars: usize) -> SemialgebraicSet {
    let blocks: Vec<_> = (0..n_vars).map(|k| k..k + 1).collect();
    simplex_domain(n_vars, &blocks)
}

/// Absent-minded driver: `u(x) = -3x^2 + 4x` on `[0, 1]`.
pub fn driver_game() -> PolynomialGame {
    let u = poly(1, &[(-3.0, &[2]), (4.0, &[1])]);
    PolynomialGame::new(&[1], vec![u], unit_box(1)).unwrap()
}

/// Player 1's payoff of the two-player zero-sum game without equilibria,
/// over `(x1, x2, y)`.
pub fn fig1_payoff() -> Polynomial {
    poly(
        3,
        &[
            (10.0, &[1, 1, 0]),
            (2.0, &[1, 0, 1]),
            (2.0, &[0, 1, 1]),
            (-6.0, &[1, 0, 0]),
            (-6.0, &[0, 1, 0]),
            (-2.0, &[0, 0, 1]),
            (1.0, &[0, 0, 0]),
        ],
    )
}

/// Zero-sum game: player 1 controls `(x1, x2)`, player 2 controls `y`.
pub fn fig1_game() -> PolynomialGame {
    let u1 = fig1_payoff();
    let u2 = u1.negate();
    PolynomialGame::new(&[2, 1], vec![u1, u2], unit_box(3)).unwrap()
}

/// Degree-4 strictly monotone game over two 2-simplices, `(x1, x2, y1, y2)`.
pub fn deg4_game() -> PolynomialGame {
    // exponent order: x1 x2 y1 y2
    let u1 = poly(
        4,
        &[
            (-0.5, &[0, 0, 0, 2]),
            (-0.5, &[0, 0, 2, 0]),
            (-0.5, &[0, 2, 0, 0]),
            (-0.5, &[2, 0, 0, 0]),
            (-9.365, &[0, 0, 0, 4]),
            (-9.365, &[0, 0, 2, 2]),
            (-9.365, &[0, 0, 4, 0]),
            (-1.171, &[0, 2, 0, 2]),
            (0.08798, &[0, 2, 1, 1]),
            (-0.9385, &[0, 2, 2, 0]),
            (-9.3654, &[0, 4, 0, 0]),
            (0.7825, &[1, 1, 0, 2]),
            (0.5177, &[1, 1, 1, 1]),
            (-0.5465, &[1, 1, 2, 0]),
            (-0.1310, &[2, 0, 0, 2]),
            (-0.1630, &[2, 0, 1, 1]),
            (-0.1308, &[2, 0, 2, 0]),
            (-9.365, &[2, 2, 0, 0]),
            (-9.365, &[4, 0, 0, 0]),
        ],
    );
    let u2 = poly(
        4,
        &[
            (-0.5, &[0, 0, 0, 2]),
            (-0.5, &[0, 0, 2, 0]),
            (-0.5, &[0, 2, 0, 0]),
            (-0.5, &[2, 0, 0, 0]),
            (-6.828, &[0, 0, 0, 4]),
            (-6.828, &[0, 0, 2, 2]),
            (-6.828, &[0, 0, 4, 0]),
            (-0.8535, &[0, 2, 0, 2]),
            (-0.8631, &[0, 2, 1, 1]),
            (-0.5324, &[0, 2, 2, 0]),
            (-6.828, &[0, 4, 0, 0]),
            (-1.091, &[1, 1, 0, 2]),
            (-1.699, &[1, 1, 1, 1]),
            (-0.4118, &[1, 1, 2, 0]),
            (-0.3886, &[2, 0, 0, 2]),
            (-0.9771, &[2, 0, 1, 1]),
            (-0.6141, &[2, 0, 2, 0]),
            (-6.828, &[2, 2, 0, 0]),
            (-6.828, &[4, 0, 0, 0]),
        ],
    );
    PolynomialGame::new(&[2, 2], vec![u1, u2], simplex_domain(4, &[0..2, 2..4])).unwrap()
}

/// Player 1's payoff in the degree-5 zero-sum game over `(x, y)`.
pub fn fig3_payoff() -> Polynomial {
    poly(
        2,
        &[
            (-16.0, &[4, 1]),
            (25.0, &[4, 0]),
            (74.0, &[3, 1]),
            (-59.0, &[3, 0]),
            (-89.0, &[2, 1]),
            (49.0, &[2, 0]),
            (45.0, &[1, 1]),
            (-19.0, &[1, 0]),
            (-8.0, &[0, 1]),
            (3.0, &[0, 0]),
        ],
    )
}

pub fn fig3_game() -> PolynomialGame {
    let u1 = fig3_payoff();
    let u2 = u1.negate();
    PolynomialGame::new(&[1, 1], vec![u1, u2], unit_box(2)).unwrap()
}

/// Degree-8 general-sum game over two 2-simplices `(x1, x2, y1, y2)`,
/// read from the bundled corpus file.
pub fn deg8_game() -> PolynomialGame {
    crate::io::game_from_json(include_str!("../../../corpus/deg8.game.json"))
        .expect("bundled corpus file is valid")
}

/// One-player tree with a single infoset `I` visited twice: continue (`C`)
/// twice pays 1, exit (`E`) at the second node pays 4, exiting at once pays 0.
pub fn driver_tree() -> EfgTree {
    let second = EfgNode::decision(
        0,
        "I",
        vec![
            ("C", EfgNode::terminal(vec![1.0])),
            ("E", EfgNode::terminal(vec![4.0])),
        ],
    );
    EfgTree {
        players: 1,
        root: EfgNode::decision(
            0,
            "I",
            vec![("C", second), ("E", EfgNode::terminal(vec![0.0]))],
        ),
    }
}

/// Player 1 moves at `a1`, then again at the forgotten infoset `a23`;
/// player 2 moves without observing either. Actions are listed `L, R` and
/// `l, r`, so the variables are `P(L | a1)`, `P(L | a23)` and `P(l)`.
pub fn fig1_tree() -> EfgTree {
    let p2 = |ll: f64, rr: f64| {
        EfgNode::decision(
            1,
            "b",
            vec![
                ("l", EfgNode::terminal(vec![ll, -ll])),
                ("r", EfgNode::terminal(vec![rr, -rr])),
            ],
        )
    };
    let second = |l: EfgNode, r: EfgNode| EfgNode::decision(0, "a23", vec![("L", l), ("R", r)]);
    EfgTree {
        players: 2,
        root: EfgNode::decision(
            0,
            "a1",
            vec![
                ("L", second(p2(1.0, -1.0), p2(-5.0, -5.0))),
                ("R", second(p2(-5.0, -5.0), p2(-1.0, 1.0))),
            ],
        ),
    }
}

/// Player 1 moves four times in one infoset, then player 2 moves once.
/// Leaf values are player 1's payoffs for the sixteen `L/R` sequences in
/// lexicographic order, each as `(l, r)`.
pub fn fig3_tree() -> EfgTree {
    const LEAVES: [(f64, f64); 16] = [
        (5.0, -1.0),
        (-5.0, 2.0),
        (3.0, -2.0),
        (4.0, 1.0),
        (-3.0, -2.0),
        (-1.0, 2.0),
        (1.0, -3.0),
        (2.0, -2.0),
        (-2.0, -4.0),
        (4.0, 1.0),
        (2.0, 5.0),
        (-5.0, -1.0),
        (-2.0, 4.0),
        (4.0, -5.0),
        (5.0, 1.0),
        (-5.0, 3.0),
    ];
    fn build(depth: usize, index: usize) -> EfgNode {
        if depth == 4 {
            let (l, r) = LEAVES[index];
            return EfgNode::decision(
                1,
                "P2",
                vec![
                    ("l", EfgNode::terminal(vec![l, -l])),
                    ("r", EfgNode::terminal(vec![r, -r])),
                ],
            );
        }
        EfgNode::decision(
            0,
            "P1",
            vec![
                ("L", build(depth + 1, 2 * index)),
                ("R", build(depth + 1, 2 * index + 1)),
            ],
        )
    }
    EfgTree {
        players: 2,
        root: build(0, 0),
    }
}

/// Random dense game on the unit box: every coefficient of degree `<= degree`
/// drawn uniformly from `[-1, 1]`.
pub fn random_game<R: Rng>(rng: &mut R, block_sizes: &[usize], degree: u32) -> PolynomialGame {
    let m: usize = block_sizes.iter().sum();
    let basis = monomials_up_to(m, degree);
    let payoffs = block_sizes
        .iter()
        .map(|_| {
            Polynomial::from_terms(
                m,
                basis.iter().map(|b| (b.clone(), rng.gen_range(-1.0..1.0))),
            )
        })
        .collect();
    PolynomialGame::new(block_sizes, payoffs, unit_box(m)).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io;
    use std::path::PathBuf;

    fn dir() -> PathBuf {
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
    }

    #[test]
    fn bundled_games_match_constructors() {
        for (name, g) in [
            ("driver", driver_game()),
            ("fig1", fig1_game()),
            ("deg4", deg4_game()),
            ("fig3", fig3_game()),
        ] {
            let file = io::read_game(&dir().join(format!("{name}.game.json"))).unwrap();
            assert_eq!(file, g, "{name}");
        }
    }

    #[test]
    fn bundled_trees_match_constructors() {
        for (name, t) in [
            ("driver", driver_tree()),
            ("fig1", fig1_tree()),
            ("fig3", fig3_tree()),
        ] {
            let file = io::read_efg(&dir().join(format!("{name}.efg.json"))).unwrap();
            assert_eq!(file, t, "{name}");
        }
    }

    #[test]
    fn deg8_basis() {
        let g = deg8_game();
        assert_eq!(g.block_sizes(), vec![2, 2]);
        for u in g.payoffs() {
            assert_eq!(u.n_terms(), 168);
            assert_eq!(u.degree(), 8);
            assert!(u.terms().all(|(m, _)| {
                let e = m.exponents();
                e[0] + e[1] <= 6 && e[2] + e[3] <= 2
            }));
        }
    }
}
