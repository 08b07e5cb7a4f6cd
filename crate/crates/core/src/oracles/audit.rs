use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::eigen::jacobi_eigenvalues;
use super::sample::infer_bounding_box;
use crate::error::{Error, Result};
use crate::game::PolynomialGame;
use crate::poly::Polynomial;
use crate::sos::Certificate;

/// Largest accepted pointwise identity mismatch, relative to `1 + |target|`.
pub const AUDIT_IDENTITY_TOL: f64 = 1e-5;
/// Most negative accepted Gram eigenvalue.
pub const AUDIT_PSD_TOL: f64 = -1e-7;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CertificateAudit {
    pub passed: bool,
    pub worst_identity_mismatch: f64,
    /// Smallest Gram eigenvalue by Jacobi rotations.
    pub min_gram_eigenvalue: f64,
    /// Smallest `b(z)^T Q b(z) / |b(z)|^2` over the sample points.
    pub min_sampled_quadratic: f64,
    pub samples: usize,
}

/// Evaluates every certified identity `target = sum g_j b^T Q_j b + sum h_k p_k`
/// at random points of `[-1, 1]^n`, independently of the coefficient
/// comparison used during extraction, and checks each Gram matrix with the
/// Jacobi eigensolver. `targets[k]` belongs to `certificate.parts[k]`.
pub fn check_certificate_sampled(
    certificate: &Certificate,
    targets: &[Polynomial],
    n_samples: usize,
    seed: u64,
) -> Result<CertificateAudit> {
    if targets.len() != certificate.parts.len() {
        return Err(Error::MalformedProblem(format!(
            "{} targets for {} certificate parts",
            targets.len(),
            certificate.parts.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut min_eig = f64::INFINITY;
    let mut min_quad = f64::INFINITY;
    for (part, target) in certificate.parts.iter().zip(targets) {
        for g in &part.grams {
            let n = g.basis.len();
            let dense: Vec<f64> = g.matrix.transpose().iter().copied().collect();
            let eig = jacobi_eigenvalues(&dense, n);
            min_eig = min_eig.min(eig.first().copied().unwrap_or(f64::INFINITY));
        }
        let n = target.n_vars();
        for _ in 0..n_samples {
            let z: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect();
            let mut rhs = 0.0;
            for g in &part.grams {
                let b: Vec<f64> = g.basis.iter().map(|m| m.eval(&z)).collect();
                let mut quad = 0.0;
                for (i, bi) in b.iter().enumerate() {
                    for (j, bj) in b.iter().enumerate() {
                        quad += bi * g.matrix[(i, j)] * bj;
                    }
                }
                let norm: f64 = b.iter().map(|v| v * v).sum();
                if norm > 0.0 {
                    min_quad = min_quad.min(quad / norm);
                }
                rhs += g.multiplier.evaluate(&z)? * quad;
            }
            for f in &part.free_multipliers {
                rhs += f.constraint.evaluate(&z)? * f.polynomial.evaluate(&z)?;
            }
            let t = target.evaluate(&z)?;
            worst = worst.max((t - rhs).abs() / (1.0 + t.abs()));
        }
    }
    Ok(CertificateAudit {
        passed: worst <= AUDIT_IDENTITY_TOL
            && min_eig >= AUDIT_PSD_TOL
            && !(min_quad < AUDIT_PSD_TOL),
        worst_identity_mismatch: worst,
        min_gram_eigenvalue: min_eig,
        min_sampled_quadratic: min_quad,
        samples: n_samples,
    })
}

/// Largest `|symbolic - central difference|` of the pseudogradient over
/// `n_points` random points of the domain's bounding box (`[-1, 1]^n` when
/// none is derivable).
pub fn finite_difference_audit(game: &PolynomialGame, n_points: usize, seed: u64) -> Result<f64> {
    let n = game.n_vars();
    let bbox = infer_bounding_box(game.domain()).unwrap_or_else(|| vec![(-1.0, 1.0); n]);
    let grad = game.pseudogradient();
    let owners: Vec<(usize, usize)> = game
        .blocks()
        .iter()
        .enumerate()
        .flat_map(|(i, b)| b.clone().map(move |k| (i, k)))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..n_points {
        let x: Vec<f64> = bbox
            .iter()
            .map(|&(l, h)| if l == h { l } else { rng.gen_range(l..=h) })
            .collect();
        for (g, &(i, k)) in grad.iter().zip(&owners) {
            let h = 1e-5 * x[k].abs().max(1.0);
            let mut up = x.clone();
            let mut down = x.clone();
            up[k] += h;
            down[k] -= h;
            let u = game.payoff(i);
            let fd = (u.evaluate(&up)? - u.evaluate(&down)?) / (2.0 * h);
            worst = worst.max((g.evaluate(&x)? - fd).abs());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use crate::game::SemialgebraicSet;
    use crate::hierarchy::eigenvalue_problem;
    use crate::sdp::SdpOptions;
    use crate::sos::{solve_membership, SosMembershipProblem};

    fn solved(problem: &SosMembershipProblem) -> (Certificate, Vec<Polynomial>) {
        let out = solve_membership(problem, &SdpOptions::default()).unwrap();
        let cert = out.certificate.unwrap();
        let targets = problem
            .memberships
            .iter()
            .map(|m| m.target.evaluate(&cert.params).unwrap())
            .collect();
        (cert, targets)
    }

    #[test]
    fn audits_accepted_certificates() {
        for (game, level) in [
            (corpus::driver_game(), 2),
            (corpus::fig1_game(), 2),
            (corpus::fig3_game(), 6),
        ] {
            let p = eigenvalue_problem(&game.symmetrized_jacobian(), game.domain(), level).unwrap();
            let (cert, targets) = solved(&p);
            let a = check_certificate_sampled(&cert, &targets, 200, 7).unwrap();
            assert!(a.passed, "{a:?}");
        }
    }

    #[test]
    fn audits_plain_sos() {
        // 1 + x^2 - 2x y + y^2 is a sum of squares over R^2
        let p = corpus::poly(
            2,
            &[
                (1.0, &[0, 0]),
                (1.0, &[2, 0]),
                (-2.0, &[1, 1]),
                (1.0, &[0, 2]),
            ],
        );
        let set = SemialgebraicSet::new(2, vec![], vec![]).unwrap();
        let (cert, targets) = solved(&SosMembershipProblem::feasibility(p, set, 2));
        assert!(
            check_certificate_sampled(&cert, &targets, 100, 1)
                .unwrap()
                .passed
        );
    }

    #[test]
    fn detects_tampering() {
        let game = corpus::driver_game();
        let p = eigenvalue_problem(&game.symmetrized_jacobian(), game.domain(), 2).unwrap();
        let (mut cert, targets) = solved(&p);
        cert.parts[0].grams[0].matrix[(0, 0)] += 0.1;
        let a = check_certificate_sampled(&cert, &targets, 50, 2).unwrap();
        assert!(!a.passed);
        assert!(a.worst_identity_mismatch > 1e-3);
        let (mut cert, targets) = solved(&p);
        let g = &mut cert.parts[0].grams[0].matrix;
        let n = g.nrows();
        g[(n - 1, n - 1)] -= 1.0;
        assert!(
            check_certificate_sampled(&cert, &targets, 50, 2)
                .unwrap()
                .min_gram_eigenvalue
                < -0.5
        );
    }

    #[test]
    fn finite_differences() {
        assert!(finite_difference_audit(&corpus::fig1_game(), 50, 1).unwrap() <= 1e-6);
        assert!(finite_difference_audit(&corpus::deg4_game(), 50, 1).unwrap() <= 1e-4);
        let zero = PolynomialGame::zero(&[1, 2], corpus::unit_box(3)).unwrap();
        assert_eq!(finite_difference_audit(&zero, 10, 1).unwrap(), 0.0);
    }
}
