//! Monotonicity and concavity hierarchies: the smallest `lambda` with
//! `lambda - y^T M(x) y` in the truncated quadratic module of `X x sphere`.

use std::ops::RangeInclusive;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::game::{PolynomialGame, SemialgebraicSet};
use crate::poly::{PolyMatrix, Polynomial};
use crate::sdp::{SdpOptions, SolveStatus};
use crate::sos::{
    solve_membership, AffineTarget, Certificate, DecisionParam, SolverStats, SosMembershipProblem,
};

pub const STRICT_TOL: f64 = 1e-6;
pub const CERT_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CertKind {
    Monotone,
    Concave,
}

impl std::str::FromStr for CertKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "monotone" => Ok(CertKind::Monotone),
            "concave" => Ok(CertKind::Concave),
            other => Err(format!(
                "unknown kind '{other}' (expected monotone or concave)"
            )),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum CertStatus {
    StrictlyCertified,
    Certified,
    Inconclusive,
    Infeasible,
}

impl CertStatus {
    pub fn classify(lambda: f64, opts: &CertOptions) -> CertStatus {
        if lambda < -opts.strict_tol {
            CertStatus::StrictlyCertified
        } else if lambda <= opts.cert_tol {
            CertStatus::Certified
        } else {
            CertStatus::Inconclusive
        }
    }

    pub fn is_certified(self) -> bool {
        matches!(self, CertStatus::StrictlyCertified | CertStatus::Certified)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CertOptions {
    pub sdp_tol: f64,
    pub sdp_max_iter: usize,
    pub strict_tol: f64,
    pub cert_tol: f64,
}

impl Default for CertOptions {
    fn default() -> Self {
        let sdp = SdpOptions::default();
        CertOptions {
            sdp_tol: sdp.tol,
            sdp_max_iter: sdp.max_iter,
            strict_tol: STRICT_TOL,
            cert_tol: CERT_TOL,
        }
    }
}

impl CertOptions {
    pub fn sdp(&self) -> SdpOptions {
        SdpOptions {
            tol: self.sdp_tol,
            max_iter: self.sdp_max_iter,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PlayerLambda {
    pub player: usize,
    pub lambda: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CertResult {
    pub kind: CertKind,
    pub level: u32,
    /// `None` when no decomposition exists at this level.
    pub lambda: Option<f64>,
    pub status: CertStatus,
    pub per_player: Option<Vec<PlayerLambda>>,
    pub solver: Vec<SolverStats>,
    /// Largest identity residual over the certificates behind `lambda`.
    pub residual: Option<f64>,
    #[serde(skip)]
    pub certificates: Vec<Certificate>,
}

/// `lambda - y^T M(x) y` over `x` followed by `dim(M)` sphere variables.
pub fn eigenvalue_target(matrix: &PolyMatrix, n_x: usize) -> Result<AffineTarget> {
    let q = matrix.quadratic_form(n_x)?;
    let n = q.n_vars();
    Ok(AffineTarget {
        constant: q.negate(),
        linear: vec![Polynomial::constant(n, 1.0)],
    })
}

/// The membership problem `min lambda` for `matrix` over `domain x sphere`.
pub fn eigenvalue_problem(
    matrix: &PolyMatrix,
    domain: &SemialgebraicSet,
    level: u32,
) -> Result<SosMembershipProblem> {
    Ok(SosMembershipProblem::single(
        eigenvalue_target(matrix, domain.n_vars())?,
        domain.product(&SemialgebraicSet::sphere(matrix.dim())),
        level,
        vec![DecisionParam::free("lambda")],
        vec![(0, 1.0)],
    ))
}

struct Solved {
    lambda: Option<f64>,
    stats: SolverStats,
    certificate: Option<Certificate>,
}

fn solve_eigen(problem: &SosMembershipProblem, opts: &CertOptions) -> Result<Solved> {
    let out = solve_membership(problem, &opts.sdp())?;
    match (out.certificate, out.status) {
        (Some(c), _) => Ok(Solved {
            lambda: Some(c.optimum),
            stats: out.solver,
            certificate: Some(c),
        }),
        (None, SolveStatus::PrimalInfeasible) => Ok(Solved {
            lambda: None,
            stats: out.solver,
            certificate: None,
        }),
        (None, status) => {
            if let Some(r) = out.rejection {
                log::warn!("solver returned {status:?} without a usable certificate: {r}");
            }
            Err(Error::SolverFailure(status))
        }
    }
}

fn finish(
    kind: CertKind,
    level: u32,
    parts: Vec<Solved>,
    per_player: bool,
    opts: &CertOptions,
) -> CertResult {
    let lambdas: Vec<Option<f64>> = parts.iter().map(|p| p.lambda).collect();
    let lambda = if lambdas.iter().all(Option::is_some) {
        lambdas.iter().flatten().copied().reduce(f64::max)
    } else {
        None
    };
    let status = lambda.map_or(CertStatus::Infeasible, |l| CertStatus::classify(l, opts));
    let certificates: Vec<Certificate> =
        parts.iter().filter_map(|p| p.certificate.clone()).collect();
    let residual = lambda.map(|_| {
        certificates
            .iter()
            .map(|c| c.identity_residual)
            .fold(0.0, f64::max)
    });
    CertResult {
        kind,
        level,
        lambda,
        status,
        per_player: per_player.then(|| {
            lambdas
                .iter()
                .enumerate()
                .map(|(player, &lambda)| PlayerLambda { player, lambda })
                .collect()
        }),
        solver: parts.into_iter().map(|p| p.stats).collect(),
        residual,
        certificates,
    }
}

pub fn certify_monotone(
    game: &PolynomialGame,
    level: u32,
    opts: &CertOptions,
) -> Result<CertResult> {
    game.require_decisions()?;
    let problem = eigenvalue_problem(&game.symmetrized_jacobian(), game.domain(), level)?;
    let solved = solve_eigen(&problem, opts)?;
    Ok(finish(CertKind::Monotone, level, vec![solved], false, opts))
}

pub fn certify_concave(
    game: &PolynomialGame,
    level: u32,
    opts: &CertOptions,
) -> Result<CertResult> {
    game.require_decisions()?;
    let mut parts = Vec::with_capacity(game.n_players());
    for i in 0..game.n_players() {
        let h = game.player_hessian(i)?;
        let problem = eigenvalue_problem(&h, game.domain(), level)?;
        parts.push(solve_eigen(&problem, opts)?);
    }
    Ok(finish(CertKind::Concave, level, parts, true, opts))
}

pub fn certify(
    game: &PolynomialGame,
    kind: CertKind,
    level: u32,
    opts: &CertOptions,
) -> Result<CertResult> {
    match kind {
        CertKind::Monotone => certify_monotone(game, level, opts),
        CertKind::Concave => certify_concave(game, level, opts),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct HierarchyEntry {
    pub level: u32,
    pub result: Option<CertResult>,
    pub error: Option<String>,
}

/// Certifies at every level of `levels`; errors are recorded per level.
pub fn run_hierarchy(
    game: &PolynomialGame,
    levels: RangeInclusive<u32>,
    kind: CertKind,
    opts: &CertOptions,
    stop_on_strict: bool,
) -> Vec<HierarchyEntry> {
    let mut out = Vec::new();
    for level in levels {
        let entry = match certify(game, kind, level, opts) {
            Ok(r) => HierarchyEntry {
                level,
                result: Some(r),
                error: None,
            },
            Err(e) => HierarchyEntry {
                level,
                result: None,
                error: Some(e.to_string()),
            },
        };
        let strict = entry
            .result
            .as_ref()
            .is_some_and(|r| r.status == CertStatus::StrictlyCertified);
        out.push(entry);
        if stop_on_strict && strict {
            break;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use crate::oracles::max_eigenvalue;
    use crate::poly::Monomial;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn opts() -> CertOptions {
        CertOptions::default()
    }

    #[test]
    fn driver_is_strictly_monotone() {
        let r = certify_monotone(&corpus::driver_game(), 2, &opts()).unwrap();
        assert!((r.lambda.unwrap() + 6.0).abs() < 1e-6, "{:?}", r.lambda);
        assert_eq!(r.status, CertStatus::StrictlyCertified);
        assert!(r.residual.unwrap() <= 1e-6);
    }

    #[test]
    fn fig1_is_inconclusive_at_ten() {
        let r = certify_monotone(&corpus::fig1_game(), 2, &opts()).unwrap();
        assert!((r.lambda.unwrap() - 10.0).abs() < 1e-6, "{:?}", r.lambda);
        assert_eq!(r.status, CertStatus::Inconclusive);
    }

    #[test]
    fn concave_examples() {
        let game = corpus::driver_game();
        // one player: own-block Hessian and symmetrized Jacobian coincide
        assert_eq!(game.player_hessian(0).unwrap(), game.symmetrized_jacobian());
        let r = certify_concave(&game, 2, &opts()).unwrap();
        assert!((r.lambda.unwrap() + 6.0).abs() < 1e-6);

        let fig1 = corpus::fig1_game();
        let r = certify_concave(&fig1, 2, &opts()).unwrap();
        assert!(
            (r.lambda.unwrap() - 10.0).abs() < 1e-6,
            "{:?}",
            r.per_player
        );
        let per = r.per_player.unwrap();
        assert_eq!(per.len(), 2);
        // player 2's Hessian in y is identically zero
        assert!(per[1].lambda.unwrap().abs() < 1e-6);
        assert_eq!(r.status, CertStatus::Inconclusive);
    }

    #[test]
    fn zero_game_is_certified_not_strict() {
        let zero = PolynomialGame::zero(&[1, 1], SemialgebraicSet::boxed(2, 0.0, 1.0)).unwrap();
        for kind in [CertKind::Monotone, CertKind::Concave] {
            let r = certify(&zero, kind, 2, &opts()).unwrap();
            assert!(r.lambda.unwrap().abs() <= 1e-6, "{:?}", r.lambda);
            assert_eq!(r.status, CertStatus::Certified);
        }
    }

    #[test]
    fn regularization_shifts_lambda_exactly() {
        let zero = PolynomialGame::zero(&[1, 1], SemialgebraicSet::boxed(2, 0.0, 1.0)).unwrap();
        for eps in [1e-2, 0.5] {
            let r = certify_monotone(&zero.regularize(eps).unwrap(), 2, &opts()).unwrap();
            assert!((r.lambda.unwrap() + eps).abs() <= 1e-6, "{:?}", r.lambda);
            assert_eq!(r.status, CertStatus::StrictlyCertified);
        }
    }

    #[test]
    fn hierarchy_is_flat_for_constant_jacobians() {
        for (game, expect) in [(corpus::driver_game(), -6.0), (corpus::fig1_game(), 10.0)] {
            let entries = run_hierarchy(&game, 2..=4, CertKind::Monotone, &opts(), false);
            assert_eq!(entries.len(), 3);
            for e in entries {
                let l = e.result.unwrap().lambda.unwrap();
                assert!((l - expect).abs() < 1e-6, "level {}: {l}", e.level);
            }
        }
    }

    #[test]
    fn hierarchy_stops_on_strict() {
        let entries = run_hierarchy(
            &corpus::driver_game(),
            2..=5,
            CertKind::Monotone,
            &opts(),
            true,
        );
        assert_eq!(entries.len(), 1);
    }

    #[test]
    fn hierarchy_records_errors_and_continues() {
        // the quadratic form of the degree-5 game has degree 5, so level 4 is a degree violation
        let entries = run_hierarchy(
            &corpus::fig3_game(),
            4..=5,
            CertKind::Monotone,
            &opts(),
            false,
        );
        assert!(entries[0].error.is_some());
        assert!(entries[1].result.is_some(), "{:?}", entries[1].error);
    }

    /// `u_i = K_ii x_i^2 / 2 + sum_{j != i} K_ij x_i x_j` has Jacobian `K`.
    fn quadratic_game(k: &[Vec<f64>]) -> PolynomialGame {
        let m = k.len();
        let payoffs = (0..m)
            .map(|i| {
                let mut terms = Vec::new();
                for j in 0..m {
                    let mut e = vec![0u32; m];
                    e[i] += 1;
                    e[j] += 1;
                    let c = if i == j { 0.5 * k[i][i] } else { k[i][j] };
                    terms.push((Monomial::new(e), c));
                }
                Polynomial::from_terms(m, terms)
            })
            .collect();
        PolynomialGame::new(&vec![1; m], payoffs, SemialgebraicSet::boxed(m, -1.0, 1.0)).unwrap()
    }

    #[test]
    fn random_strictly_monotone_quadratic_games() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for case in 0..5 {
            let m = rng.gen_range(2..=4);
            let a: Vec<Vec<f64>> = (0..m)
                .map(|_| (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect();
            let k: Vec<Vec<f64>> = (0..m)
                .map(|i| {
                    (0..m)
                        .map(|j| {
                            let aat: f64 = (0..m).map(|l| a[i][l] * a[j][l]).sum();
                            -aat - if i == j { 0.1 } else { 0.0 }
                        })
                        .collect()
                })
                .collect();
            let game = quadratic_game(&k);
            let flat: Vec<f64> = k.iter().flatten().copied().collect();
            let oracle = max_eigenvalue(&flat, m);
            let entries = run_hierarchy(&game, 2..=4, CertKind::Monotone, &opts(), true);
            let first = entries[0].result.as_ref().unwrap();
            assert_eq!(first.level, 2);
            assert_eq!(first.status, CertStatus::StrictlyCertified, "case {case}");
            assert!(
                (first.lambda.unwrap() - oracle).abs() < 1e-6,
                "case {case}: {:?} vs {oracle}",
                first.lambda
            );
        }
    }
}
