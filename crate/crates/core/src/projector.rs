//! Nearest certifiable game in the coefficient max-norm, and the gauge of a
//! game (the smallest uniform regularization that makes it certifiable).

use std::collections::BTreeSet;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::game::{PolynomialGame, SemialgebraicSet};
use crate::hierarchy::{CertKind, CertOptions};
use crate::poly::{monomials_up_to, Monomial, PolyMatrix, Polynomial};
use crate::sdp::{Relation, SolveStatus};
use crate::sos::{
    solve_membership, AffineTarget, Certificate, CertificateStats, DecisionParam, Membership,
    MembershipOutcome, ParamConstraint, SolverStats, SosMembershipProblem,
};

/// Agreement required between two constraints that pin the same coefficient.
const PIN_TOL: f64 = 1e-12;

/// Coefficient of `monomial` in player `player`'s payoff, held at its
/// reference value.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FrozenCoefficient {
    pub player: usize,
    pub monomial: Monomial,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ProjectionConstraints {
    /// Two players only: the projected game satisfies `u_2 = -u_1`.
    pub zero_sum: bool,
    /// Coefficients outside the reference support of each payoff stay zero.
    pub preserve_support: bool,
    pub frozen: Vec<FrozenCoefficient>,
}

#[derive(Clone, Debug)]
pub struct ProjectionSpec {
    pub reference: PolynomialGame,
    pub level: u32,
    pub kind: CertKind,
    pub constraints: ProjectionConstraints,
}

#[derive(Clone, Debug)]
pub struct ProjectionResult {
    pub game: PolynomialGame,
    /// `max_i ||coeffs(u_i) - coeffs(u*_i)||_inf`, recomputed from `game`.
    pub distance: f64,
    /// Epigraph variable at the returned point.
    pub bound: f64,
    pub level: u32,
    pub kind: CertKind,
    pub certificate: Certificate,
    pub solver: SolverStats,
}

/// Value of one payoff coefficient: pinned, or `sign * params[index]`.
#[derive(Clone, Copy, Debug, PartialEq)]
enum Slot {
    Fixed(f64),
    Param { index: usize, sign: f64 },
}

struct Parametrization {
    basis: Vec<Monomial>,
    /// `slots[i][k]` is the coefficient of `basis[k]` in payoff `i`.
    slots: Vec<Vec<Slot>>,
    n_coeff_params: usize,
}

impl Parametrization {
    fn new(spec: &ProjectionSpec) -> Result<Self> {
        let g = &spec.reference;
        let n_players = g.n_players();
        let c = &spec.constraints;
        if c.zero_sum && n_players != 2 {
            return Err(Error::MalformedGame(format!(
                "zero-sum projection needs 2 players, game has {n_players}"
            )));
        }
        let frozen: BTreeSet<(usize, &Monomial)> =
            c.frozen.iter().map(|f| (f.player, &f.monomial)).collect();
        for f in &c.frozen {
            if f.player >= n_players {
                return Err(Error::PlayerOutOfRange {
                    index: f.player,
                    n_players,
                });
            }
            if f.monomial.n_vars() != g.n_vars() {
                return Err(Error::VarCountMismatch {
                    left: f.monomial.n_vars(),
                    right: g.n_vars(),
                });
            }
        }
        let degree = g
            .payoffs()
            .iter()
            .map(Polynomial::degree)
            .max()
            .unwrap_or(0);
        let mut basis = monomials_up_to(g.n_vars(), degree);
        // frozen monomials above the payoff degree still pin a coefficient
        for f in &c.frozen {
            if !basis.contains(&f.monomial) {
                basis.push(f.monomial.clone());
            }
        }
        // the value player `i`'s own constraints force on its coefficient of `m`
        let pin = |i: usize, m: &Monomial| -> Option<f64> {
            let reference = g.payoff(i).coeff(m);
            if frozen.contains(&(i, m)) {
                Some(reference)
            } else if c.preserve_support && reference == 0.0 {
                Some(0.0)
            } else {
                None
            }
        };
        let mut n = 0;
        let mut slots = vec![Vec::with_capacity(basis.len()); n_players];
        for m in &basis {
            if c.zero_sum {
                // everything is expressed through player 0's coefficient
                let pins: Vec<f64> = [pin(0, m), pin(1, m).map(|v| -v)]
                    .into_iter()
                    .flatten()
                    .collect();
                let first = match pins.first() {
                    Some(&v) => {
                        if pins.iter().any(|&w| (w - v).abs() > PIN_TOL) {
                            return Err(Error::ProjectionInfeasible(spec.level));
                        }
                        Slot::Fixed(v)
                    }
                    None => {
                        n += 1;
                        Slot::Param {
                            index: n - 1,
                            sign: 1.0,
                        }
                    }
                };
                let second = match first {
                    Slot::Fixed(v) => Slot::Fixed(-v),
                    Slot::Param { index, .. } => Slot::Param { index, sign: -1.0 },
                };
                slots[0].push(first);
                slots[1].push(second);
            } else {
                for (i, row) in slots.iter_mut().enumerate() {
                    row.push(match pin(i, m) {
                        Some(v) => Slot::Fixed(v),
                        None => {
                            n += 1;
                            Slot::Param {
                                index: n - 1,
                                sign: 1.0,
                            }
                        }
                    });
                }
            }
        }
        Ok(Parametrization {
            basis,
            slots,
            n_coeff_params: n,
        })
    }

    /// Payoffs at parameter values `params`.
    fn payoffs(&self, game: &PolynomialGame, params: &[f64]) -> Vec<Polynomial> {
        self.slots
            .iter()
            .map(|row| {
                Polynomial::from_terms(
                    game.n_vars(),
                    row.iter().zip(&self.basis).map(|(s, m)| {
                        let v = match *s {
                            Slot::Fixed(v) => v,
                            Slot::Param { index, sign } => sign * params[index],
                        };
                        (m.clone(), v)
                    }),
                )
            })
            .collect()
    }

    /// Payoffs made of the pinned coefficients only.
    fn fixed_part(&self, game: &PolynomialGame) -> Vec<Polynomial> {
        self.payoffs(game, &vec![0.0; self.n_coeff_params])
    }

    /// Payoffs whose coefficients are the derivative in parameter `k`.
    fn direction(&self, game: &PolynomialGame, k: usize) -> Vec<Polynomial> {
        let n = game.n_vars();
        self.slots
            .iter()
            .map(|row| {
                Polynomial::from_terms(
                    n,
                    row.iter().zip(&self.basis).filter_map(|(s, m)| match *s {
                        Slot::Param { index, sign } if index == k => Some((m.clone(), sign)),
                        _ => None,
                    }),
                )
            })
            .collect()
    }
}

/// Matrices whose negative quadratic forms must be certified nonnegative.
fn certified_matrices(game: &PolynomialGame, kind: CertKind) -> Result<Vec<PolyMatrix>> {
    match kind {
        CertKind::Monotone => Ok(vec![game.symmetrized_jacobian()]),
        CertKind::Concave => (0..game.n_players())
            .map(|i| game.player_hessian(i))
            .collect(),
    }
}

/// `-y^T M y` for every certified matrix of `game`.
fn negated_forms(game: &PolynomialGame, kind: CertKind) -> Result<Vec<Polynomial>> {
    certified_matrices(game, kind)?
        .iter()
        .map(|m| Ok(m.quadratic_form(game.n_vars())?.negate()))
        .collect()
}

fn sphere_sets(game: &PolynomialGame, kind: CertKind) -> Vec<SemialgebraicSet> {
    let dims = match kind {
        CertKind::Monotone => vec![game.n_vars()],
        CertKind::Concave => game.block_sizes(),
    };
    dims.into_iter()
        .map(|d| game.domain().product(&SemialgebraicSet::sphere(d)))
        .collect()
}

fn certificate_or_error(out: MembershipOutcome, level: u32) -> Result<(Certificate, SolverStats)> {
    match (out.certificate, out.status) {
        (Some(c), _) => Ok((c, out.solver)),
        (None, SolveStatus::PrimalInfeasible) => Err(Error::ProjectionInfeasible(level)),
        (None, status) => {
            if let Some(r) = out.rejection {
                log::warn!("solver returned {status:?} without a usable certificate: {r}");
            }
            Err(Error::SolverFailure(status))
        }
    }
}

/// Closest game to `spec.reference` whose certified matrices have
/// nonpositive quadratic forms at level `spec.level`, in the max-norm over
/// all payoff coefficients up to the reference payoff degree.
/// The SOS program solved by [`project`]: coefficient parameters `c0..`
/// followed by the epigraph variable `t`, minimizing `t`.
pub fn projection_problem(spec: &ProjectionSpec) -> Result<SosMembershipProblem> {
    Ok(build_problem(spec)?.0)
}

fn build_problem(spec: &ProjectionSpec) -> Result<(SosMembershipProblem, Parametrization)> {
    let reference = &spec.reference;
    reference.require_decisions()?;
    let par = Parametrization::new(spec)?;
    let n_c = par.n_coeff_params;
    let t = n_c;

    let fixed = reference.with_payoffs(par.fixed_part(reference))?;
    let constants = negated_forms(&fixed, spec.kind)?;
    let mut linear: Vec<Vec<Polynomial>> = vec![Vec::with_capacity(n_c + 1); constants.len()];
    let zero_payoffs = vec![Polynomial::zero(reference.n_vars()); reference.n_players()];
    for k in 0..n_c {
        let dir = reference.with_payoffs(par.direction(reference, k))?;
        for (slot, q) in linear.iter_mut().zip(negated_forms(&dir, spec.kind)?) {
            slot.push(q);
        }
    }
    // the epigraph variable does not enter any target
    let zero_game = reference.with_payoffs(zero_payoffs)?;
    for (slot, q) in linear.iter_mut().zip(negated_forms(&zero_game, spec.kind)?) {
        slot.push(q);
    }
    let memberships = constants
        .into_iter()
        .zip(linear)
        .zip(sphere_sets(reference, spec.kind))
        .map(|((constant, linear), set)| Membership {
            target: AffineTarget { constant, linear },
            set,
        })
        .collect();

    // |coefficient - reference| <= t for every slot
    let mut constraints = Vec::new();
    let mut floor: f64 = 0.0;
    for (i, row) in par.slots.iter().enumerate() {
        for (slot, m) in row.iter().zip(&par.basis) {
            let r = reference.payoff(i).coeff(m);
            match *slot {
                Slot::Fixed(v) => floor = floor.max((v - r).abs()),
                Slot::Param { index, sign } => {
                    for s in [1.0, -1.0] {
                        constraints.push(ParamConstraint {
                            coeffs: vec![(index, s * sign), (t, -1.0)],
                            rhs: s * r,
                            relation: Relation::Le,
                        });
                    }
                }
            }
        }
    }
    if floor > 0.0 {
        constraints.push(ParamConstraint {
            coeffs: vec![(t, -1.0)],
            rhs: -floor,
            relation: Relation::Le,
        });
    }

    let mut params: Vec<DecisionParam> = (0..n_c)
        .map(|k| DecisionParam::free(format!("c{k}")))
        .collect();
    params.push(DecisionParam::free("t"));
    let problem = SosMembershipProblem {
        memberships,
        params,
        level: spec.level,
        objective: vec![(t, 1.0)],
        constraints,
    };
    Ok((problem, par))
}

pub fn project(spec: &ProjectionSpec, opts: &CertOptions) -> Result<ProjectionResult> {
    let reference = &spec.reference;
    let (problem, par) = build_problem(spec)?;
    let t = par.n_coeff_params;
    let out = solve_membership(&problem, &opts.sdp())?;
    let (certificate, solver) = certificate_or_error(out, spec.level)?;
    let game = reference.with_payoffs(par.payoffs(reference, &certificate.params))?;
    let distance = game.distance(reference)?;
    Ok(ProjectionResult {
        distance,
        bound: certificate.params[t],
        game,
        level: spec.level,
        kind: spec.kind,
        certificate,
        solver,
    })
}

#[derive(Clone, Debug)]
pub struct GaugeResult {
    /// Smallest `eps >= 0` with `-y^T J_S y + 2 eps |y|^2` in the module.
    pub epsilon: f64,
    pub level: u32,
    pub certificate: Certificate,
    pub solver: SolverStats,
}

/// Smallest uniform shift making the monotonicity form certifiable:
/// `regularize(game, 2 * epsilon)` is then certified at `level`.
pub fn gauge(game: &PolynomialGame, level: u32, opts: &CertOptions) -> Result<GaugeResult> {
    game.require_decisions()?;
    let n_x = game.n_vars();
    let q = game.symmetrized_jacobian().quadratic_form(n_x)?;
    let n = n_x + n_x;
    let mut y_sq = Polynomial::zero(n);
    for k in 0..n_x {
        y_sq = y_sq.add(&Polynomial::var(n, n_x + k).pow(2))?;
    }
    let target = AffineTarget {
        constant: q.embed(n, 0).negate(),
        linear: vec![y_sq.scale(2.0)],
    };
    let problem = SosMembershipProblem::single(
        target,
        game.domain().product(&SemialgebraicSet::sphere(n_x)),
        level,
        vec![DecisionParam::nonnegative("eps")],
        vec![(0, 1.0)],
    );
    let out = solve_membership(&problem, &opts.sdp())?;
    let (certificate, solver) = certificate_or_error(out, level)?;
    Ok(GaugeResult {
        epsilon: certificate.params[0],
        level,
        certificate,
        solver,
    })
}

/// Per-player coefficient changes for reports.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PayoffDiff {
    pub player: usize,
    pub max_abs_change: f64,
    /// `(monomial, reference, projected)` for every changed coefficient.
    pub changes: Vec<(String, f64, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProjectionReport {
    pub distance: f64,
    pub bound: f64,
    pub level: u32,
    pub kind: CertKind,
    pub constraints: ProjectionConstraints,
    pub payoff_diffs: Vec<PayoffDiff>,
    pub certificate: CertificateStats,
    pub solver: SolverStats,
}

impl ProjectionResult {
    /// Summary; changes smaller than `threshold` are omitted from the
    /// per-coefficient lists.
    pub fn report(
        &self,
        reference: &PolynomialGame,
        constraints: &ProjectionConstraints,
        threshold: f64,
    ) -> Result<ProjectionReport> {
        let mut diffs = Vec::new();
        for (i, (a, b)) in reference
            .payoffs()
            .iter()
            .zip(self.game.payoffs())
            .enumerate()
        {
            let support: BTreeSet<&Monomial> = a.support().chain(b.support()).collect();
            let changes = support
                .into_iter()
                .map(|m| (m.to_string(), a.coeff(m), b.coeff(m)))
                .filter(|(_, r, p)| (p - r).abs() >= threshold)
                .collect();
            diffs.push(PayoffDiff {
                player: i,
                max_abs_change: a.max_abs_diff(b)?,
                changes,
            });
        }
        Ok(ProjectionReport {
            distance: self.distance,
            bound: self.bound,
            level: self.level,
            kind: self.kind,
            constraints: constraints.clone(),
            payoff_diffs: diffs,
            certificate: self.certificate.stats(),
            solver: self.solver.clone(),
        })
    }
}
