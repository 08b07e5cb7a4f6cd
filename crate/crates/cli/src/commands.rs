use std::io::Write as _;
use std::path::Path;

use gamecert::efg::efg_to_game;
use gamecert::hierarchy::{
    eigenvalue_problem, run_hierarchy, CertKind, CertResult, CertStatus, HierarchyEntry,
};
use gamecert::io::{game_to_json, read_efg, read_game, to_pretty_json, GameJson};
use gamecert::oracles::{sample_max_eigenvalue, SampleReport};
use gamecert::projector::{self, ProjectionReport, ProjectionSpec};
use gamecert::sdp::to_sdpa_string;
use gamecert::sos::{compile, CertificateStats, SolverStats};
use gamecert::{Error, PolynomialGame, Result};
use serde::Serialize;

use crate::config::{Report, RunConfig};

/// Sampled eigenvalues may exceed a valid bound by at most this much.
pub const VERIFY_TOL: f64 = 1e-6;

/// Process exit codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Certified = 0,
    Error = 1,
    Inconclusive = 2,
    Infeasible = 3,
}

impl Outcome {
    pub fn for_error(e: &Error) -> Outcome {
        match e {
            Error::ProjectionInfeasible(_) => Outcome::Infeasible,
            _ => Outcome::Error,
        }
    }

    fn label(self) -> &'static str {
        match self {
            Outcome::Certified => "certified",
            Outcome::Error => "error",
            Outcome::Inconclusive => "inconclusive",
            Outcome::Infeasible => "infeasible",
        }
    }
}

fn emit(config: &RunConfig, text: &str) -> Result<()> {
    match &config.output {
        Some(path) => std::fs::write(path, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn emit_report<T: Serialize>(config: &RunConfig, outcome: Outcome, result: T) -> Result<()> {
    emit(
        config,
        &to_pretty_json(&Report::new(config, outcome.label(), result))?,
    )
}

fn load_game(config: &RunConfig) -> Result<PolynomialGame> {
    let game = read_game(&config.inputs[0])?;
    match config.add_ball {
        Some(r) => game.with_ball_constraint(r),
        None => Ok(game),
    }
}

#[derive(Serialize)]
struct Verification {
    sampled: SampleReport,
    tolerance: f64,
    /// Levels whose bound lies below a sampled eigenvalue.
    contradicted_levels: Vec<u32>,
}

#[derive(Serialize)]
struct CertifyResult {
    levels: Vec<HierarchyEntry>,
    verification: Option<Verification>,
}

/// Whether `r` is consistent with the sampled maxima.
fn bound_holds(r: &CertResult, sampled: &SampleReport) -> bool {
    match (&r.per_player, &sampled.per_player_max) {
        (Some(per), Some(max)) => per
            .iter()
            .zip(max)
            .all(|(p, &m)| p.lambda.is_none_or(|l| l >= m - VERIFY_TOL)),
        _ => r.lambda.is_none_or(|l| l >= sampled.max - VERIFY_TOL),
    }
}

pub fn certify(config: &RunConfig) -> Result<Outcome> {
    let game = load_game(config)?;
    let (a, b) = config.levels.unwrap_or((config.level, config.level));
    let levels = run_hierarchy(&game, a..=b, config.kind, &config.options, false);

    let verification = if config.verify > 0 {
        let sampled = sample_max_eigenvalue(&game, config.kind, config.verify, None, config.seed)?;
        let contradicted_levels = levels
            .iter()
            .filter(|e| e.result.as_ref().is_some_and(|r| !bound_holds(r, &sampled)))
            .map(|e| e.level)
            .collect();
        Some(Verification {
            sampled,
            tolerance: VERIFY_TOL,
            contradicted_levels,
        })
    } else {
        None
    };

    let statuses: Vec<CertStatus> = levels
        .iter()
        .filter_map(|e| e.result.as_ref().map(|r| r.status))
        .collect();
    let contradicted = verification
        .as_ref()
        .is_some_and(|v| !v.contradicted_levels.is_empty());
    let outcome = if statuses.is_empty() || contradicted {
        Outcome::Error
    } else if statuses.iter().any(|s| s.is_certified()) {
        Outcome::Certified
    } else if statuses.iter().all(|&s| s == CertStatus::Infeasible) {
        Outcome::Infeasible
    } else {
        Outcome::Inconclusive
    };
    for e in &levels {
        if let Some(msg) = &e.error {
            eprintln!("level {}: {msg}", e.level);
        }
    }
    if contradicted {
        eprintln!("error: a sampled eigenvalue exceeds the certified bound");
    }
    emit_report(
        config,
        outcome,
        CertifyResult {
            levels,
            verification,
        },
    )?;
    Ok(outcome)
}

#[derive(Serialize)]
struct ProjectResult {
    #[serde(flatten)]
    report: ProjectionReport,
    game: GameJson,
}

#[derive(Serialize)]
struct Failure {
    error: String,
}

/// Changes below this magnitude are left out of the payoff diff.
const DIFF_THRESHOLD: f64 = 1e-9;

pub fn project(config: &RunConfig, game_out: Option<&Path>) -> Result<Outcome> {
    let spec = ProjectionSpec {
        reference: load_game(config)?,
        level: config.level,
        kind: config.kind,
        constraints: config.projection.clone(),
    };
    match projector::project(&spec, &config.options) {
        Ok(r) => {
            let report = r.report(&spec.reference, &spec.constraints, DIFF_THRESHOLD)?;
            if let Some(path) = game_out {
                std::fs::write(path, game_to_json(&r.game, None))?;
            }
            let result = ProjectResult {
                report,
                game: GameJson::from_game(&r.game, None),
            };
            emit_report(config, Outcome::Certified, result)?;
            Ok(Outcome::Certified)
        }
        Err(e @ Error::ProjectionInfeasible(_)) => {
            eprintln!("error: {e}");
            emit_report(
                config,
                Outcome::Infeasible,
                Failure {
                    error: e.to_string(),
                },
            )?;
            Ok(Outcome::Infeasible)
        }
        Err(e) => Err(e),
    }
}

pub fn efg2poly(config: &RunConfig) -> Result<Outcome> {
    let tree = read_efg(&config.inputs[0])?;
    let (game, map) = efg_to_game(&tree)?;
    emit(config, &game_to_json(&game, Some(&map)))?;
    Ok(Outcome::Certified)
}

pub fn export_sdpa(config: &RunConfig, projection: bool, player: usize) -> Result<Outcome> {
    let game = load_game(config)?;
    let problem = if projection {
        projector::projection_problem(&ProjectionSpec {
            reference: game,
            level: config.level,
            kind: config.kind,
            constraints: config.projection.clone(),
        })?
    } else {
        let matrix = match config.kind {
            CertKind::Monotone => game.symmetrized_jacobian(),
            CertKind::Concave => game.player_hessian(player)?,
        };
        eigenvalue_problem(&matrix, game.domain(), config.level)?
    };
    emit(config, &to_sdpa_string(&compile(&problem)?.sdp)?)?;
    Ok(Outcome::Certified)
}

#[derive(Serialize)]
struct GaugeReport {
    epsilon: f64,
    /// Quadratic regularization weight `2 * epsilon` that makes the game
    /// certifiably monotone.
    regularization: f64,
    level: u32,
    certificate: CertificateStats,
    solver: SolverStats,
}

pub fn gauge(config: &RunConfig) -> Result<Outcome> {
    if config.kind != CertKind::Monotone {
        return Err(Error::MalformedProblem(
            "the gauge is defined for the monotone kind only".into(),
        ));
    }
    let game = load_game(config)?;
    let g = projector::gauge(&game, config.level, &config.options)?;
    emit_report(
        config,
        Outcome::Certified,
        GaugeReport {
            epsilon: g.epsilon,
            regularization: 2.0 * g.epsilon,
            level: g.level,
            certificate: g.certificate.stats(),
            solver: g.solver,
        },
    )?;
    Ok(Outcome::Certified)
}
