use std::path::PathBuf;

use gamecert::hierarchy::{CertKind, CertOptions};
use gamecert::oracles::DEFAULT_SEED;
use gamecert::projector::{FrozenCoefficient, ProjectionConstraints};
use serde::Serialize;

pub const TOOL: &str = "gamecert";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Default relaxation level for every command.
pub const DEFAULT_LEVEL: u32 = 2;

/// Effective settings of one run, echoed into every report.
#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    pub command: &'static str,
    pub inputs: Vec<PathBuf>,
    pub kind: CertKind,
    pub level: u32,
    /// Inclusive level range; overrides `level` when present.
    pub levels: Option<(u32, u32)>,
    pub options: CertOptions,
    /// Radius of the added ball constraint, if any.
    pub add_ball: Option<f64>,
    pub projection: ProjectionConstraints,
    /// Number of sampling points for the empirical cross-check; 0 disables it.
    pub verify: usize,
    pub seed: u64,
    pub output: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(command: &'static str, inputs: Vec<PathBuf>) -> Self {
        RunConfig {
            command,
            inputs,
            kind: CertKind::Monotone,
            level: DEFAULT_LEVEL,
            levels: None,
            options: CertOptions::default(),
            add_ball: None,
            projection: ProjectionConstraints::default(),
            verify: 0,
            seed: DEFAULT_SEED,
            output: None,
        }
    }
}

#[derive(Serialize)]
pub struct Report<'a, T: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub config: &'a RunConfig,
    pub status: &'static str,
    pub result: T,
}

impl<'a, T: Serialize> Report<'a, T> {
    pub fn new(config: &'a RunConfig, status: &'static str, result: T) -> Self {
        Report {
            tool: TOOL,
            version: VERSION,
            config,
            status,
            result,
        }
    }
}

/// Parses `A..B` (inclusive).
pub fn parse_levels(s: &str) -> Result<(u32, u32), String> {
    let (a, b) = s
        .split_once("..")
        .ok_or_else(|| format!("expected A..B, found '{s}'"))?;
    let a: u32 = a.trim().parse().map_err(|_| format!("bad level '{a}'"))?;
    let b: u32 = b
        .trim()
        .trim_start_matches('=')
        .parse()
        .map_err(|_| format!("bad level '{b}'"))?;
    if a > b {
        return Err(format!("empty level range {a}..{b}"));
    }
    Ok((a, b))
}

/// Parses `PLAYER:E1,E2,...`, e.g. `0:1,1,0` for player 0's `x1 x2` coefficient.
pub fn parse_frozen(s: &str) -> Result<FrozenCoefficient, String> {
    let (p, e) = s
        .split_once(':')
        .ok_or_else(|| format!("expected PLAYER:E1,E2,..., found '{s}'"))?;
    let player = p.trim().parse().map_err(|_| format!("bad player '{p}'"))?;
    let exps = e
        .split(',')
        .map(|v| v.trim().parse::<u32>().map_err(|_| format!("bad exponent '{v}'")))
        .collect::<Result<Vec<u32>, String>>()?;
    Ok(FrozenCoefficient {
        player,
        monomial: gamecert::Monomial::new(exps),
    })
}
