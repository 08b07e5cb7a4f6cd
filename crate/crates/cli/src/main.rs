mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gamecert::hierarchy::CertKind;
use gamecert::projector::{FrozenCoefficient, ProjectionConstraints};

use config::{parse_frozen, parse_levels, RunConfig, DEFAULT_LEVEL};

/// Sum-of-squares certificates of monotonicity and concavity for polynomial games.
#[derive(Parser)]
#[command(name = "gamecert", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Bound the largest eigenvalue of the symmetrized Jacobian or of the
    /// player Hessians over the domain.
    Certify {
        game: PathBuf,
        #[command(flatten)]
        common: Common,
        /// Run every level of an inclusive range A..B instead of --level.
        #[arg(long, value_parser = parse_levels)]
        levels: Option<(u32, u32)>,
        /// Cross-check the bound against N sampled domain points.
        #[arg(long, value_name = "N", default_value_t = 0)]
        verify: usize,
        /// Seed for the sampling cross-check.
        #[arg(long, default_value_t = gamecert::oracles::DEFAULT_SEED)]
        seed: u64,
    },
    /// Find the nearest game (max-coefficient distance) that is certified
    /// at the given level.
    Project {
        game: PathBuf,
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        projection: ProjectionArgs,
        /// Write the projected game here.
        #[arg(long, value_name = "PATH")]
        game_out: Option<PathBuf>,
    },
    /// Convert an extensive-form tree into a polynomial game.
    Efg2poly {
        tree: PathBuf,
        /// Output game file; stdout when omitted.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Write the compiled SDP of a certification or projection in SDPA
    /// sparse format.
    ExportSdpa {
        game: PathBuf,
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = Problem::Certify)]
        problem: Problem,
        /// Player whose Hessian is exported (concave certification only).
        #[arg(long, default_value_t = 0)]
        player: usize,
        #[command(flatten)]
        projection: ProjectionArgs,
    },
    /// Smallest uniform regularization making the game certifiably monotone.
    Gauge {
        game: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Problem {
    Certify,
    Project,
}

#[derive(Args)]
struct Common {
    #[arg(long, default_value = "monotone")]
    kind: CertKind,
    /// Relaxation level (maximum degree of the certificate).
    #[arg(long, default_value_t = DEFAULT_LEVEL)]
    level: u32,
    /// Add the constraint R^2 - |x|^2 >= 0 to the domain.
    #[arg(long, value_name = "R")]
    add_ball: Option<f64>,
    /// Relative duality gap and infeasibility tolerance of the SDP solver.
    #[arg(long)]
    sdp_tol: Option<f64>,
    #[arg(long)]
    sdp_max_iter: Option<usize>,
    /// Report file; stdout when omitted (for export-sdpa: the .dat-s file).
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ProjectionArgs {
    /// Keep u_2 = -u_1 (two players).
    #[arg(long)]
    zero_sum: bool,
    /// Only coefficients present in the input may be nonzero.
    #[arg(long)]
    preserve_support: bool,
    /// Hold one coefficient fixed, as PLAYER:E1,E2,... (repeatable).
    #[arg(long, value_name = "PLAYER:EXPS", value_parser = parse_frozen)]
    freeze: Vec<FrozenCoefficient>,
}

impl Common {
    fn apply(self, config: &mut RunConfig) {
        config.kind = self.kind;
        config.level = self.level;
        config.add_ball = self.add_ball;
        if let Some(t) = self.sdp_tol {
            config.options.sdp_tol = t;
        }
        if let Some(n) = self.sdp_max_iter {
            config.options.sdp_max_iter = n;
        }
        config.output = self.output;
    }
}

impl From<ProjectionArgs> for ProjectionConstraints {
    fn from(a: ProjectionArgs) -> Self {
        ProjectionConstraints {
            zero_sum: a.zero_sum,
            preserve_support: a.preserve_support,
            frozen: a.freeze,
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Certify {
            game,
            common,
            levels,
            verify,
            seed,
        } => {
            let mut config = RunConfig::new("certify", vec![game]);
            common.apply(&mut config);
            config.levels = levels;
            config.verify = verify;
            config.seed = seed;
            commands::certify(&config)
        }
        Command::Project {
            game,
            common,
            projection,
            game_out,
        } => {
            let mut config = RunConfig::new("project", vec![game]);
            common.apply(&mut config);
            config.projection = projection.into();
            commands::project(&config, game_out.as_deref())
        }
        Command::Efg2poly { tree, output } => {
            let mut config = RunConfig::new("efg2poly", vec![tree]);
            config.output = output;
            commands::efg2poly(&config)
        }
        Command::ExportSdpa {
            game,
            common,
            problem,
            player,
            projection,
        } => {
            let mut config = RunConfig::new("export-sdpa", vec![game]);
            common.apply(&mut config);
            config.projection = projection.into();
            commands::export_sdpa(&config, matches!(problem, Problem::Project), player)
        }
        Command::Gauge { game, common } => {
            let mut config = RunConfig::new("gauge", vec![game]);
            common.apply(&mut config);
            commands::gauge(&config)
        }
    };
    match outcome {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(commands::Outcome::for_error(&e) as u8)
        }
    }
}
