//! `sqa` command-line interface.
//!
//! Exit codes: 0 success, 1 property failure, 2 usage or validation error,
//! 3 domain error (for example an infinite cross entropy).

mod verify;

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::auction::{run_auction_with, AdvertiserId};
use crate::error::Error;
use crate::game_analysis::{
    check_truthful_dominance, epsilon_sweep, random_opponent_profiles, BidGrid, Proposition,
};
use crate::scenario_io::{parse_scenario, write_report, write_sweep_csv, ParsedScenario, ReportRecord};

pub use verify::{run_verification, VerifyCheck, VerifyOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DOMAIN: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "sqa", version, about = "Sponsored question-answering auction simulator")]
pub struct Cli {
    /// Seed for every random draw.
    #[arg(long, env = "SQA_SEED", default_value_t = 42, global = true)]
    pub seed: u64,

    /// Worker threads for parallel commands (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one auction from a scenario file.
    Run {
        scenario: PathBuf,
        /// Where to write the JSON report (standard output if omitted).
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Evaluate a counterexample construction over a range of epsilons.
    Sweep {
        /// 2 for the value construction, 3 for the utility construction.
        #[arg(long, value_parser = clap::value_parser!(u8).range(2..=3))]
        prop: u8,
        #[arg(long)]
        eps_start: f64,
        /// Must stay below 0.5.
        #[arg(long)]
        eps_end: f64,
        /// Number of evenly spaced epsilons, endpoints included.
        #[arg(long)]
        steps: usize,
        /// CSV output path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Search for profitable deviations from truthful bidding.
    Dominance {
        scenario: PathBuf,
        #[arg(long)]
        advertiser: u32,
        #[arg(long, default_value_t = 101)]
        grid_points: usize,
        #[arg(long, default_value_t = 50)]
        profiles: usize,
    },
    /// Run the full property and reproduction suite.
    Verify {
        /// Random scenarios for the payment, surplus and oracle checks.
        #[arg(long, default_value_t = 1000)]
        scenarios: usize,
        /// Random scenarios for the dominance and equilibrium search.
        #[arg(long, default_value_t = 200)]
        dominance_scenarios: usize,
    },
}

/// Parses `args` and runs the command, writing human-readable output to
/// `out` and diagnostics to `err`. Returns the process exit code.
pub fn run_cli<I, T>(args: I, out: &mut (dyn Write + Send), err: &mut (dyn Write + Send)) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let rendered = e.render().to_string();
            if code == 0 {
                let _ = write!(out, "{rendered}");
            } else {
                let _ = write!(err, "{rendered}");
            }
            return code;
        }
    };
    if cli.jobs == Some(0) {
        let _ = writeln!(err, "error: --jobs must be at least 1");
        return EXIT_USAGE;
    }
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs.unwrap_or(0))
        .build()
    {
        Ok(pool) => pool,
        Err(e) => {
            let _ = writeln!(err, "error: cannot start worker pool: {e}");
            return EXIT_FAILURE;
        }
    };
    pool.install(|| dispatch(&cli, out, err))
}

fn dispatch(cli: &Cli, out: &mut (dyn Write + Send), err: &mut (dyn Write + Send)) -> i32 {
    let result = match &cli.command {
        Command::Run { scenario, report } => cmd_run(scenario, report.as_deref(), out),
        Command::Sweep {
            prop,
            eps_start,
            eps_end,
            steps,
            out: path,
        } => cmd_sweep(*prop, *eps_start, *eps_end, *steps, path, out),
        Command::Dominance {
            scenario,
            advertiser,
            grid_points,
            profiles,
        } => cmd_dominance(scenario, *advertiser, *grid_points, *profiles, cli.seed, out),
        Command::Verify {
            scenarios,
            dominance_scenarios,
        } => cmd_verify(
            &VerifyOptions {
                seed: cli.seed,
                scenarios: *scenarios,
                dominance_scenarios: *dominance_scenarios,
                ..VerifyOptions::default()
            },
            out,
        ),
    };
    match result {
        Ok(code) => code,
        Err(failure) => {
            let _ = writeln!(err, "error: {}", failure.message);
            failure.code
        }
    }
}

struct Failure {
    code: i32,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if e.is_validation() { EXIT_USAGE } else { EXIT_DOMAIN };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn usage(message: String) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message,
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure {
        code: EXIT_FAILURE,
        message: format!("cannot write {}: {e}", path.display()),
    }
}

fn load_scenario(path: &Path) -> Result<ParsedScenario, Failure> {
    let source = fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    Ok(parse_scenario(&source)?)
}

/// Renders the report for a parsed scenario.
pub fn scenario_report(parsed: &ParsedScenario) -> crate::Result<ReportRecord> {
    let outcome = run_auction_with(&parsed.setup, &parsed.bids, &parsed.config)?;
    Ok(ReportRecord::new(
        &parsed.file.question,
        &parsed.setup,
        &outcome,
        &parsed.config,
        parsed.is_truthful(),
    ))
}

fn cmd_run(scenario: &Path, report_path: Option<&Path>, out: &mut (dyn Write + Send)) -> Result<i32, Failure> {
    let parsed = load_scenario(scenario)?;
    let record = scenario_report(&parsed)?;
    let text = write_report(&record);
    match report_path {
        Some(path) => {
            fs::write(path, &text).map_err(|e| io_failure(path, e))?;
            let _ = writeln!(
                out,
                "winner {} pays {} (runner-up {}); report written to {}",
                record.winner,
                record.payment,
                record.second,
                path.display()
            );
            if record.negative_payment_flag {
                let _ = writeln!(out, "warning: negative payment");
            }
        }
        None => {
            let _ = write!(out, "{text}");
        }
    }
    Ok(EXIT_OK)
}

fn describe_flip(flip: Option<f64>) -> String {
    flip.map_or_else(|| "none".to_string(), |eps| format!("eps = {eps}"))
}

fn cmd_sweep(prop: u8, eps_start: f64, eps_end: f64, steps: usize, path: &Path, out: &mut (dyn Write + Send)) -> Result<i32, Failure> {
    let which = if prop == 2 { Proposition::Prop2 } else { Proposition::Prop3 };
    let sweep = epsilon_sweep(which, eps_start, eps_end, steps)?;
    fs::write(path, write_sweep_csv(&sweep.rows)).map_err(|e| io_failure(path, e))?;
    let _ = writeln!(out, "{} rows written to {}", sweep.rows.len(), path.display());
    let flips = [
        ("v_1 > v_2", sweep.flips.value_inequality),
        ("U_1 > U_2", sweep.flips.utility_inequality),
        ("winner = 2", sweep.flips.winner),
        ("the joint condition", sweep.flips.proposition),
    ];
    for (what, flip) in flips {
        let _ = writeln!(out, "{:<35} {}", format!("first flip of {what}:"), describe_flip(flip));
    }
    Ok(EXIT_OK)
}

fn cmd_dominance(
    scenario: &Path,
    advertiser: u32,
    grid_points: usize,
    profiles: usize,
    seed: u64,
    out: &mut (dyn Write + Send),
) -> Result<i32, Failure> {
    if grid_points == 0 {
        return Err(usage("--grid-points must be at least 1".into()));
    }
    if profiles == 0 {
        return Err(usage("--profiles must be at least 1".into()));
    }
    let parsed = load_scenario(scenario)?;
    let setup = &parsed.setup;
    let id = AdvertiserId(advertiser);
    let index = setup.index_of(id)?;
    let grid = BidGrid::spanning(setup, grid_points)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let opponents = random_opponent_profiles(setup, index, profiles, &mut rng);
    let report = check_truthful_dominance(setup, id, &grid, &opponents)?;
    let _ = writeln!(out, "advertiser:        {}", report.advertiser);
    let _ = writeln!(out, "profiles tested:   {}", report.profiles_tested);
    let _ = writeln!(out, "deviations tested: {}", report.deviations_tested);
    let _ = writeln!(out, "max violation:     {:e}", report.max_violation);
    let _ = writeln!(out, "result:            {}", if report.passed { "PASS" } else { "FAIL" });
    Ok(if report.passed { EXIT_OK } else { EXIT_FAILURE })
}

fn cmd_verify(options: &VerifyOptions, out: &mut (dyn Write + Send)) -> Result<i32, Failure> {
    let checks = run_verification(options);
    let width = checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
    for check in &checks {
        let _ = writeln!(
            out,
            "{}  {:width$}  {}",
            if check.passed { "PASS" } else { "FAIL" },
            check.name,
            check.detail
        );
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    let _ = writeln!(out, "{} checks, {} failed", checks.len(), failed);
    Ok(if failed == 0 { EXIT_OK } else { EXIT_FAILURE })
}
