//! `tfcka`: rate sweeps, finite-key analysis and oracle verification for
//! multiparty key agreement through a multiport interference node.
//!
//! Exit codes: 0 success, 1 oracle verification failure, 2 usage or runtime
//! error. Settings are taken from flags, then from the `key = value` file named
//! by `TFCKA_CONFIG`, then from built-in defaults.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::{Settings, VerifyGrid};
use config::{
    parse_f64, parse_linear_range, parse_log_range, parse_usize_list, resolve, ConfigFile, Format, PortChoice, QChoice,
    UsageError, UsageResult,
};

#[derive(Parser, Debug)]
#[command(name = "tfcka", version, about = "Conference key rates through a multiport interference node")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Asymptotic rate versus loss, with the direct-transmission bound.
    SweepAsymptotic(Common),
    /// Optimised finite-key rate versus rounds.
    SweepFinite(Common),
    /// Rounds needed to reach a fraction of the asymptotic rate.
    Lmin(Common),
    /// Best rate from splitting the parties into equal subgroups.
    SubgroupOpt(Common),
    /// Compare the closed-form statistics with the Fock-space simulation.
    VerifyOracle(Common),
}

/// Flags shared by every subcommand. Unset flags fall back to the config file.
#[derive(Args, Debug, Default)]
struct Common {
    /// Party counts, comma separated.
    #[arg(long)]
    n: Option<String>,
    /// Multiport size: `auto` or a comma list.
    #[arg(long)]
    m: Option<String>,
    /// Channel loss in dB: `start:stop:step`, a value or a list.
    #[arg(long = "loss-db", allow_hyphen_values = true)]
    loss_db: Option<String>,
    /// Rounds: `start:stop:log10`, `start:stop:log2`, a value or a list.
    #[arg(long)]
    rounds: Option<String>,
    /// Dark-count probability per detector.
    #[arg(long)]
    pd: Option<String>,
    /// Misalignment fraction, converted to an angle via asin(sqrt(f)).
    #[arg(long)]
    misalign: Option<String>,
    /// Total security parameter.
    #[arg(long = "eps-tot")]
    eps_tot: Option<String>,
    /// Vacuum weight: `auto` (optimise) or fixed values.
    #[arg(long)]
    q: Option<String>,
    /// csv or json.
    #[arg(long)]
    format: Option<String>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    #[arg(long)]
    jobs: Option<String>,
    /// Target fraction of the asymptotic rate for `lmin`.
    #[arg(long)]
    fraction: Option<String>,
}

struct Defaults {
    n: &'static str,
    loss_db: &'static str,
    rounds: &'static str,
    q: &'static str,
}

enum Failure {
    Usage(String),
    Verification(Vec<String>),
}

impl From<UsageError> for Failure {
    fn from(e: UsageError) -> Self {
        Failure::Usage(e.0)
    }
}

fn settings(c: &Common, cfg: &ConfigFile, d: &Defaults) -> UsageResult<Settings> {
    let s = Settings {
        parties: parse_usize_list("--n", &resolve(&c.n, cfg, "n", d.n))?,
        ports: PortChoice::parse(&resolve(&c.m, cfg, "m", "auto"))?,
        losses_db: parse_linear_range("--loss-db", &resolve(&c.loss_db, cfg, "loss-db", d.loss_db))?,
        rounds: parse_log_range("--rounds", &resolve(&c.rounds, cfg, "rounds", d.rounds))?,
        dark_count_prob: parse_f64("--pd", &resolve(&c.pd, cfg, "pd", "1e-9"))?,
        misalignment: parse_f64("--misalign", &resolve(&c.misalign, cfg, "misalign", "0.02"))?,
        eps_tot: parse_f64("--eps-tot", &resolve(&c.eps_tot, cfg, "eps-tot", "1e-8"))?,
        q: QChoice::parse(&resolve(&c.q, cfg, "q", d.q))?,
        fraction: parse_f64("--fraction", &resolve(&c.fraction, cfg, "fraction", "0.1"))?,
    };
    s.validate()?;
    Ok(s)
}

// Flags left unset keep the built-in oracle grid, so only explicit values narrow it.
fn verify_grid(c: &Common, cfg: &ConfigFile) -> UsageResult<VerifyGrid> {
    let given = |flag: &Option<String>, key: &str| flag.clone().or_else(|| cfg.get(key).map(str::to_string));
    let q_values = match given(&c.q, "q") {
        None => vec![0.5, 0.9, 0.99],
        Some(s) => match QChoice::parse(&s)? {
            QChoice::Fixed(v) => v,
            QChoice::Optimize => return Err(UsageError("verify-oracle needs explicit --q values".into())),
        },
    };
    let transmittances = match given(&c.loss_db, "loss-db") {
        None => VerifyGrid::default_transmittances(),
        Some(s) => commands::transmittances_from_losses(&parse_linear_range("--loss-db", &s)?),
    };
    let angles = match given(&c.misalign, "misalign") {
        None => VerifyGrid::default_angles(),
        Some(s) => {
            let f = parse_f64("--misalign", &s)?;
            if !(0.0..=1.0).contains(&f) {
                return Err(UsageError("--misalign: must lie in [0, 1]".into()));
            }
            vec![tfcka_core::params::misalignment_angle(f)]
        }
    };
    let parties = parse_usize_list("--n", &resolve(&c.n, cfg, "n", "2,3,4"))?;
    if parties.iter().any(|&n| n < 2) {
        return Err(UsageError("--n: every party count must be at least 2".into()));
    }
    Ok(VerifyGrid { parties, ports: PortChoice::parse(&resolve(&c.m, cfg, "m", "auto"))?, q_values, transmittances, angles })
}

fn emit(c: &Common, text: &str) -> Result<(), Failure> {
    match &c.out {
        Some(path) => output::write_atomically(path, text)
            .map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display()))),
        None => {
            use std::io::Write;
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).map_err(|e| Failure::Usage(format!("cannot write stdout: {e}")))?;
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let cfg = ConfigFile::from_env()?;
    let common = match &cli.command {
        Command::SweepAsymptotic(c)
        | Command::SweepFinite(c)
        | Command::Lmin(c)
        | Command::SubgroupOpt(c)
        | Command::VerifyOracle(c) => c,
    };
    let format = Format::parse(&resolve(&common.format, &cfg, "format", "csv"))?;
    let jobs: usize = resolve(&common.jobs, &cfg, "jobs", "0")
        .trim()
        .parse()
        .map_err(|_| UsageError("--jobs: expected a nonnegative integer".into()))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Failure::Usage(format!("cannot start worker pool: {e}")))?;

    let defaults = |n, loss_db, rounds, q| Defaults { n, loss_db, rounds, q };
    let table = match &cli.command {
        Command::SweepAsymptotic(c) => {
            let s = settings(c, &cfg, &defaults("2,3,5", "0:60:1", "1e10", "auto"))?;
            pool.install(|| commands::sweep_asymptotic(&s))?
        }
        Command::SweepFinite(c) => {
            let s = settings(c, &cfg, &defaults("2,3", "20", "1e7:1e12:log10", "auto"))?;
            pool.install(|| commands::sweep_finite(&s))?
        }
        Command::Lmin(c) => {
            let s = settings(c, &cfg, &defaults("2,3", "0:40:10", "1e10", "auto"))?;
            pool.install(|| commands::lmin(&s))?
        }
        Command::SubgroupOpt(c) => {
            let s = settings(c, &cfg, &defaults("5", "0:60:5", "1e10", "auto"))?;
            pool.install(|| commands::subgroup(&s))?
        }
        Command::VerifyOracle(c) => {
            let grid = verify_grid(c, &cfg)?;
            let v = pool.install(|| commands::verify_oracle(&grid))?;
            emit(common, &v.table.render(format))?;
            if !v.failures.is_empty() {
                return Err(Failure::Verification(v.failures));
            }
            eprintln!("verify-oracle: {} points within {:.0e}", v.table.rows.len(), commands::ORACLE_TOLERANCE);
            return Ok(());
        }
    };
    emit(common, &table.render(format))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Verification(points)) => {
            for p in &points {
                eprintln!("oracle mismatch: {p}");
            }
            eprintln!("verify-oracle: {} point(s) exceed {:.0e}", points.len(), commands::ORACLE_TOLERANCE);
            ExitCode::from(1)
        }
    }
}
