use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use wco_core::criteria::CriterionId;
use wco_core::harness::{self, MapKind, RandomConfig, Scenario};
use wco_core::{Error, Exponent, Tolerances};

/// Closed-range, polar and spectral checks for weighted composition operators on
/// finite measure spaces.
#[derive(Parser, Debug)]
#[command(name = "wco", version)]
struct Cli {
    /// worker threads for the exhaustive witness search (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the checks a scenario requests and emit a JSON report.
    Check {
        scenario: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// add per-check wall-clock times (reports are then no longer byte-stable)
        #[arg(long)]
        timing: bool,
    },
    /// Print a seeded random scenario.
    Random {
        #[arg(long)]
        seed: u64,
        /// atom count, or an inclusive range `MIN..MAX`
        #[arg(long, default_value = "8")]
        atoms: String,
        /// term count, or an inclusive range `MIN..MAX`
        #[arg(long, default_value = "2")]
        terms: String,
        #[arg(long)]
        disjoint: bool,
        #[arg(long, default_value = "2")]
        p: String,
        #[arg(long, default_value = "2")]
        q: String,
        /// `arbitrary`, `permutation` or `invariant`
        #[arg(long, default_value = "arbitrary")]
        maps: String,
        /// comma-separated criterion ids to request
        #[arg(long, value_delimiter = ',')]
        checks: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Polar decomposition `W = V|W|` (needs p = q = 2 and disjoint supports).
    Polar {
        scenario: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Period, power multiplier `v` and invertibility verdict.
    Invert {
        scenario: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Indicator minimizing `‖Wf‖_q / ‖f‖_p` over subsets of the given atoms.
    Witness {
        scenario: PathBuf,
        /// comma-separated atom ids
        #[arg(long, value_delimiter = ',', required = true)]
        region: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the invariant suites.
    Selftest {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the scenario with its non-atomic cells split `levels` times.
    Refine {
        scenario: PathBuf,
        #[arg(long)]
        levels: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

const EXIT_HYPOTHESIS: u8 = 2;
const EXIT_ORACLE: u8 = 3;
const EXIT_INPUT: u8 = 4;

fn emit(text: &str, out: Option<&Path>) -> Result<(), Error> {
    match out {
        Some(path) => fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn load(path: &Path) -> Result<Scenario, Error> {
    harness::load_scenario(path).map_err(|e| match e {
        Error::Io(io) => Error::Io(std::io::Error::new(io.kind(), format!("{}: {io}", path.display()))),
        e => e,
    })
}

fn json(value: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("value serializes");
    s.push('\n');
    s
}

fn range(text: &str, field: &str) -> Result<(usize, usize), Error> {
    let bad = || Error::Validation {
        field: field.to_owned(),
        message: format!("expected N or MIN..MAX, got `{text}`"),
    };
    let parse = |s: &str| s.trim().parse::<usize>().map_err(|_| bad());
    match text.split_once("..") {
        Some((a, b)) => Ok((parse(a)?, parse(b.trim_start_matches('='))?)),
        None => {
            let n = parse(text)?;
            Ok((n, n))
        }
    }
}

fn exponent(text: &str, field: &str) -> Result<Exponent, Error> {
    match text.trim() {
        "inf" | "infinity" | "Infinity" => Ok(Exponent::Infinity),
        t => match t.parse::<f64>() {
            Ok(p) => Exponent::new(p),
            Err(_) => Err(Error::Validation {
                field: field.to_owned(),
                message: format!("expected a number >= 1 or `inf`, got `{t}`"),
            }),
        },
    }
}

fn map_kind(text: &str) -> Result<MapKind, Error> {
    match text {
        "arbitrary" => Ok(MapKind::Arbitrary),
        "permutation" => Ok(MapKind::Permutation),
        "invariant" => Ok(MapKind::InvariantPermutation),
        other => Err(Error::Validation {
            field: "maps".into(),
            message: format!("expected arbitrary, permutation or invariant, got `{other}`"),
        }),
    }
}

fn code_for(e: &Error) -> u8 {
    if e.is_hypothesis_failure() {
        EXIT_HYPOTHESIS
    } else {
        EXIT_INPUT
    }
}

fn run(cli: Cli) -> Result<u8, Error> {
    let tol = Tolerances::from_env();
    match cli.command {
        Command::Check { scenario, out, timing } => {
            let s = load(&scenario)?;
            let report = if timing {
                harness::run_checks_timed(&s, &tol)
            } else {
                harness::run_checks(&s, &tol)
            };
            emit(&report.to_json(), out.as_deref())?;
            Ok(report.exit_code() as u8)
        }
        Command::Random {
            seed,
            atoms,
            terms,
            disjoint,
            p,
            q,
            maps,
            checks,
            out,
        } => {
            let checks = checks
                .iter()
                .map(|c| c.parse::<CriterionId>())
                .collect::<Result<Vec<_>, _>>()?;
            let cfg = RandomConfig {
                atoms: range(&atoms, "atoms")?,
                terms: range(&terms, "terms")?,
                p: exponent(&p, "p")?,
                q: exponent(&q, "q")?,
                disjoint,
                maps: map_kind(&maps)?,
                checks,
                ..RandomConfig::default()
            };
            let s = harness::generate_random(seed, &cfg)?;
            let mut text = s.to_json();
            text.push('\n');
            emit(&text, out.as_deref())?;
            Ok(0)
        }
        Command::Polar { scenario, out } => {
            let s = load(&scenario)?;
            let v = harness::polar_summary(&s, &tol)?;
            emit(&json(&v), out.as_deref())?;
            Ok(0)
        }
        Command::Invert { scenario, out } => {
            let s = load(&scenario)?;
            let v = harness::invert_summary(&s, &tol)?;
            emit(&json(&v), out.as_deref())?;
            Ok(0)
        }
        Command::Witness { scenario, region, out } => {
            let s = load(&scenario)?;
            let v = harness::witness_summary(&s, &region)?;
            emit(&json(&v), out.as_deref())?;
            Ok(0)
        }
        Command::Selftest { out } => {
            let report = harness::selftest(&tol);
            for suite in &report.suites {
                eprintln!(
                    "{} {} ({} cases, max residual {:e})",
                    if suite.passed { "PASS" } else { "FAIL" },
                    suite.name,
                    suite.cases,
                    suite.max_residual.0
                );
            }
            emit(&report.to_json(), out.as_deref())?;
            Ok(if report.exit_code() == 0 { 0 } else { EXIT_ORACLE })
        }
        Command::Refine { scenario, levels, out } => {
            let s = load(&scenario)?;
            let mut text = s.refined(levels).to_json();
            text.push('\n');
            emit(&text, out.as_deref())?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_INPUT);
        }
    }
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(code_for(&e))
        }
    }
}
