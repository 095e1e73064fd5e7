use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use wigner_detect::density::{Density, TabulatedDensity};
use wigner_detect::harness::{self, ExperimentKind, Overrides, Profile, RawConfig};
use wigner_detect::transform::fisher_functionals;
use wigner_detect::{par, Error};

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_SELF_TEST: u8 = 4;

#[derive(Parser)]
#[command(name = "wigner-detect", version, about = "Spiked Wigner detection experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Hypothesis-test experiments (plain or transformed); accepts any experiment config.
    Simulate(RunArgs),
    /// Empirical mean and variance of the statistic against its limiting law.
    CltCheck(RunArgs),
    /// Rank estimation experiment.
    Rank(RunArgs),
    /// Exact likelihood-ratio oracle at small n.
    LrOracle(RunArgs),
    /// Print the density functionals of a noise law as JSON.
    Functionals(FunctionalArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ProfileArg::Paper)]
    profile: ProfileArg,
    /// Exit with status 4 if any summary row misses its tolerance.
    #[arg(long)]
    self_test: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProfileArg {
    Paper,
    Ci,
}

impl From<ProfileArg> for Profile {
    fn from(p: ProfileArg) -> Self {
        match p {
            ProfileArg::Paper => Profile::Paper,
            ProfileArg::Ci => Profile::Ci,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum NoiseArg {
    Gaussian,
    Sech,
    Tabulated,
}

#[derive(Args)]
struct FunctionalArgs {
    #[arg(long, value_enum, default_value_t = NoiseArg::Sech)]
    noise: NoiseArg,
    /// Off-diagonal density CSV for tabulated noise.
    #[arg(long)]
    density: Option<PathBuf>,
    /// Diagonal density CSV (defaults to the off-diagonal one).
    #[arg(long)]
    diag_density: Option<PathBuf>,
}

enum Failure {
    Error(Error),
    SelfTest(usize),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Error(e)
    }
}

fn run(args: &RunArgs, expected: Option<&[ExperimentKind]>) -> Result<(), Failure> {
    let raw = RawConfig::load(&args.config)?;
    if let Some(kinds) = expected {
        if !kinds.contains(&raw.experiment) {
            let names: Vec<_> = kinds.iter().map(|k| k.name()).collect();
            return Err(Error::Config(format!(
                "experiment: `{}` does not belong to this subcommand (expected {})",
                raw.experiment.name(),
                names.join(" or ")
            ))
            .into());
        }
    }
    let overrides = Overrides { seed: args.seed, out_dir: args.out.clone(), ..Default::default() };
    let base = args.config.parent().unwrap_or(Path::new("."));
    let cfg = raw.resolve(args.profile.into(), &overrides, base)?;

    let report = par::with_workers(args.workers, || harness::run_experiment(&cfg))?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    let files = harness::write_report(&cfg, &report)?;
    for f in &files {
        println!("wrote {}", f.display());
    }

    let checks = report.checks();
    let mut failed = 0;
    for c in &checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        failed += (!c.passed) as usize;
    }
    if args.self_test && failed > 0 {
        return Err(Failure::SelfTest(failed));
    }
    Ok(())
}

fn load_density(path: &Path) -> Result<Density, Error> {
    Ok(Density::Tabulated(std::sync::Arc::new(TabulatedDensity::from_csv(path)?)))
}

fn functionals(args: &FunctionalArgs) -> Result<(), Failure> {
    let (off, diag) = match args.noise {
        NoiseArg::Gaussian => (Density::StandardGaussian, Density::StandardGaussian),
        NoiseArg::Sech => (Density::Sech, Density::Sech),
        NoiseArg::Tabulated => {
            let path = args
                .density
                .as_ref()
                .ok_or_else(|| Error::Config("--density is required for tabulated noise".into()))?;
            let off = load_density(path)?;
            let diag = match &args.diag_density {
                Some(p) => load_density(p)?,
                None => off.clone(),
            };
            (off, diag)
        }
    };
    let f = fisher_functionals(&off, &diag)?;
    let out = serde_json::json!({
        "noise": off.name(),
        "fh": f.fh,
        "fhd": f.fhd,
        "gh": f.gh,
        "w4t": f.w4t,
        "snr_limit": 1.0 / f.fh,
    });
    println!("{}", serde_json::to_string_pretty(&out).unwrap_or_default());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(a) => run(a, None),
        Command::CltCheck(a) => run(a, Some(&[ExperimentKind::CltCheck])),
        Command::Rank(a) => run(a, Some(&[ExperimentKind::Rank])),
        Command::LrOracle(a) => run(a, Some(&[ExperimentKind::LrOracle])),
        Command::Functionals(a) => functionals(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::SelfTest(n)) => {
            eprintln!("self-test: {n} check(s) failed");
            ExitCode::from(EXIT_SELF_TEST)
        }
        Err(Failure::Error(e)) => {
            eprintln!("error: {e}");
            let code = match &e {
                Error::Config(_) => EXIT_CONFIG,
                e if e.is_numerical() => EXIT_NUMERICAL,
                _ => 1,
            };
            ExitCode::from(code)
        }
    }
}
