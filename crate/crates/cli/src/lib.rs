//! Command line driver: runs one experiment, writes a JSON report and CSV
//! tables, and exits with 0 when every check passes, 1 when one fails and 2
//! on a usage or configuration error.

pub mod cache;
pub mod commands;
pub mod config;
pub mod report;

use std::ffi::OsString;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use szego::transversality::{ChernData, GenusVariant};

use crate::commands::{CmdError, Ctx, Outcome};
use crate::config::{parse_tolerance, read_config_file, resolve, Defaults, Overrides};
use crate::report::Report;

/// Exit code when every check passes.
pub const EXIT_PASS: i32 = 0;
/// Exit code when a check fails or a computation stops.
pub const EXIT_FAIL: i32 = 1;
/// Exit code for usage and configuration errors.
pub const EXIT_USAGE: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "szego", version, about = "Szegő kernel experiments with reproducible reports")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

/// Options shared by every subcommand. Flags win over the config file.
#[derive(Args, Debug, Default)]
pub struct CommonArgs {
    /// Plain-text `key = value` configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory for the JSON report and CSV tables [default: szego-reports].
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed of every random choice [default: 1].
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Cache directory; overrides SZEGO_CACHE_DIR.
    #[arg(long = "cache-dir", global = true)]
    pub cache_dir: Option<PathBuf>,
    /// Model: torus, torus:RE,IM, projective-line, perturbed[:EPS], fock:M;
    /// for ideal-check: witness, witness3, flat:M.
    #[arg(long, global = true)]
    pub model: Option<String>,
    /// Comma-separated levels.
    #[arg(long = "N", global = true, value_delimiter = ',')]
    pub levels: Option<Vec<usize>>,
    /// Radius parameter (see the subcommand help).
    #[arg(long, global = true)]
    pub radius: Option<f64>,
    /// Sample count (see the subcommand help).
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    /// Step count (see the subcommand help).
    #[arg(long, global = true)]
    pub steps: Option<usize>,
    /// Tolerance override `name=value`; repeatable.
    #[arg(long = "tol", global = true, value_name = "NAME=VALUE")]
    pub tol: Vec<String>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Rescaled kernels against the Heisenberg model; radius = |u|,|v| bound.
    Scaling,
    /// C0 error of the pulled-back Fubini–Study form; samples = points.
    Tian,
    /// Projective collisions of Kodaira lifts; samples = point pairs.
    KodairaInjectivity,
    /// Localization profiles f_N; radius = |v|, steps = values of t in [0, 1].
    FnProfile,
    /// Peak-section decay at lattice centres; radius = largest d_N, steps =
    /// radii, samples = far-field points.
    PeakDecay,
    /// Search for quantitatively transverse sections; samples = iterations.
    Transversality,
    /// Zeros of a random section at each level.
    Zeros,
    /// Genus of the zero set from the adjunction formula; prints one genus
    /// per level.
    Genus(GenusArgs),
    /// Ideal membership of generator brackets; steps = number of δ values.
    /// Prints the δ sweep as CSV.
    IdealCheck,
    /// Stationary phase expansion against quadrature; steps = largest order J.
    Statphase,
    /// Fast identities that hold by construction.
    Selftest,
}

#[derive(Args, Debug)]
pub struct GenusArgs {
    /// Complex dimension of M.
    #[arg(long)]
    pub m: u32,
    /// c₁(L)^m.
    #[arg(long = "c1L2", visible_alias = "c1Lm", allow_negative_numbers = true)]
    pub c1l_m: i64,
    /// c₁(M)·c₁(L)^{m−1}.
    #[arg(long = "c1McL", allow_negative_numbers = true)]
    pub c1m_c1l: i64,
    /// Formula to use [default: surface when m = 2, codimension otherwise].
    #[arg(long, value_enum)]
    pub variant: Option<VariantArg>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    Surface,
    Codimension,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Scaling => "scaling",
            Command::Tian => "tian",
            Command::KodairaInjectivity => "kodaira-injectivity",
            Command::FnProfile => "fn-profile",
            Command::PeakDecay => "peak-decay",
            Command::Transversality => "transversality",
            Command::Zeros => "zeros",
            Command::Genus(_) => "genus",
            Command::IdealCheck => "ideal-check",
            Command::Statphase => "statphase",
            Command::Selftest => "selftest",
        }
    }

    fn defaults(&self) -> &'static Defaults {
        match self {
            Command::Scaling => &commands::SCALING,
            Command::Tian => &commands::TIAN,
            Command::KodairaInjectivity => &commands::INJECTIVITY,
            Command::FnProfile => &commands::FN_PROFILE,
            Command::PeakDecay => &commands::PEAK_DECAY,
            Command::Transversality => &commands::TRANSVERSALITY,
            Command::Zeros => &commands::ZEROS,
            Command::Genus(_) => &commands::GENUS,
            Command::IdealCheck => &commands::IDEAL,
            Command::Statphase => &commands::STATPHASE,
            Command::Selftest => &commands::SELFTEST,
        }
    }
}

impl CommonArgs {
    fn overrides(&self) -> Result<Overrides, config::ConfigError> {
        let mut tolerances = std::collections::BTreeMap::new();
        for t in &self.tol {
            let (k, v) = parse_tolerance(t)?;
            tolerances.insert(k, v);
        }
        if let Some(l) = &self.levels {
            if l.is_empty() || l.contains(&0) {
                return Err(config::ConfigError("--N must list positive levels".into()));
            }
        }
        Ok(Overrides {
            model: self.model.clone(),
            levels: self.levels.clone(),
            radius: self.radius,
            samples: self.samples,
            steps: self.steps,
            seed: self.seed,
            tolerances,
            out_dir: self.out.clone(),
            cache_dir: self.cache_dir.clone(),
        })
    }
}

fn dispatch(cmd: &Command, ctx: &mut Ctx) -> Result<Outcome, CmdError> {
    match cmd {
        Command::Scaling => commands::scaling(ctx),
        Command::Tian => commands::tian(ctx),
        Command::KodairaInjectivity => commands::injectivity(ctx),
        Command::FnProfile => commands::profile(ctx),
        Command::PeakDecay => commands::peak_decay(ctx),
        Command::Transversality => commands::transversality(ctx),
        Command::Zeros => commands::zeros(ctx),
        Command::Genus(g) => {
            let variant = match g.variant {
                Some(VariantArg::Surface) => GenusVariant::Surface,
                Some(VariantArg::Codimension) => GenusVariant::Codimension,
                None if g.m == 2 => GenusVariant::Surface,
                None => GenusVariant::Codimension,
            };
            commands::genus(ctx, &ChernData::new(g.m, g.c1l_m, g.c1m_c1l), variant)
        }
        Command::IdealCheck => commands::ideal_check(ctx),
        Command::Statphase => commands::statphase(ctx),
        Command::Selftest => commands::selftest(ctx),
    }
}

/// Runs the driver on a full argument vector (program name first) and
/// returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
            let _ = e.print();
            return code;
        }
    };
    let started = Instant::now();
    let cfg = match cli.common.overrides().and_then(|flags| {
        let file = cli.common.config.as_deref().map(read_config_file).transpose()?;
        resolve(cli.command.name(), flags, file, cli.command.defaults())
    }) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    let mut ctx = Ctx::new(cfg);
    let outcome = dispatch(&cli.command, &mut ctx);
    let (outcome, code) = match outcome {
        Ok(o) => {
            let code = if szego::report::all_pass(&o.checks) { EXIT_PASS } else { EXIT_FAIL };
            (o, code)
        }
        Err(CmdError::Config(e)) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
        Err(CmdError::Compute(e)) => {
            eprintln!("error: {e}");
            let failed = szego::report::Check::new(
                "computation completed",
                0.0,
                szego::report::Criterion::Near { target: 1.0, tol: 0.0 },
            );
            let o = Outcome {
                payload: serde_json::json!({ "error": e.to_string() }),
                checks: vec![failed],
                ..Outcome::default()
            };
            (o, EXIT_FAIL)
        }
    };
    let mut timings = std::mem::take(&mut ctx.timings);
    timings.total_seconds = started.elapsed().as_secs_f64();
    timings.cache_hits = ctx.cache_hits;
    let out_dir = ctx.cfg.out_dir.clone();
    let report = Report::new(ctx.cfg, outcome.payload, outcome.checks, timings);
    let listing: Vec<String> = report
        .checks
        .iter()
        .map(|c| {
            format!("{} {}: {:e} ({})", if c.pass { "PASS" } else { "FAIL" }, c.name, c.value, describe(&c.criterion))
        })
        .collect();
    match &outcome.stdout {
        Some(s) => {
            println!("{s}");
            listing.iter().for_each(|l| eprintln!("{l}"));
        }
        None => listing.iter().for_each(|l| println!("{l}")),
    }
    let written = report.write(&out_dir).and_then(|p| {
        let mut paths = vec![p];
        for (name, t) in &outcome.tables {
            paths.push(t.write(&out_dir, name)?);
        }
        Ok(paths)
    });
    match written {
        Ok(paths) => paths.iter().for_each(|p| eprintln!("wrote {}", p.display())),
        Err(e) => {
            eprintln!("error: cannot write reports to {}: {e}", out_dir.display());
            return EXIT_USAGE;
        }
    }
    code
}

fn describe(c: &szego::report::Criterion) -> String {
    use szego::report::Criterion::*;
    match *c {
        AtMost { bound } => format!("<= {bound:e}"),
        AtLeast { bound } => format!(">= {bound:e}"),
        Within { low, high } => format!("in [{low}, {high}]"),
        Near { target, tol } => format!("{target} ± {tol:e}"),
    }
}

/// The command line chapter of the book; its examples run as doctests.
#[doc = include_str!("../../../book/src/cli.md")]
pub mod guide {}
