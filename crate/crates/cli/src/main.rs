//! `geocite` command-line tool.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 estimation error.

mod commands;
mod config;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{parse_bands, RunConfig};

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn usage(e: impl fmt::Display) -> Self {
        Failure { code: 1, message: e.to_string() }
    }

    pub fn data(e: impl fmt::Display) -> Self {
        Failure { code: 2, message: e.to_string() }
    }

    pub fn estimation(e: impl fmt::Display) -> Self {
        Failure { code: 3, message: e.to_string() }
    }
}

#[derive(Parser, Debug)]
#[command(name = "geocite", version, about = "Distance decay of knowledge flows in citation data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Load and validate records, parse addresses, and attribute publications.
    Ingest,
    /// Attribute cited and citing publications to territories.
    Assign,
    /// Aggregate citations into territory-pair edges with distances and masses.
    Flows,
    /// Estimate the gravity model on edges and masses.
    Fit,
    /// Generate a synthetic world and report parameter recovery.
    Simulate,
    /// Per-publication and per-territory distance summaries.
    Report,
}

#[derive(Args, Debug, Default)]
struct Flags {
    /// TOML configuration file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// national | international
    #[arg(long, global = true)]
    level: Option<String>,
    /// all | continental | intercontinental | both
    #[arg(long, global = true)]
    partition: Option<String>,
    /// Band breakpoints in km, e.g. 50,400,800,1200.
    #[arg(long, global = true)]
    bands: Option<String>,
    /// exclude | floor:<km>
    #[arg(long, global = true)]
    zero_distance: Option<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Home country (ISO alpha-2).
    #[arg(long, global = true)]
    home: Option<String>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    cited: Option<PathBuf>,
    #[arg(long, global = true)]
    citing: Option<PathBuf>,
    #[arg(long, global = true)]
    gazetteer: Option<PathBuf>,
    #[arg(long, global = true)]
    capitals: Option<PathBuf>,
    #[arg(long, global = true)]
    aliases: Option<PathBuf>,
    #[arg(long, global = true)]
    continents: Option<PathBuf>,
    #[arg(long, global = true)]
    edges: Option<PathBuf>,
    #[arg(long, global = true)]
    masses_cited: Option<PathBuf>,
    #[arg(long, global = true)]
    masses_citing: Option<PathBuf>,
    /// Inclusive year window for masses, e.g. 2010-2012.
    #[arg(long, global = true)]
    years: Option<String>,
    /// Synthetic world size.
    #[arg(long, global = true)]
    territories: Option<usize>,
    /// Lognormal noise sigma for synthetic flows.
    #[arg(long, global = true)]
    noise_sigma: Option<f64>,
    /// round | exact | poisson
    #[arg(long, global = true)]
    count_mode: Option<String>,
    /// Number of seeded recovery trials.
    #[arg(long, global = true)]
    trials: Option<u64>,
}

fn parse_years(s: &str) -> Result<(i32, i32), Failure> {
    let bad = || Failure::usage(format!("year window must look like 2010-2012, got `{s}`"));
    let (a, b) = s.split_once('-').ok_or_else(bad)?;
    Ok((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?))
}

fn resolve(flags: Flags) -> Result<RunConfig, Failure> {
    let mut cfg = match &flags.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let set = |slot: &mut Option<PathBuf>, v: Option<PathBuf>| {
        if v.is_some() {
            *slot = v;
        }
    };
    let i = &mut cfg.inputs;
    set(&mut i.cited, flags.cited);
    set(&mut i.citing, flags.citing);
    set(&mut i.gazetteer, flags.gazetteer);
    set(&mut i.capitals, flags.capitals);
    set(&mut i.aliases, flags.aliases);
    set(&mut i.continents, flags.continents);
    set(&mut i.edges, flags.edges);
    set(&mut i.masses_cited, flags.masses_cited);
    set(&mut i.masses_citing, flags.masses_citing);
    if let Some(v) = flags.level {
        cfg.level = v;
    }
    if let Some(v) = flags.partition {
        cfg.partition = v;
    }
    if let Some(v) = flags.bands {
        cfg.bands = Some(parse_bands(&v).map_err(Failure::usage)?);
    }
    if let Some(v) = flags.zero_distance {
        cfg.zero_distance = v;
    }
    if let Some(v) = flags.seed {
        cfg.seed = v;
    }
    if let Some(v) = flags.home {
        cfg.home = v.to_uppercase();
    }
    if let Some(v) = flags.out {
        cfg.out = v;
    }
    if let Some(v) = flags.years {
        cfg.years = Some(parse_years(&v)?);
    }
    if let Some(v) = flags.territories {
        cfg.simulate.n_territories = v;
    }
    if let Some(v) = flags.noise_sigma {
        cfg.simulate.noise_sigma = v;
    }
    if let Some(v) = flags.count_mode {
        cfg.simulate.count_mode = v;
    }
    if let Some(v) = flags.trials {
        cfg.simulate.trials = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), Failure> {
    let cfg = resolve(cli.flags)?;
    std::fs::create_dir_all(&cfg.out)
        .map_err(|e| Failure::usage(format!("cannot create {}: {e}", cfg.out.display())))?;
    match cli.command {
        Command::Ingest => commands::ingest(&cfg),
        Command::Assign => commands::assign(&cfg),
        Command::Flows => commands::flows(&cfg),
        Command::Fit => commands::fit(&cfg),
        Command::Simulate => commands::simulate(&cfg),
        Command::Report => commands::report(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
