//! `tubelab` experiment runner.
//!
//! Every subcommand reads a TOML config, writes `<out>/<command>.csv` with a
//! provenance comment, optionally `<out>/<command>.svg`, and prints a
//! one-line verdict. Exit codes: 0 pass, 1 check failed, 2 invalid input,
//! 3 budget exceeded.

mod commands;
mod config;
mod error;
mod output;
mod source;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tubelab::AnyFamily;

use crate::commands::Outcome;
use crate::config::Config;
use crate::error::{CliError, CliResult};
use crate::output::write_file;

/// Environment variable overriding the output directory when `--out` is absent.
const OUT_ENV: &str = "TUBELAB_OUT";

#[derive(Parser, Debug)]
#[command(name = "tubelab", version, about = "Dyadic tube/square incidence experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML config for the subcommand.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (default: $TUBELAB_OUT, else `tubelab-out`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; 0 uses every core. Outputs do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Generate a family from a [source] table and write it as a family file.
    #[command(after_help = "CSV columns: kind,e,T,thickness,size")]
    Gen,
    /// Run a non-concentration check (test = delta | katz-tao | dyadic-katz-tao).
    #[command(
        after_help = "CSV columns: kind,size,test,s,constant,ok,achieved_constant,worst_center,worst_radius_exp"
    )]
    Check,
    /// Count incidences between a [tubes] source and a [squares] source (default: every square).
    #[command(after_help = "CSV columns: squares,tubes,incidences,ratio,trivial_bound,within_trivial,max_richness")]
    Incidence,
    /// Sweep the ST ratio over e and fit its exponent against 1/delta.
    #[command(after_help = "CSV columns: e,tubes,max_st_ratio,argmax_r,worst_seed (fit on a trailing comment line)")]
    StScan,
    /// Good-interval decomposition of a family, or of random Lipschitz functions.
    #[command(after_help = "CSV columns (family): eps,layer,from_level,to_level,dimension,max_constant,min_children,max_children,expected_children,growth_ok\nCSV columns (functions): eps,seed,intervals,ok,failure")]
    Decompose,
    /// Extract a uniform subfamily and partition it into Katz-Tao parts.
    #[command(after_help = "CSV columns: seed,input_size,uniform_size,ratio,guaranteed,uniform_ok,parts,part_bound,parts_ok")]
    Uniformize,
    /// Random augmentation by translates or rigid motions.
    #[command(after_help = "CSV columns: seed,attempts,ok,size,katz_tao_constant,max_multiplicity")]
    Augment,
    /// Two-ends refinement on spread-bush systems.
    #[command(after_help = "CSV columns: seed,squares,tubes,incidences,hypothesis_ratio,rho_level,rho_ok,two_ends_constant,two_ends_ok,mass_constant,mass_ok,density_constant,density_ok,double_count_ok,all_ok")]
    TwoEnds,
    /// High-low Fourier split (mode = split) or heavy-ball scale search (mode = heavy).
    #[command(after_help = "CSV columns (split): seed,tubes,total_energy,low_energy,high_energy,ratio,cross_term,band_energy,low_sup\nCSV columns (heavy): level,delta_tilde,heavy_fraction")]
    Highlow,
    /// Additive energy of curve samples over a sweep of e.
    #[command(after_help = "CSV columns: e,points,lower,upper,frostman_constant (fit on a trailing comment line)")]
    Energy,
    /// Fourier moment sweep of a Cantor measure on a curve.
    #[command(after_help = "CSV columns: k,R,moment,l2,parseval_rhs,parseval_error,sup (fit on a trailing comment line)")]
    L6,
    /// Build a sharpness configuration and report its richness evidence.
    #[command(after_help = "CSV columns: r,count,reference,ok")]
    Sharpness,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Gen => "gen",
            Command::Check => "check",
            Command::Incidence => "incidence",
            Command::StScan => "st-scan",
            Command::Decompose => "decompose",
            Command::Uniformize => "uniformize",
            Command::Augment => "augment",
            Command::TwoEnds => "two-ends",
            Command::Highlow => "highlow",
            Command::Energy => "energy",
            Command::L6 => "l6",
            Command::Sharpness => "sharpness",
        }
    }
}

fn dispatch(command: Command, cfg: &Config, seed: u64) -> CliResult<Outcome> {
    use commands::*;
    match command {
        Command::Gen => gen(&cfg.command()?, seed),
        Command::Check => check(&cfg.command()?, seed),
        Command::Incidence => incidence(&cfg.command()?, seed),
        Command::StScan => st_scan(&cfg.command()?, seed),
        Command::Decompose => decompose(&cfg.command()?, seed),
        Command::Uniformize => uniformize(&cfg.command()?, seed),
        Command::Augment => augment(&cfg.command()?, seed),
        Command::TwoEnds => two_ends(&cfg.command()?, seed),
        Command::Highlow => highlow(&cfg.command()?, seed),
        Command::Energy => energy(&cfg.command()?, seed),
        Command::L6 => l6(&cfg.command()?, seed),
        Command::Sharpness => sharpness(&cfg.command()?, seed),
    }
}

fn out_dir(cli: &Cli) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("tubelab-out"))
}

fn write_outputs(dir: &Path, name: &str, cfg: &Config, seed: u64, outcome: &Outcome) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.display().to_string(), source })?;
    let provenance = format!(
        "tubelab {} command={name} seed={seed} config_sha256={}",
        env!("CARGO_PKG_VERSION"),
        cfg.hash
    );
    let csv = outcome.table.to_csv(&[provenance], &outcome.notes)?;
    write_file(&dir.join(format!("{name}.csv")), &csv)?;
    if cfg.svg {
        if let Some(chart) = &outcome.chart {
            write_file(&dir.join(format!("{name}.svg")), &chart.to_svg())?;
        }
    }
    if let Some(fam) = &outcome.family {
        write_file(&dir.join(format!("{name}.family")), &AnyFamily::to_text(fam))?;
    }
    Ok(())
}

fn run(cli: &Cli) -> CliResult<bool> {
    let path = cli.config.as_ref().ok_or_else(|| CliError::Invalid("--config is required".into()))?;
    let cfg = Config::load(path)?;
    let seed = cli.seed.or(cfg.seed).unwrap_or(0);
    let name = cli.command.name();
    let outcome = dispatch(cli.command, &cfg, seed)?;
    write_outputs(&out_dir(cli), name, &cfg, seed, &outcome)?;
    println!("{name}: {} - {}", if outcome.passed { "PASS" } else { "FAIL" }, outcome.verdict);
    Ok(outcome.passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
