//! Command-line runner for soft-output decoding experiments.

mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use softout::bp::PriorMode;
use softout::codes::SurfaceVariant;
use softout::soft::DecoderKind;

use config::{ConfigError, ExperimentConfig, Family, Kind};
use run::{parse_mode, Manifest, RunError};

#[derive(Parser)]
#[command(name = "softout", version, about = "Soft-output decoding experiments")]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Soft-output histogram with per-bin failure counts.
    PhiSweep(RunArgs),
    /// Exact soft-output/failure table of the ring repetition code.
    RepExact(RunArgs),
    /// Outer lifted-product code with inner soft information.
    Hierarchical(RunArgs),
    /// Discard fraction and postselected failure rate per cutoff.
    Postselect(RunArgs),
    /// Postselection code length, threshold and error bounds.
    Bounds(RunArgs),
    /// Per-trial memory experiment records.
    Memory(RunArgs),
    /// Parameters and check matrices of the lifted-product code.
    QclpInfo(RunArgs),
    /// Rerun the experiment recorded in a manifest.
    Replay {
        manifest: PathBuf,
        /// Write to this directory instead of the recorded one.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    seed: u64,
    /// TOML file with experiment settings; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_parser = parse_family)]
    family: Option<Family>,
    #[arg(long)]
    distance: Option<usize>,
    #[arg(long, value_parser = parse_variant)]
    variant: Option<SurfaceVariant>,
    #[arg(long)]
    length: Option<usize>,
    /// Physical rates, comma separated.
    #[arg(long, value_delimiter = ',')]
    p: Option<Vec<f64>>,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    swap_ratio: Option<f64>,
    #[arg(long)]
    rounds: Option<usize>,
    #[arg(long)]
    outer_length: Option<usize>,
    #[arg(long, value_parser = parse_decoder)]
    decoder: Option<DecoderKind>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    outer_rounds: Option<usize>,
    #[arg(long)]
    inner_samples: Option<u64>,
    #[arg(long, value_delimiter = ',', value_parser = parse_mode)]
    modes: Option<Vec<PriorMode>>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    lift: Option<u32>,
    #[arg(long)]
    gates: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    cutoffs: Option<Vec<f64>>,
}

fn parse_family(s: &str) -> Result<Family, String> {
    match s {
        "surface" => Ok(Family::Surface),
        "repetition" => Ok(Family::Repetition),
        _ => Err(format!("unknown code family '{s}' (expected surface or repetition)")),
    }
}

fn parse_variant(s: &str) -> Result<SurfaceVariant, String> {
    s.parse().map_err(|e: softout::Error| e.to_string())
}

fn parse_decoder(s: &str) -> Result<DecoderKind, String> {
    s.parse().map_err(|e: softout::Error| e.to_string())
}

impl RunArgs {
    fn into_config(self, kind: Kind) -> Result<ExperimentConfig, ConfigError> {
        let mut c = match &self.config {
            Some(path) => {
                let c = ExperimentConfig::load(path)?;
                if c.kind != kind {
                    return Err(ConfigError(vec![format!(
                        "config file is for `{}`, not `{}`",
                        c.kind.name(),
                        kind.name()
                    )]));
                }
                c
            }
            None => ExperimentConfig::new(kind, self.seed),
        };
        c.seed = self.seed;
        macro_rules! take {
            ($($field:ident),*) => { $( if let Some(v) = self.$field { c.$field = v; } )* };
        }
        take!(family, distance, variant, length, p, outer_length, decoder, trials, outer_rounds);
        take!(inner_samples, modes, max_iter, lift, gates, epsilon, cutoffs);
        if let Some(out) = self.out {
            c.output = out;
        }
        c.q = self.q.or(c.q);
        c.swap_ratio = self.swap_ratio.or(c.swap_ratio);
        c.rounds = self.rounds.or(c.rounds);
        Ok(c)
    }
}

fn execute(cli: Cli) -> Result<Manifest, RunError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| RunError::Runtime(e.to_string()))?;
    }
    let (kind, args) = match cli.command {
        Command::PhiSweep(a) => (Kind::PhiSweep, a),
        Command::RepExact(a) => (Kind::RepExact, a),
        Command::Hierarchical(a) => (Kind::Hierarchical, a),
        Command::Postselect(a) => (Kind::Postselect, a),
        Command::Bounds(a) => (Kind::Bounds, a),
        Command::Memory(a) => (Kind::Memory, a),
        Command::QclpInfo(a) => (Kind::QclpInfo, a),
        Command::Replay { manifest, out } => {
            let mut config = Manifest::load(&manifest)?.config;
            if let Some(out) = out {
                config.output = out;
            }
            eprintln!("replaying {} (seed {})", config.kind.name(), config.seed);
            return run::run(&config);
        }
    };
    let config = args.into_config(kind)?;
    eprintln!("running {} (seed {})", kind.name(), config.seed);
    run::run(&config)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(m) => {
            eprintln!(
                "wrote {} to {} in {:.1}s",
                m.outputs.join(", "),
                m.config.output.display(),
                m.wall_time_seconds
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(match e {
                RunError::Config(_) => 2,
                RunError::Runtime(_) => 3,
            })
        }
    }
}
