// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use lexstrata::phonofeatures::{LengthMetric, Mode, Variant};
use lexstrata::pipeline::{Pipeline, PipelineConfig, Subcommand};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Command {
    Ingest,
    Label,
    Features,
    Train,
    Cv,
    Lolo,
    Ablate,
    Sensitivity,
    IpaCheck,
    Shap,
    Consensus,
    Cluster,
    CognateTest,
    Expand,
    Report,
    /// Every step in order.
    All,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum VariantArg {
    A,
    B,
    Ablated,
    Pure,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Orth,
    Ipa,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum LengthArg {
    Char,
    Syllable,
    Omit,
}

/// Wordlist subtraction, phonological classification and audit pipeline.
#[derive(Debug, Parser)]
#[command(name = "lexstrata", version)]
struct Cli {
    /// Step to run.
    #[arg(value_enum)]
    command: Command,
    /// Pipeline config (TOML).
    #[arg(long, default_value = "lexstrata.toml")]
    config: PathBuf,
    /// Output directory; overrides `out_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Root seed; overrides `seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long, value_enum)]
    variant: Option<VariantArg>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long, value_enum)]
    length: Option<LengthArg>,
    /// More log output (repeatable).
    #[arg(short, long, action = clap::ArgAction::Count)]
    verbose: u8,
}

fn configure(cli: &Cli) -> lexstrata::Result<PipelineConfig> {
    let mut cfg = PipelineConfig::load(&cli.config)?;
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(jobs) = cli.jobs {
        cfg.jobs = jobs;
    }
    if let Some(v) = cli.variant {
        cfg.features.variant = match v {
            VariantArg::A => Variant::ModelA,
            VariantArg::B => Variant::ModelB,
            VariantArg::Ablated => Variant::Ablated,
            VariantArg::Pure => Variant::Pure,
        };
    }
    if let Some(m) = cli.mode {
        cfg.features.mode = match m {
            ModeArg::Orth => Mode::Orthographic,
            ModeArg::Ipa => Mode::Ipa,
        };
    }
    if let Some(l) = cli.length {
        cfg.features.length_metric = match l {
            LengthArg::Char => LengthMetric::CharCount,
            LengthArg::Syllable => LengthMetric::SyllableCount,
            LengthArg::Omit => LengthMetric::Omit,
        };
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> lexstrata::Result<()> {
    let cfg = configure(cli)?;
    if cfg.jobs > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cfg.jobs).build_global() {
            log::warn!("could not size the worker pool: {e}");
        }
    }
    let mut pipeline = Pipeline::new(cfg)?;
    let step = match cli.command {
        Command::All => return pipeline.run_all(),
        Command::Ingest => Subcommand::Ingest,
        Command::Label => Subcommand::Label,
        Command::Features => Subcommand::Features,
        Command::Train => Subcommand::Train,
        Command::Cv => Subcommand::Cv,
        Command::Lolo => Subcommand::Lolo,
        Command::Ablate => Subcommand::Ablate,
        Command::Sensitivity => Subcommand::Sensitivity,
        Command::IpaCheck => Subcommand::IpaCheck,
        Command::Shap => Subcommand::Shap,
        Command::Consensus => Subcommand::Consensus,
        Command::Cluster => Subcommand::Cluster,
        Command::CognateTest => Subcommand::CognateTest,
        Command::Expand => Subcommand::Expand,
        Command::Report => Subcommand::Report,
    };
    pipeline.run(step)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
