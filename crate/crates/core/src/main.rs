use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use zeno_phase::config::{ExperimentConfig, Figure, OutputFormat};
use zeno_phase::{experiment, report, Result};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
    Both,
}

impl From<FormatArg> for OutputFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => OutputFormat::Csv,
            FormatArg::Json => OutputFormat::Json,
            FormatArg::Both => OutputFormat::Both,
        }
    }
}

/// Simulate Zeno-frozen and freely driven Ramsey fringes and fit their phases.
#[derive(Debug, Parser)]
#[command(name = "zeno-phase", version)]
struct Cli {
    /// TOML experiment file; built-in defaults when omitted.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Figure to reproduce: 2, 3, 4a, 4b, 4c or appendix.
    #[arg(short, long, value_parser = parse_figure)]
    figure: Option<Figure>,
    /// Delay case 1-4, used when no figure is selected.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=4))]
    case: Option<u8>,
    #[arg(short, long)]
    out_dir: Option<PathBuf>,
    /// Master seed for the readout noise.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Noiseless populations.
    #[arg(long)]
    no_noise: bool,
}

fn parse_figure(s: &str) -> std::result::Result<Figure, String> {
    Figure::parse(s).map_err(|e| e.to_string())
}

fn resolve(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if cli.figure.is_some() {
        cfg.run.figure = cli.figure;
        cfg.run.case = None;
    }
    if cli.case.is_some() {
        cfg.run.case = cli.case;
        cfg.run.figure = None;
    }
    if let Some(dir) = &cli.out_dir {
        cfg.run.out_dir = dir.clone();
    }
    if let Some(f) = cli.format {
        cfg.run.format = f.into();
    }
    if cli.seed.is_some() {
        cfg.noise.seed = cli.seed;
    }
    if cli.no_noise {
        cfg.noise.enabled = false;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = resolve(&cli).and_then(|cfg| {
        let output = experiment::run(&cfg)?;
        report::emit(&output, &cfg.run.out_dir, cfg.run.format)
    });
    match outcome {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
