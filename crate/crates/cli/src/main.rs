use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use negdiff_cli::commands::sibling;
use negdiff_cli::{cmd_bias, cmd_eval, cmd_gen_data, cmd_report, cmd_sample, cmd_train, RunConfig};

#[derive(Parser)]
#[command(
    name = "negdiff",
    version,
    about = "Negative-condition guided sampling on a toy identity world"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Config file of `section.key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the global seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override any config key, e.g. `--set sampler.steps=50`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl Common {
    fn config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        for kv in &self.overrides {
            let (k, v) = kv
                .split_once('=')
                .with_context(|| format!("`--set {kv}`: expected KEY=VALUE"))?;
            cfg.set(k.trim(), v)?;
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Write the toy training set.
    GenData {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the denoiser on a vector file.
    Train {
        #[command(flatten)]
        common: Common,
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sample identities from a checkpoint.
    Sample {
        #[command(flatten)]
        common: Common,
        checkpoint: PathBuf,
        /// baseline, close-neg, rand-neg, mid-neg, far-neg or null.
        #[arg(long)]
        strategy: Option<String>,
        /// Guidance weight of the negative condition.
        #[arg(long)]
        w: Option<f64>,
        /// Number of identities.
        #[arg(long = "identities", short = 'n')]
        identities: Option<usize>,
        /// Samples per identity.
        #[arg(long = "per-identity", short = 'k')]
        per_identity: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Separability metrics and score histograms of a vector file.
    Eval {
        #[command(flatten)]
        common: Common,
        dataset: PathBuf,
        /// Metrics table path; the histogram goes next to it as `.hist.csv`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// STD and SER from per-group accuracies in percent.
    Bias {
        #[arg(required = true, num_args = 1.., value_delimiter = ',', allow_negative_numbers = true)]
        accuracies: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate several vector files into one comparison table.
    Report {
        #[command(flatten)]
        common: Common,
        #[arg(required = true)]
        datasets: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the effective configuration.
    Config {
        #[command(flatten)]
        common: Common,
    },
}

fn emit(text: &str, out: Option<&PathBuf>) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenData { common, out } => {
            let ds = cmd_gen_data(&common.config()?, &out)?;
            eprintln!("wrote {} records to {}", ds.record_count(), out.display());
        }
        Command::Train { common, dataset, out } => {
            let r = cmd_train(&common.config()?, &dataset, &out)?;
            match (r.epoch_losses.first(), r.final_loss) {
                (Some(first), Some(last)) => eprintln!(
                    "{} epochs in {:.1}s: loss {first:.4} -> {last:.4}; losses in {}",
                    r.epoch_losses.len(),
                    r.seconds,
                    sibling(&out, "losses.tsv").display()
                ),
                _ => eprintln!("0 epochs: wrote initial parameters"),
            }
        }
        Command::Sample {
            common,
            checkpoint,
            strategy,
            w,
            identities,
            per_identity,
            out,
        } => {
            let mut cfg = common.config()?;
            if let Some(s) = strategy {
                cfg.sample_strategy = s.parse()?;
            }
            if let Some(w) = w {
                cfg.sampler_guidance_w = w;
            }
            if let Some(n) = identities {
                cfg.sample_identities = n;
            }
            if let Some(k) = per_identity {
                cfg.sample_per_identity = k;
            }
            let s = cmd_sample(&cfg, &checkpoint, &out)?;
            eprintln!(
                "wrote {} records ({}) to {}",
                s.dataset.record_count(),
                s.dataset.header.provenance,
                out.display()
            );
        }
        Command::Eval { common, dataset, out } => {
            let r = cmd_eval(&common.config()?, &dataset, out.as_deref())?;
            if out.is_none() {
                print!("{}", r.metrics_csv);
            }
        }
        Command::Bias { accuracies, out } => emit(&cmd_bias(&accuracies)?, out.as_ref())?,
        Command::Report { common, datasets, out } => emit(&cmd_report(&common.config()?, &datasets)?, out.as_ref())?,
        Command::Config { common } => print!("{}", common.config()?),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = format!("{e:#}").replace('\n', " ");
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
