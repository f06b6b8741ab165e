//! `pktwin`: the capture-to-classifier pipeline as composable subcommands.

mod commands;
mod config;
mod error;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use config::{Labeling, LossArg, ModelArg, RunConfig, Switch};
use error::{error_line, CliError};

#[derive(Debug, Parser)]
#[command(name = "pktwin", version, about = "Raw-packet window intrusion detection pipeline")]
struct Cli {
    /// Print reports as JSON instead of aligned text.
    #[arg(long, global = true)]
    json: bool,

    /// TOML run configuration; flags take precedence over it.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Seed for every randomized step. Falls back to the config file, then PKTWIN_SEED, then 1.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic capture with attack sessions and its rules CSV.
    Synth(SynthArgs),
    /// Drop malformed records and order packets by timestamp.
    Ingest(IngestArgs),
    /// Assemble flows and write per-packet labels.
    Label(LabelArgs),
    /// Randomize MAC/IP/port fields and repair checksums.
    Anonymize(AnonymizeArgs),
    /// Turn a capture and its labels into a PKW1 container.
    Encode(EncodeArgs),
    /// Group-shuffled train/val/test split.
    Split(SplitArgs),
    /// Oversample the minority class of a training container.
    Balance(BalanceArgs),
    /// Train a model and write a checkpoint.
    Train(TrainArgs),
    /// Confusion matrix and metrics of a checkpoint on a container.
    Eval(EvalArgs),
    /// Batch-averaged input-gradient saliency map.
    Saliency(SaliencyArgs),
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 10_000)]
    packets: usize,
    #[arg(long, default_value_t = 0.3)]
    attack_share: f64,
    #[arg(long, value_name = "PCAP")]
    pcap: PathBuf,
    #[arg(long, value_name = "CSV")]
    rules: PathBuf,
}

#[derive(Debug, Args)]
struct IngestArgs {
    input: PathBuf,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct LabelArgs {
    input: PathBuf,
    #[arg(long, value_name = "CSV")]
    rules: PathBuf,
    #[arg(short, long)]
    out: PathBuf,
    #[arg(long, value_enum)]
    labeling: Option<Labeling>,
    #[arg(long, default_value_t = 0)]
    capture_id: u32,
    /// Idle gap that closes a flow, in microseconds.
    #[arg(long)]
    timeout_us: Option<u64>,
}

#[derive(Debug, Args)]
struct AnonymizeArgs {
    input: PathBuf,
    #[arg(short, long)]
    out: PathBuf,
    /// Write the replacement map as CSV.
    #[arg(long, value_name = "CSV")]
    map: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EncodeArgs {
    input: PathBuf,
    #[arg(long, value_name = "CSV")]
    labels: PathBuf,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SplitArgs {
    /// Containers concatenated in the given order before splitting.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long)]
    groups: Option<usize>,
    /// Receives train.pkw, val.pkw and test.pkw.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BalanceMode {
    Packets,
    Windows,
}

#[derive(Debug, Args)]
struct BalanceArgs {
    input: PathBuf,
    #[arg(short, long)]
    out: PathBuf,
    #[arg(long, value_enum)]
    mode: BalanceMode,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    val: PathBuf,
    #[arg(long, value_enum)]
    model: Option<ModelArg>,
    #[arg(long, value_enum)]
    loss: Option<LossArg>,
    /// Focal-loss class weight.
    #[arg(long)]
    alpha: Option<f64>,
    /// Focal-loss focusing exponent.
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Overrides the model's default batch size.
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    /// Labeling scheme the containers were built with; recorded in the report.
    #[arg(long, value_enum)]
    labeling: Option<Labeling>,
    /// Oversample the training partition before training.
    #[arg(long, value_enum)]
    balance: Option<Switch>,
    #[arg(short, long, value_name = "CHECKPOINT")]
    out: PathBuf,
    /// Per-epoch CSV history.
    #[arg(long, value_name = "CSV")]
    history: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Also write the JSON report here.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SaliencyArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Number of windows averaged.
    #[arg(long, default_value_t = 16)]
    batch: usize,
    #[arg(long)]
    pgm: PathBuf,
    #[arg(long)]
    csv: PathBuf,
}

fn run(cli: Cli) -> Result<report::Report, CliError> {
    let cfg = RunConfig::load(cli.config.as_deref())?;
    let seed = cfg.seed(cli.seed)?;
    match cli.command {
        Command::Synth(a) => commands::synth(seed, a.packets, a.attack_share, &a.pcap, &a.rules),
        Command::Ingest(a) => commands::ingest(&a.input, &a.out),
        Command::Label(a) => commands::label(commands::LabelOpts {
            input: &a.input,
            rules: &a.rules,
            out: &a.out,
            labeling: a.labeling.or(cfg.labeling).unwrap_or(Labeling::Both),
            capture_id: a.capture_id,
            timeout_us: a.timeout_us.or(cfg.timeout_us),
        }),
        Command::Anonymize(a) => commands::anonymize(seed, &a.input, &a.out, a.map.as_deref()),
        Command::Encode(a) => commands::encode(&a.input, &a.labels, &a.out),
        Command::Split(a) => commands::split(
            seed,
            &a.inputs,
            a.groups.or(cfg.groups).unwrap_or(pktwin::dataset::DEFAULT_GROUP_COUNT),
            &a.out_dir,
        ),
        Command::Balance(a) => commands::balance(&a.input, &a.out, matches!(a.mode, BalanceMode::Windows)),
        Command::Train(a) => commands::train(commands::TrainOpts {
            seed,
            train: &a.train,
            val: &a.val,
            model: a.model.or(cfg.model).unwrap_or(ModelArg::Fcnn),
            loss: a.loss.or(cfg.loss).unwrap_or(LossArg::Bce),
            alpha: a.alpha.or(cfg.alpha),
            gamma: a.gamma.or(cfg.gamma),
            epochs: a.epochs.or(cfg.epochs).unwrap_or(5),
            batch_size: a.batch_size.or(cfg.batch_size),
            learning_rate: a.learning_rate.or(cfg.learning_rate),
            labeling: a.labeling.or(cfg.labeling),
            balance: a.balance.or(cfg.balance).unwrap_or(Switch::Off) == Switch::On,
            out: &a.out,
            history: a.history.as_deref(),
        }),
        Command::Eval(a) => commands::eval(&a.checkpoint, &a.data, a.out.as_deref()),
        Command::Saliency(a) => commands::saliency(&a.checkpoint, &a.data, a.batch, &a.pgm, &a.csv),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let first = e.to_string().lines().next().unwrap_or_default().trim_start_matches("error: ").to_string();
            eprintln!("{}", error_line(&CliError::Usage(first)));
            return ExitCode::from(2);
        }
    };
    let json = cli.json;
    match run(cli) {
        Ok(report) => {
            if json {
                println!("{}", serde_json::to_string_pretty(&report.to_json()).expect("json"));
            } else {
                print!("{}", report.to_text());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", error_line(&e));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
