//! `trustgcn` command-line interface.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use trustgcn::data::{Binning, SplitSpec};

use config::RunArgs;

#[derive(Parser, Debug)]
#[command(name = "trustgcn", version, about = "Signed temporal GCN for trust-network edge classification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Bin a rating CSV into a snapshot bundle.
    Ingest {
        /// `source,target,rating,time` CSV, plain or gzip.
        #[arg(long = "in", value_name = "FILE")]
        input: PathBuf,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        #[arg(long, default_value_t = 12)]
        snapshots: usize,
        #[arg(long, default_value_t = Binning::EqualEdges)]
        binning: Binning,
        /// Train, validation and test snapshot counts.
        #[arg(long, default_value_t = SplitSpec::default())]
        split: SplitSpec,
    },
    /// Count per-edge graphlets of every snapshot.
    Motifs {
        /// Snapshot bundle.
        #[arg(long = "in", value_name = "DIR")]
        input: PathBuf,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        /// Check the counts against the brute-force oracle on graphs (or
        /// induced neighbourhoods) of at most N nodes.
        #[arg(long, value_name = "N")]
        verify: Option<usize>,
    },
    /// Train under the top-5 protocol and write metrics and checkpoints.
    Train {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Evaluate a checkpoint on one split.
    Eval {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_name = "DIR")]
        checkpoint: PathBuf,
        #[arg(long, value_enum, default_value_t = commands::SplitName::Test)]
        split: commands::SplitName,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Train the full model and each single-component ablation.
    Ablate {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        run: RunArgs,
        /// Also train the static GCN baseline.
        #[arg(long)]
        baseline: bool,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Write per-snapshot node embeddings of a checkpoint as TSV.
    ExportEmb {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_name = "DIR")]
        checkpoint: PathBuf,
        /// Export only this snapshot index.
        #[arg(long, value_name = "T")]
        snapshot: Option<usize>,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
}

#[derive(clap::Args, Debug, Clone)]
struct DataArgs {
    /// Snapshot bundle.
    #[arg(long, value_name = "DIR")]
    snaps: PathBuf,
    /// Motif bundle (required by variants that use motifs).
    #[arg(long, value_name = "DIR")]
    motifs: Option<PathBuf>,
}

/// Failure classes with stable exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Exit 2.
    Missing(String),
    /// Exit 3.
    Validation(String),
    /// Exit 1.
    Other(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Other(_) => 1,
            CliError::Missing(_) => 2,
            CliError::Validation(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Missing(m) | CliError::Validation(m) | CliError::Other(m) => m,
        }
    }
}

impl From<trustgcn::Error> for CliError {
    fn from(e: trustgcn::Error) -> Self {
        use trustgcn::Error as E;
        if e.is_missing_input() {
            return CliError::Missing(e.to_string());
        }
        match e {
            E::Io { .. } | E::NonFinite { .. } => CliError::Other(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Ingest {
            input,
            out,
            snapshots,
            binning,
            split,
        } => commands::ingest(&input, &out, snapshots, binning, split),
        Command::Motifs { input, out, verify } => commands::motifs(&input, &out, verify),
        Command::Train { data, run, out } => commands::train(&data.snaps, data.motifs.as_deref(), &run, &out),
        Command::Eval {
            data,
            checkpoint,
            split,
            out,
        } => commands::eval(&data.snaps, data.motifs.as_deref(), &checkpoint, split, &out),
        Command::Ablate {
            data,
            run,
            baseline,
            out,
        } => commands::ablate(&data.snaps, data.motifs.as_deref(), &run, baseline, &out),
        Command::ExportEmb {
            data,
            checkpoint,
            snapshot,
            out,
        } => commands::export_embeddings(&data.snaps, data.motifs.as_deref(), &checkpoint, snapshot, &out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version.
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(3);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
