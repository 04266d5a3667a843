//! `gridnewton` — train and inspect distributed-Newton feedforward models.
//!
//! Runs are described by a JSON configuration (data paths, layer sizes,
//! neuron split, hyperparameters); a handful of flags override the common
//! fields. Two transports are available: `inproc` wires the partitions as
//! threads of this process, `tcp` launches one worker process per partition
//! with this process as the rendezvous point.

use std::path::PathBuf;

use anyhow::Result;
use clap::{Parser, Subcommand};

mod commands;
mod config;
mod dataio;
mod mesh;
mod report;

use commands::{EvalArgs, GnCheckArgs, PlanArgs};
use config::Overrides;

#[derive(Parser)]
#[command(name = "gridnewton", version, about = "Distributed Newton training for feedforward nets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train with the distributed Newton method.
    TrainNewton(Overrides),
    /// Train with the momentum-SGD baseline.
    TrainSgd(Overrides),
    /// Score a checkpoint on a dataset.
    Eval(EvalArgs),
    /// Print the partition table and cost estimates for a configuration.
    PartitionPlan(PlanArgs),
    /// Compare the Gauss-Newton machinery against dense references.
    GnCheck(GnCheckArgs),
    /// Internal: one training partition of a multi-process run.
    #[command(hide = true)]
    Worker {
        #[arg(long)]
        scratch: PathBuf,
        #[arg(long)]
        rank: usize,
    },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::TrainNewton(over) => commands::cmd_train_newton(&over),
        Command::TrainSgd(over) => commands::cmd_train_sgd(&over),
        Command::Eval(args) => commands::cmd_eval(&args),
        Command::PartitionPlan(args) => commands::cmd_partition_plan(&args),
        Command::GnCheck(args) => commands::cmd_gn_check(&args),
        Command::Worker { scratch, rank } => mesh::run_worker(&scratch, rank),
    }
}
