//! The `tse` tool: threshold symmetric encryption without a trusted dealer.
//!
//! Exit codes: 0 on success, 1 on protocol failure (aborted setup, rejected
//! ciphertext, unreachable quorum), 2 on usage errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use tse_cli::bench::NetworkKind;
use tse_cli::commands::{self, CommandError};
use tse_net::harness::Scenario;

#[derive(Parser)]
#[command(
    name = "tse",
    version,
    about = "Threshold symmetric-key encryption with dealer-free key generation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a k-of-n deployment: joint key generation, roster and
    /// encrypted per-participant key stores.
    Setup {
        #[arg(long)]
        n: u16,
        #[arg(long)]
        k: u16,
        /// Instance directory for roster, storage log and key stores.
        #[arg(long, default_value = "tse-instance")]
        out: PathBuf,
        /// Optional extra path to write the roster JSON to.
        #[arg(long)]
        roster: Option<PathBuf>,
        #[arg(long, env = "TSE_PASSPHRASE")]
        passphrase: String,
        /// Seed for deterministic identity and key generation (testing).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Encrypt a file with a quorum of participants.
    Encrypt {
        #[arg(long = "in")]
        input: PathBuf,
        /// Comma-separated participant indices; the first one initiates.
        #[arg(long)]
        participants: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "tse-instance")]
        store: PathBuf,
        #[arg(long, env = "TSE_PASSPHRASE")]
        passphrase: String,
    },
    /// Decrypt a ciphertext file; fails closed on any tampering.
    Decrypt {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "tse-instance")]
        store: PathBuf,
        /// Defaults to the first k participants with key stores present.
        #[arg(long)]
        participants: Option<String>,
        #[arg(long, env = "TSE_PASSPHRASE")]
        passphrase: String,
    },
    /// Re-randomize every key share without changing the shared secret.
    Refresh {
        #[arg(long, default_value = "tse-instance")]
        store: PathBuf,
        #[arg(long, env = "TSE_PASSPHRASE")]
        passphrase: String,
    },
    /// Run sequential setup and encryption benchmarks, emitting CSV.
    Bench {
        /// Threshold rule: a fraction of n (n/2, 2n/3), an offset (n-2) or
        /// a constant (2).
        #[arg(long = "k-rule")]
        k_rule: String,
        /// Comma-separated participant counts.
        #[arg(long = "n-list")]
        n_list: String,
        #[arg(long)]
        runs: u32,
        #[arg(long, default_value = "harness")]
        network: NetworkKind,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Run an adversarial or honest scenario and print the trace as JSON.
    Simulate {
        #[arg(long)]
        scenario: Scenario,
        #[arg(long, default_value_t = 4)]
        n: u16,
        #[arg(long, default_value_t = 2)]
        k: u16,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

fn run(cli: Cli) -> Result<(), CommandError> {
    match cli.command {
        Command::Setup {
            n,
            k,
            out,
            roster,
            passphrase,
            seed,
        } => commands::setup(n, k, &out, roster.as_deref(), &passphrase, seed),
        Command::Encrypt {
            input,
            participants,
            out,
            store,
            passphrase,
        } => {
            let quorum = commands::parse_indices(&participants)?;
            commands::encrypt(&input, &quorum, &out, &store, &passphrase)
        }
        Command::Decrypt {
            input,
            out,
            store,
            participants,
            passphrase,
        } => {
            let quorum = participants
                .as_deref()
                .map(commands::parse_indices)
                .transpose()?;
            commands::decrypt(&input, &out, &store, quorum.as_deref(), &passphrase)
        }
        Command::Refresh { store, passphrase } => commands::refresh(&store, &passphrase),
        Command::Bench {
            k_rule,
            n_list,
            runs,
            network,
            seed,
        } => commands::bench(&k_rule, &n_list, runs, network, seed),
        Command::Simulate {
            scenario,
            n,
            k,
            seed,
        } => commands::simulate(scenario, n, k, seed),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
