//! Implementations behind the CLI subcommands.

use std::path::Path;
use std::sync::Arc;

use rand_core::{OsRng, RngCore};
use thiserror::Error;

use tse_core::cipher::Ciphertext;
use tse_core::group::Secp256k1;
use tse_net::harness::{harness_run, Scenario};
use tse_net::node::SessionError;
use tse_net::sim::{SimConfig, SimNetwork};
use tse_net::storage::{PublicStorage, Record, RecordKey, RecordKind};

use crate::bench::{bench_run, BenchError, KRule, NetworkKind};
use crate::instance::{self, InstanceError, LoadedInstance};

/// Command failures, split by exit code: usage problems exit 2, protocol
/// or environment failures exit 1.
#[derive(Debug, Error)]
pub enum CommandError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Failure(String),
}

impl CommandError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CommandError::Usage(_) => 2,
            CommandError::Failure(_) => 1,
        }
    }
}

impl From<InstanceError> for CommandError {
    fn from(e: InstanceError) -> Self {
        CommandError::Failure(e.to_string())
    }
}

impl From<std::io::Error> for CommandError {
    fn from(e: std::io::Error) -> Self {
        CommandError::Failure(e.to_string())
    }
}

fn session_error(e: SessionError) -> CommandError {
    match e {
        SessionError::QuorumTooSmall { need, got } => CommandError::Usage(format!(
            "quorum of {got} participants is below the threshold {need}"
        )),
        SessionError::CommitmentMismatch => {
            CommandError::Failure("commitment mismatch: ciphertext rejected".into())
        }
        other => CommandError::Failure(other.to_string()),
    }
}

pub fn parse_indices(text: &str) -> Result<Vec<u16>, CommandError> {
    let mut out = Vec::new();
    for part in text.split(',') {
        let idx: u16 = part
            .trim()
            .parse()
            .map_err(|_| CommandError::Usage(format!("bad participant index '{part}'")))?;
        if idx == 0 {
            return Err(CommandError::Usage("participant indices start at 1".into()));
        }
        if out.contains(&idx) {
            return Err(CommandError::Usage(format!("duplicate participant {idx}")));
        }
        out.push(idx);
    }
    Ok(out)
}

/// Runs the trustless setup in-process and persists the deployment.
pub fn setup(
    n: u16,
    k: u16,
    out_dir: &Path,
    roster_out: Option<&Path>,
    passphrase: &str,
    seed: Option<u64>,
) -> Result<(), CommandError> {
    if k < 1 || k > n {
        return Err(CommandError::Usage(format!(
            "threshold must satisfy 1 <= k <= n, got k={k}, n={n}"
        )));
    }
    std::fs::create_dir_all(out_dir)?;
    let storage_path = out_dir.join(instance::STORAGE_FILE);
    if storage_path.exists() {
        return Err(CommandError::Usage(format!(
            "{} already exists; refusing to overwrite an instance",
            storage_path.display()
        )));
    }
    let storage = Arc::new(PublicStorage::open(&storage_path).map_err(InstanceError::Storage)?);
    let seed = seed.unwrap_or_else(random_seed);
    let config = SimConfig {
        record_events: false,
        ..SimConfig::honest(n, k, seed)
    };
    let mut net = SimNetwork::<Secp256k1>::with_storage(config, storage);
    let result = net.run_setup();
    if let Err(reasons) = result.outcome {
        let summary: Vec<String> = reasons.iter().map(|(j, r)| format!("{j}: {r}")).collect();
        return Err(CommandError::Failure(format!(
            "setup aborted ({})",
            summary.join("; ")
        )));
    }
    instance::write_roster(out_dir, net.roster())?;
    if let Some(path) = roster_out {
        let text = serde_json::to_string_pretty(net.roster())
            .map_err(|e| CommandError::Failure(e.to_string()))?;
        std::fs::write(path, text)?;
    }
    instance::persist_from_network(out_dir, &net, passphrase)?;
    let instance_id = net.node(1).current_instance().expect("installed");
    println!(
        "setup complete: n={n} k={k} instance={} epoch=0 store={}",
        hex::encode(instance_id),
        out_dir.display()
    );
    Ok(())
}

pub fn encrypt(
    input: &Path,
    participants: &[u16],
    output: &Path,
    store_dir: &Path,
    passphrase: &str,
) -> Result<(), CommandError> {
    let message = std::fs::read(input)?;
    if message.is_empty() {
        return Err(CommandError::Usage(
            "refusing to encrypt an empty file".into(),
        ));
    }
    let loaded = LoadedInstance::load(store_dir, participants, passphrase)?;
    if (participants.len() as u16) < loaded.k() {
        return Err(CommandError::Usage(format!(
            "need at least k={} participants, got {}",
            loaded.k(),
            participants.len()
        )));
    }
    let instance = loaded.instance();
    let mut net = loaded.into_network()?;
    let initiator = participants[0];
    let ciphertext = net
        .encrypt(initiator, participants, &message)
        .map_err(session_error)?;
    let encoded = ciphertext.encode();
    std::fs::write(output, &encoded)?;
    // Ciphertexts live in public storage verbatim; the epoch slot of the
    // key doubles as a per-instance sequence number here.
    let sequence = net
        .storage()
        .snapshot()
        .iter()
        .filter(|r| r.key.kind == RecordKind::Ciphertext && r.key.instance == instance)
        .count() as u32;
    net.storage()
        .append(Record {
            key: RecordKey {
                instance,
                kind: RecordKind::Ciphertext,
                epoch: sequence,
                issuer: initiator,
            },
            value: encoded,
        })
        .map_err(|e| CommandError::Failure(e.to_string()))?;
    println!(
        "encrypted {} -> {} ({} bytes, initiator {})",
        input.display(),
        output.display(),
        message.len(),
        initiator
    );
    Ok(())
}

pub fn decrypt(
    input: &Path,
    output: &Path,
    store_dir: &Path,
    participants: Option<&[u16]>,
    passphrase: &str,
) -> Result<(), CommandError> {
    let bytes = std::fs::read(input)?;
    let ciphertext = Ciphertext::decode(&bytes)
        .map_err(|e| CommandError::Failure(format!("malformed ciphertext: {e}")))?;

    let roster = instance::read_roster(store_dir)?;
    let quorum: Vec<u16> = match participants {
        // An explicit list is used as given.
        Some(p) => p.to_vec(),
        // Otherwise take the first k key stores found; peek at one store
        // for the threshold.
        None => {
            let available = instance::available_indices(store_dir, roster.len());
            let first = available
                .first()
                .copied()
                .ok_or_else(|| CommandError::Usage("no participant key stores found".into()))?;
            let probe = LoadedInstance::load(store_dir, &[first], passphrase)?;
            available.into_iter().take(probe.k() as usize).collect()
        }
    };
    if quorum.is_empty() {
        return Err(CommandError::Usage(
            "no participant key stores found".into(),
        ));
    }
    let loaded = LoadedInstance::load(store_dir, &quorum, passphrase)?;
    let k = loaded.k() as usize;
    if quorum.len() < k {
        return Err(CommandError::Usage(format!(
            "need at least k={k} participants, found {}",
            quorum.len()
        )));
    }
    let mut net = loaded.into_network()?;
    let initiator = quorum[0];
    let plaintext = net
        .decrypt(initiator, &quorum, &ciphertext)
        .map_err(session_error)?;
    std::fs::write(output, &plaintext)?;
    println!(
        "decrypted {} -> {} ({} bytes)",
        input.display(),
        output.display(),
        plaintext.len()
    );
    Ok(())
}

/// Proactive refresh: every participant must be present.
pub fn refresh(store_dir: &Path, passphrase: &str) -> Result<(), CommandError> {
    let roster = instance::read_roster(store_dir)?;
    let all: Vec<u16> = (1..=roster.len()).collect();
    let available = instance::available_indices(store_dir, roster.len());
    if available != all {
        return Err(CommandError::Usage(format!(
            "refresh needs all {} key stores, found {:?}",
            roster.len(),
            available
        )));
    }
    let loaded = LoadedInstance::load(store_dir, &all, passphrase)?;
    let mut net = loaded.into_network()?;
    let result = net.run_refresh();
    if let Err(reasons) = result.outcome {
        let summary: Vec<String> = reasons.iter().map(|(j, r)| format!("{j}: {r}")).collect();
        return Err(CommandError::Failure(format!(
            "refresh aborted ({})",
            summary.join("; ")
        )));
    }
    instance::persist_from_network(store_dir, &net, passphrase)?;
    println!(
        "refresh complete: epoch={} instance={}",
        net.current_epoch(),
        hex::encode(net.node(1).current_instance().expect("installed"))
    );
    Ok(())
}

pub fn simulate(scenario: Scenario, n: u16, k: u16, seed: u64) -> Result<(), CommandError> {
    if k < 1 || k > n {
        return Err(CommandError::Usage(format!(
            "threshold must satisfy 1 <= k <= n, got k={k}, n={n}"
        )));
    }
    let trace = harness_run(n, k, scenario, seed);
    println!("{}", trace.to_json());
    Ok(())
}

pub fn bench(
    k_rule: &str,
    n_list: &str,
    runs: u32,
    network: NetworkKind,
    seed: u64,
) -> Result<(), CommandError> {
    let rule = KRule::parse(k_rule).map_err(|e| CommandError::Usage(e.to_string()))?;
    let ns: Result<Vec<u16>, _> = n_list.split(',').map(|p| p.trim().parse::<u16>()).collect();
    let ns = ns.map_err(|_| CommandError::Usage(format!("bad n-list '{n_list}'")))?;
    let report = bench_run(&rule, &ns, runs, network, seed).map_err(|e| match e {
        BenchError::TooFewRuns(_) | BenchError::BadRule(_) | BenchError::BadThreshold { .. } => {
            CommandError::Usage(e.to_string())
        }
        other => CommandError::Failure(other.to_string()),
    })?;
    print!("{}", report.to_csv());
    if report.aborted_runs > 0 {
        eprintln!("aborted runs excluded from timing: {}", report.aborted_runs);
    }
    Ok(())
}

fn random_seed() -> u64 {
    let mut b = [0u8; 8];
    OsRng.fill_bytes(&mut b);
    u64::from_be_bytes(b)
}
