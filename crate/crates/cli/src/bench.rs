//! Benchmark harness: sequential setups and 32-byte encryptions over the
//! in-process network (or loopback TCP), reporting latency, throughput and
//! exact message counts as CSV.

use std::time::{Duration, Instant};

use thiserror::Error;

use tse_core::group::Secp256k1;
use tse_net::sim::{SimConfig, SimNetwork};
use tse_net::tcp::TcpCluster;
use tse_net::wire::InstanceMode;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid threshold rule: {0}")]
    BadRule(String),
    #[error("rule yields invalid threshold k={k} for n={n}")]
    BadThreshold { k: i64, n: u16 },
    #[error("at least 10 runs are required, got {0}")]
    TooFewRuns(u32),
    #[error("setup aborted during benchmarking: {0}")]
    SetupFailed(String),
    #[error("encryption failed during benchmarking: {0}")]
    EncryptFailed(String),
}

/// How the threshold is derived from the participant count.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum KRule {
    Fraction { num: u16, den: u16 },
    Offset(i32),
    Fixed(u16),
}

impl KRule {
    pub fn parse(text: &str) -> Result<Self, BenchError> {
        let t = text.trim();
        if let Ok(v) = t.parse::<u16>() {
            return Ok(KRule::Fixed(v));
        }
        if let Some(rest) = t.strip_prefix("n-") {
            let off: i32 = rest
                .parse()
                .map_err(|_| BenchError::BadRule(text.to_string()))?;
            return Ok(KRule::Offset(-off));
        }
        if let Some((num_part, den_part)) = t.split_once('/') {
            let num = match num_part {
                "n" => 1,
                other => other
                    .strip_suffix('n')
                    .ok_or_else(|| BenchError::BadRule(text.to_string()))?
                    .parse::<u16>()
                    .map_err(|_| BenchError::BadRule(text.to_string()))?,
            };
            let den: u16 = den_part
                .parse()
                .map_err(|_| BenchError::BadRule(text.to_string()))?;
            if den == 0 {
                return Err(BenchError::BadRule(text.to_string()));
            }
            return Ok(KRule::Fraction { num, den });
        }
        Err(BenchError::BadRule(text.to_string()))
    }

    pub fn apply(&self, n: u16) -> Result<u16, BenchError> {
        let k: i64 = match self {
            KRule::Fraction { num, den } => (n as i64 * *num as i64) / *den as i64,
            KRule::Offset(off) => n as i64 + *off as i64,
            KRule::Fixed(v) => *v as i64,
        };
        if k < 1 || k > n as i64 {
            return Err(BenchError::BadThreshold { k, n });
        }
        Ok(k as u16)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NetworkKind {
    /// Deterministic in-process harness (default).
    Harness,
    /// Loopback TCP cluster.
    Loopback,
}

impl std::str::FromStr for NetworkKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "harness" => Ok(NetworkKind::Harness),
            "loopback" => Ok(NetworkKind::Loopback),
            other => Err(format!(
                "unknown network '{other}', expected harness|loopback"
            )),
        }
    }
}

#[derive(Clone, Debug)]
pub struct BenchRow {
    pub k: u16,
    pub n: u16,
    pub op: &'static str,
    pub runs: u32,
    pub throughput_ops_s: f64,
    pub latency_ms: f64,
    pub messages: u64,
}

#[derive(Clone, Debug, Default)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    /// Aborted runs are excluded from timing and counted here.
    pub aborted_runs: u32,
}

pub const CSV_HEADER: &str = "k,n,op,runs,throughput_ops_s,latency_ms,messages";

impl BenchReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{:.3},{:.3},{}\n",
                row.k, row.n, row.op, row.runs, row.throughput_ops_s, row.latency_ms, row.messages
            ));
        }
        out
    }
}

fn row(k: u16, n: u16, op: &'static str, runs: u32, total: Duration, messages: u64) -> BenchRow {
    let secs = total.as_secs_f64().max(1e-9);
    BenchRow {
        k,
        n,
        op,
        runs,
        throughput_ops_s: runs as f64 / secs,
        latency_ms: secs * 1_000.0 / runs as f64,
        messages,
    }
}

/// Sequentially executes `runs` setups and `runs` 32-byte encryptions per
/// `(k, n)` cell and reports the timings.
pub fn bench_run(
    rule: &KRule,
    n_list: &[u16],
    runs: u32,
    network: NetworkKind,
    seed: u64,
) -> Result<BenchReport, BenchError> {
    if runs < 10 {
        return Err(BenchError::TooFewRuns(runs));
    }
    let mut report = BenchReport::default();
    for &n in n_list {
        let k = rule.apply(n)?;
        match network {
            NetworkKind::Harness => bench_harness_cell(&mut report, n, k, runs, seed)?,
            NetworkKind::Loopback => bench_loopback_cell(&mut report, n, k, runs, seed)?,
        }
    }
    Ok(report)
}

fn bench_harness_cell(
    report: &mut BenchReport,
    n: u16,
    k: u16,
    runs: u32,
    seed: u64,
) -> Result<(), BenchError> {
    // One untimed warmup run so lazy table initialization in the curve
    // arithmetic does not land in the first timed sample.
    {
        let config = SimConfig {
            record_events: false,
            ..SimConfig::honest(n, k, seed ^ 0xaaaa)
        };
        let mut net = SimNetwork::<Secp256k1>::new(config);
        let _ = net.run_setup();
    }

    // Setups: a fresh deployment per run, channel establishment excluded
    // from the timed window.
    let mut total = Duration::ZERO;
    let mut timed = 0u32;
    let mut setup_messages = 0u64;
    for r in 0..runs {
        let config = SimConfig {
            record_events: false,
            ..SimConfig::honest(n, k, seed.wrapping_add(r as u64))
        };
        let mut net = SimNetwork::<Secp256k1>::new(config);
        let started = Instant::now();
        let result = net.run_setup();
        let elapsed = started.elapsed();
        if result.outcome.is_ok() {
            total += elapsed;
            timed += 1;
            setup_messages = net.counts().protocol_total();
        } else {
            report.aborted_runs += 1;
        }
    }
    if timed == 0 {
        return Err(BenchError::SetupFailed("every setup run aborted".into()));
    }
    report
        .rows
        .push(row(k, n, "setup", timed, total, setup_messages));

    // Encryptions: one deployment, sequential 32-byte messages.
    let config = SimConfig {
        record_events: false,
        ..SimConfig::honest(n, k, seed ^ ((n as u64) << 20 | (k as u64) << 4 | 1))
    };
    let mut net = SimNetwork::<Secp256k1>::new(config);
    let result = net.run_setup();
    if result.outcome.is_err() {
        return Err(BenchError::SetupFailed(format!("{result:?}")));
    }
    let quorum: Vec<u16> = (1..=k).collect();
    for _ in 0..3 {
        net.encrypt(1, &quorum, b"warmup message, not timed padd")
            .map_err(|e| BenchError::EncryptFailed(e.to_string()))?;
    }
    let before = net.counts();
    let mut total = Duration::ZERO;
    for r in 0..runs {
        let mut message = [0u8; 32];
        message[..4].copy_from_slice(&r.to_be_bytes());
        let started = Instant::now();
        net.encrypt(1, &quorum, &message)
            .map_err(|e| BenchError::EncryptFailed(e.to_string()))?;
        total += started.elapsed();
    }
    let per_op = net.counts().diff(&before).protocol_total() / runs as u64;
    report.rows.push(row(k, n, "encrypt", runs, total, per_op));
    Ok(())
}

fn bench_loopback_cell(
    report: &mut BenchReport,
    n: u16,
    k: u16,
    runs: u32,
    seed: u64,
) -> Result<(), BenchError> {
    let timeout = Duration::from_secs(60);
    let mut total = Duration::ZERO;
    let mut timed = 0u32;
    for r in 0..runs {
        let mut cluster = TcpCluster::<Secp256k1>::start(n, k, seed.wrapping_add(r as u64), 30_000)
            .map_err(|e| BenchError::SetupFailed(e.to_string()))?;
        let started = Instant::now();
        let result = cluster
            .run_instance(InstanceMode::Setup, timeout)
            .map_err(|e| BenchError::SetupFailed(e.to_string()))?;
        let elapsed = started.elapsed();
        if result.outcome.is_ok() {
            total += elapsed;
            timed += 1;
        } else {
            report.aborted_runs += 1;
        }
        cluster.shutdown();
    }
    if timed == 0 {
        return Err(BenchError::SetupFailed("every setup run aborted".into()));
    }
    let n64 = n as u64;
    let setup_messages = n64 * (n64 - 1) + n64 + 2 * n64 * n64;
    report
        .rows
        .push(row(k, n, "setup", timed, total, setup_messages));

    let mut cluster = TcpCluster::<Secp256k1>::start(n, k, seed ^ 0xbee5, 30_000)
        .map_err(|e| BenchError::SetupFailed(e.to_string()))?;
    let result = cluster
        .run_instance(InstanceMode::Setup, timeout)
        .map_err(|e| BenchError::SetupFailed(e.to_string()))?;
    if result.outcome.is_err() {
        return Err(BenchError::SetupFailed(format!("{result:?}")));
    }
    let quorum: Vec<u16> = (1..=k).collect();
    let mut total = Duration::ZERO;
    for r in 0..runs {
        let mut message = [0u8; 32];
        message[..4].copy_from_slice(&r.to_be_bytes());
        let started = Instant::now();
        cluster
            .encrypt(1, &quorum, &message, timeout)
            .map_err(|e| BenchError::EncryptFailed(e.to_string()))?;
        total += started.elapsed();
    }
    cluster.shutdown();
    report
        .rows
        .push(row(k, n, "encrypt", runs, total, 2 * k as u64));
    Ok(())
}
