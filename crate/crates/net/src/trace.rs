//! Machine-readable execution traces.
//!
//! The simulation driver records every logical protocol message, phase
//! transition and outcome, and keeps exact per-kind counters. Benchmarks
//! and the communication-complexity assertions read the counters; the
//! `simulate` command emits the whole trace as JSON.

use serde::Serialize;

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct MessageCounts {
    /// Participant-to-participant dealt shares.
    pub deal_messages: u64,
    /// Commitment records appended to public storage.
    pub commitment_posts: u64,
    pub eval_requests: u64,
    pub eval_responses: u64,
    /// Coordinator prompts and node progress reports.
    pub coordination: u64,
    /// Secure-channel handshake frames (not protocol messages).
    pub channel_frames: u64,
}

impl MessageCounts {
    pub fn protocol_total(&self) -> u64 {
        self.deal_messages + self.commitment_posts + self.eval_requests + self.eval_responses
    }

    pub fn diff(&self, earlier: &MessageCounts) -> MessageCounts {
        MessageCounts {
            deal_messages: self.deal_messages - earlier.deal_messages,
            commitment_posts: self.commitment_posts - earlier.commitment_posts,
            eval_requests: self.eval_requests - earlier.eval_requests,
            eval_responses: self.eval_responses - earlier.eval_responses,
            coordination: self.coordination - earlier.coordination,
            channel_frames: self.channel_frames - earlier.channel_frames,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TraceEvent {
    Message {
        seq: u64,
        from: String,
        to: String,
        kind: String,
        bytes: usize,
    },
    Phase {
        seq: u64,
        node: u16,
        phase: String,
    },
    StoragePost {
        seq: u64,
        node: u16,
        kind: String,
    },
    Outcome {
        seq: u64,
        node: u16,
        outcome: String,
    },
    Note {
        seq: u64,
        text: String,
    },
}

/// Result of one simulated instance or scenario.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TraceOutcome {
    Done,
    Aborted { reasons: Vec<String> },
    Unresolved,
}

#[derive(Clone, Debug, Serialize)]
pub struct Trace {
    pub n: u16,
    pub k: u16,
    pub scenario: String,
    pub seed: u64,
    pub outcome: TraceOutcome,
    pub counts: MessageCounts,
    pub events: Vec<TraceEvent>,
    pub notes: Vec<String>,
}

impl Trace {
    pub fn new(n: u16, k: u16, scenario: &str, seed: u64) -> Self {
        Self {
            n,
            k,
            scenario: scenario.to_string(),
            seed,
            outcome: TraceOutcome::Unresolved,
            counts: MessageCounts::default(),
            events: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trace serializes")
    }
}
