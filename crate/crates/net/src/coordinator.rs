//! The untrusted coordinator.
//!
//! It prompts participants through the phases, tallies their progress
//! reports, and broadcasts a final verdict. It never touches key material,
//! and a node installs an epoch only after its own assertions passed, so a
//! misbehaving coordinator can stall an instance but never change what
//! honest participants accept.

use crate::wire::{Body, InstanceMode, PhaseSignal, ProtocolMessage, ReportedPhase};
use std::collections::{BTreeMap, BTreeSet};

/// Misbehavior knobs for the harness scenarios.
#[derive(Clone, Debug, Default)]
pub struct CoordinatorBehavior {
    /// Never send any prompt to these participants.
    pub skip_prompt_for: BTreeSet<u16>,
    /// Send the test prompt before the start prompt.
    pub prompts_out_of_order: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InstanceResult {
    pub outcome: Result<(), Vec<(u16, String)>>,
}

#[derive(Debug)]
pub enum CoordinatorOutput {
    Prompt { to: u16, message: ProtocolMessage },
    Settled(InstanceResult),
}

#[derive(Debug, PartialEq, Eq)]
enum State {
    AwaitCommitments,
    AwaitResults,
    Settled,
}

pub struct Coordinator {
    n: u16,
    instance: [u8; 16],
    epoch: u32,
    mode: InstanceMode,
    behavior: CoordinatorBehavior,
    timeout_ms: u64,
    deadline: u64,
    state: State,
    committed: BTreeSet<u16>,
    passed: BTreeSet<u16>,
    failures: BTreeMap<u16, String>,
}

impl Coordinator {
    pub fn new(
        n: u16,
        instance: [u8; 16],
        epoch: u32,
        mode: InstanceMode,
        behavior: CoordinatorBehavior,
        timeout_ms: u64,
    ) -> Self {
        Self {
            n,
            instance,
            epoch,
            mode,
            behavior,
            timeout_ms,
            deadline: 0,
            state: State::AwaitCommitments,
            committed: BTreeSet::new(),
            passed: BTreeSet::new(),
            failures: BTreeMap::new(),
        }
    }

    fn prompt(&self, to: u16, signal: PhaseSignal) -> CoordinatorOutput {
        CoordinatorOutput::Prompt {
            to,
            message: ProtocolMessage {
                instance: self.instance,
                body: Body::PhasePrompt(signal),
            },
        }
    }

    fn recipients(&self) -> Vec<u16> {
        (1..=self.n)
            .filter(|j| !self.behavior.skip_prompt_for.contains(j))
            .collect()
    }

    /// Kicks the instance off.
    pub fn start(&mut self, now_ms: u64) -> Vec<CoordinatorOutput> {
        self.deadline = now_ms + self.timeout_ms;
        let mut outputs = Vec::new();
        for j in self.recipients() {
            if self.behavior.prompts_out_of_order {
                outputs.push(self.prompt(j, PhaseSignal::BeginTest));
            }
            outputs.push(self.prompt(
                j,
                PhaseSignal::Start {
                    mode: self.mode,
                    epoch: self.epoch,
                },
            ));
        }
        outputs
    }

    pub fn handle(
        &mut self,
        from: u16,
        message: ProtocolMessage,
        now_ms: u64,
    ) -> Vec<CoordinatorOutput> {
        if message.instance != self.instance || self.state == State::Settled {
            return Vec::new();
        }
        match message.body {
            Body::CommitmentPosted { index, epoch } => {
                if self.state != State::AwaitCommitments || epoch != self.epoch || index != from {
                    return Vec::new();
                }
                self.committed.insert(index);
                if self.committed.len() == self.n as usize {
                    self.state = State::AwaitResults;
                    self.deadline = now_ms + self.timeout_ms;
                    return self
                        .recipients()
                        .into_iter()
                        .map(|j| self.prompt(j, PhaseSignal::BeginTest))
                        .collect();
                }
                Vec::new()
            }
            Body::PhasePrompt(PhaseSignal::Report { phase, epoch }) => {
                if phase != ReportedPhase::TestPassed || epoch != self.epoch {
                    return Vec::new();
                }
                self.passed.insert(from);
                self.maybe_settle(false)
            }
            Body::Abort { reason } => {
                self.failures.entry(from).or_insert(reason);
                self.maybe_settle(false)
            }
            _ => Vec::new(),
        }
    }

    /// Deadline check; a stalled instance is aborted with every silent
    /// participant named.
    pub fn time(&mut self, now_ms: u64) -> Vec<CoordinatorOutput> {
        if self.state == State::Settled || now_ms < self.deadline {
            return Vec::new();
        }
        let waiting_on: Vec<u16> = match self.state {
            State::AwaitCommitments => (1..=self.n)
                .filter(|j| !self.committed.contains(j))
                .collect(),
            State::AwaitResults => (1..=self.n)
                .filter(|j| !self.passed.contains(j) && !self.failures.contains_key(j))
                .collect(),
            State::Settled => Vec::new(),
        };
        for j in waiting_on {
            self.failures
                .entry(j)
                .or_insert_with(|| "timed out".to_string());
        }
        self.maybe_settle(true)
    }

    fn maybe_settle(&mut self, force: bool) -> Vec<CoordinatorOutput> {
        let resolved = self.passed.len() + self.failures.len();
        if !force && (self.state != State::AwaitResults || resolved < self.n as usize) {
            // During commitment collection a single abort is already final.
            if self.failures.is_empty() {
                return Vec::new();
            }
        }
        self.state = State::Settled;
        let mut outputs = Vec::new();
        if self.failures.is_empty() {
            for j in self.recipients() {
                outputs.push(self.prompt(j, PhaseSignal::Conclude { done: true }));
            }
            outputs.push(CoordinatorOutput::Settled(InstanceResult {
                outcome: Ok(()),
            }));
        } else {
            let reasons: Vec<(u16, String)> =
                self.failures.iter().map(|(&j, r)| (j, r.clone())).collect();
            let summary = reasons
                .iter()
                .map(|(j, r)| format!("{j}: {r}"))
                .collect::<Vec<_>>()
                .join("; ");
            for j in self.recipients() {
                outputs.push(CoordinatorOutput::Prompt {
                    to: j,
                    message: ProtocolMessage {
                        instance: self.instance,
                        body: Body::Abort {
                            reason: summary.clone(),
                        },
                    },
                });
            }
            outputs.push(CoordinatorOutput::Settled(InstanceResult {
                outcome: Err(reasons),
            }));
        }
        outputs
    }
}
