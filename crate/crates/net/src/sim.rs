//! Deterministic in-process simulation of a deployment.
//!
//! All nodes, the coordinator and public storage live in one process.
//! Frames travel through a single FIFO queue and are delivered one at a
//! time, so per-pair ordering matches a reliable transport exactly and a
//! fixed seed reproduces the run bit for bit. Participant pairs talk
//! through real [`SecureChannel`]s (the same framing and encryption the
//! TCP transport uses) while coordinator links carry plain frames.
//!
//! Time is virtual: whenever the queue drains without the instance
//! settling, the clock jumps forward and every party gets a time input,
//! which is how timeouts fire deterministically.

use std::collections::BTreeMap;
use std::collections::VecDeque;
use std::sync::Arc;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use tse_core::cipher::Ciphertext;
use tse_core::dkg::AbortReason;
use tse_core::group::{Group, GroupParams};

use crate::channel::{ChannelEvent, SecureChannel};
use crate::coordinator::{Coordinator, CoordinatorBehavior, CoordinatorOutput, InstanceResult};
use crate::identity::{LocalIdentity, Roster};
use crate::node::{
    Behavior, Node, NodeCommand, NodeConfig, NodeInput, NodeOutput, SessionError, SessionOutcome,
};
use crate::storage::PublicStorage;
use crate::trace::{MessageCounts, Trace, TraceEvent, TraceOutcome};
use crate::wire::{Body, InstanceMode, ProtocolMessage};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Endpoint {
    Node(u16),
    Coordinator,
}

impl Endpoint {
    fn label(&self) -> String {
        match self {
            Endpoint::Node(i) => format!("node-{i}"),
            Endpoint::Coordinator => "coordinator".to_string(),
        }
    }
}

struct Envelope {
    from: Endpoint,
    to: Endpoint,
    frame: Vec<u8>,
}

/// A captured wire frame, as an eavesdropper would see it.
#[derive(Clone, Debug)]
pub struct TappedFrame {
    pub from: Endpoint,
    pub to: Endpoint,
    pub bytes: Vec<u8>,
}

/// Mutates the nth frame matching (from, to) in transit.
pub struct FaultRule {
    pub from: u16,
    pub to: u16,
    pub nth: usize,
    pub flip_bit: usize,
    seen: usize,
    applied: bool,
}

impl FaultRule {
    pub fn new(from: u16, to: u16, nth: usize, flip_bit: usize) -> Self {
        Self {
            from,
            to,
            nth,
            flip_bit,
            seen: 0,
            applied: false,
        }
    }
}

/// One participant being brought back from persistent state.
pub struct RestoredMember<G: Group> {
    pub index: u16,
    pub static_secret: [u8; 32],
    pub instance: [u8; 16],
    pub keys: tse_core::dkg::KeyMaterial<G>,
}

#[derive(Clone, Debug)]
pub struct SimConfig {
    pub n: u16,
    pub k: u16,
    pub seed: u64,
    pub timeout_ms: u64,
    /// Per-node behavior, index 0 = participant 1. Missing entries are
    /// honest.
    pub behaviors: Vec<Behavior>,
    pub coordinator_behavior: CoordinatorBehavior,
    /// Keep the full event log (counts are always kept).
    pub record_events: bool,
    /// Which participants actually run; `None` means the full roster. An
    /// absent participant is simply unreachable.
    pub present: Option<Vec<u16>>,
}

impl SimConfig {
    pub fn honest(n: u16, k: u16, seed: u64) -> Self {
        Self {
            n,
            k,
            seed,
            timeout_ms: 2_000,
            behaviors: Vec::new(),
            coordinator_behavior: CoordinatorBehavior::default(),
            record_events: true,
            present: None,
        }
    }
}

struct Host<G: Group> {
    node: Node<G>,
    local: LocalIdentity,
    channels: BTreeMap<u16, SecureChannel>,
    rng: ChaCha20Rng,
    /// The node's verdict on the current instance, once settled.
    settled: Option<Result<u32, AbortReason>>,
}

pub struct SimNetwork<G: Group> {
    config: SimConfig,
    roster: Roster,
    group: GroupParams<G>,
    hosts: BTreeMap<u16, Host<G>>,
    coordinator: Option<Coordinator>,
    storage: Arc<PublicStorage>,
    queue: VecDeque<Envelope>,
    clock_ms: u64,
    seq: u64,
    epoch: u32,
    instance_result: Option<InstanceResult>,
    session_results: BTreeMap<u64, Result<SessionOutcome, SessionError>>,
    next_session: u64,
    rng: ChaCha20Rng,
    pub trace: Trace,
    taps: Vec<Arc<std::sync::Mutex<Vec<TappedFrame>>>>,
    faults: Vec<FaultRule>,
}

impl<G: Group> SimNetwork<G> {
    /// Builds the deployment: roster, storage, nodes and fully established
    /// pairwise channels.
    pub fn new(config: SimConfig) -> Self {
        Self::with_storage(config, Arc::new(PublicStorage::in_memory()))
    }

    pub fn with_storage(config: SimConfig, storage: Arc<PublicStorage>) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
        let n = config.n;

        let mut locals = Vec::with_capacity(n as usize);
        for j in 1..=n {
            let mut id = [0u8; 16];
            rng.fill_bytes(&mut id);
            let mut secret = [0u8; 32];
            rng.fill_bytes(&mut secret);
            locals.push(LocalIdentity::from_parts(
                id,
                format!("sim://node-{j}"),
                secret,
            ));
        }
        let roster = Roster::new(locals.iter().map(|l| l.identity.clone()).collect())
            .expect("random ids are unique");

        let mut h_seed = [0u8; 32];
        rng.fill_bytes(&mut h_seed);
        let group = GroupParams::<G>::derive(&h_seed);

        let present: Vec<u16> = config.present.clone().unwrap_or_else(|| (1..=n).collect());
        let mut hosts = BTreeMap::new();
        for j in 1..=n {
            let mut node_seed = [0u8; 32];
            rng.fill_bytes(&mut node_seed);
            let mut chan_seed = [0u8; 32];
            rng.fill_bytes(&mut chan_seed);
            if !present.contains(&j) {
                continue;
            }
            let behavior = config
                .behaviors
                .get((j - 1) as usize)
                .cloned()
                .unwrap_or_default();
            let node_config = NodeConfig {
                timeout_ms: config.timeout_ms,
                behavior,
            };
            hosts.insert(
                j,
                Host {
                    node: Node::new(
                        j,
                        config.k,
                        roster.clone(),
                        group.clone(),
                        Arc::clone(&storage),
                        node_config,
                        node_seed,
                    ),
                    local: locals[(j - 1) as usize].clone(),
                    channels: BTreeMap::new(),
                    rng: ChaCha20Rng::from_seed(chan_seed),
                    settled: None,
                },
            );
        }

        let trace = Trace::new(n, config.k, "instance", config.seed);
        let mut net = Self {
            config,
            roster,
            group,
            hosts,
            coordinator: None,
            storage,
            queue: VecDeque::new(),
            clock_ms: 0,
            seq: 0,
            epoch: 0,
            instance_result: None,
            session_results: BTreeMap::new(),
            next_session: 1,
            rng,
            trace,
            taps: Vec::new(),
            faults: Vec::new(),
        };
        net.establish_channels();
        net
    }

    /// Reconstitutes a deployment from persisted material: an existing
    /// roster, per-member static secrets and installed key material. Only
    /// the listed members are reachable.
    pub fn restore(
        k: u16,
        roster: Roster,
        group: GroupParams<G>,
        storage: Arc<PublicStorage>,
        members: Vec<RestoredMember<G>>,
        seed: u64,
        timeout_ms: u64,
    ) -> Self {
        let n = roster.len();
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let epoch = members
            .first()
            .map(|m| m.keys.share.epoch)
            .unwrap_or_default();
        let mut hosts = BTreeMap::new();
        for member in members {
            let identity = roster
                .by_index(member.index)
                .expect("member index in roster")
                .clone();
            let local = LocalIdentity {
                identity,
                static_secret: member.static_secret.into(),
            };
            let mut node_seed = [0u8; 32];
            rng.fill_bytes(&mut node_seed);
            let mut chan_seed = [0u8; 32];
            rng.fill_bytes(&mut chan_seed);
            let mut node = Node::new(
                member.index,
                k,
                roster.clone(),
                group.clone(),
                Arc::clone(&storage),
                NodeConfig {
                    timeout_ms,
                    behavior: Behavior::default(),
                },
                node_seed,
            );
            node.install(member.instance, member.keys);
            hosts.insert(
                member.index,
                Host {
                    node,
                    local,
                    channels: BTreeMap::new(),
                    rng: ChaCha20Rng::from_seed(chan_seed),
                    settled: None,
                },
            );
        }
        let config = SimConfig {
            n,
            k,
            seed,
            timeout_ms,
            behaviors: Vec::new(),
            coordinator_behavior: CoordinatorBehavior::default(),
            record_events: false,
            present: Some(hosts.keys().copied().collect()),
        };
        let trace = Trace::new(n, k, "restored", seed);
        let mut net = Self {
            config,
            roster,
            group,
            hosts,
            coordinator: None,
            storage,
            queue: VecDeque::new(),
            clock_ms: 0,
            seq: 0,
            epoch,
            instance_result: None,
            session_results: BTreeMap::new(),
            next_session: 1,
            rng,
            trace,
            taps: Vec::new(),
            faults: Vec::new(),
        };
        net.establish_channels();
        net
    }

    /// Runs the pairwise handshakes among present members; the lower index
    /// initiates.
    fn establish_channels(&mut self) {
        let members: Vec<u16> = self.hosts.keys().copied().collect();
        for (a, &i) in members.iter().enumerate() {
            for &j in &members[a + 1..] {
                let peer_j = self.roster.by_index(j).unwrap().clone();
                let peer_i = self.roster.by_index(i).unwrap().clone();
                let local_i = self.hosts[&i].local.clone();
                let local_j = self.hosts[&j].local.clone();
                let host_i = self.hosts.get_mut(&i).unwrap();
                let (chan_i, hello) = SecureChannel::initiate(local_i, peer_j, &mut host_i.rng);
                host_i.channels.insert(j, chan_i);
                let chan_j = SecureChannel::respond(local_j, peer_i);
                self.hosts.get_mut(&j).unwrap().channels.insert(i, chan_j);
                self.trace.counts.channel_frames += 1;
                self.push_frame(Endpoint::Node(i), Endpoint::Node(j), hello);
            }
        }
        self.drain_queue();
        for host in self.hosts.values() {
            for (peer, chan) in &host.channels {
                assert!(
                    chan.is_established(),
                    "channel to {peer} failed to establish"
                );
            }
        }
    }

    /// The pairwise-channel identity of a present member.
    pub fn local_identity(&self, index: u16) -> &LocalIdentity {
        &self.hosts[&index].local
    }

    pub fn group_params(&self) -> &GroupParams<G> {
        &self.group
    }

    pub fn roster(&self) -> &Roster {
        &self.roster
    }

    pub fn storage(&self) -> &Arc<PublicStorage> {
        &self.storage
    }

    pub fn counts(&self) -> MessageCounts {
        self.trace.counts.clone()
    }

    pub fn node(&self, index: u16) -> &Node<G> {
        &self.hosts[&index].node
    }

    pub fn set_offline(&mut self, index: u16, offline: bool) {
        self.hosts
            .get_mut(&index)
            .expect("present member")
            .node
            .set_offline(offline);
    }

    /// Harness access to one node's adversarial knobs mid-run.
    pub fn behavior_mut(&mut self, index: u16) -> &mut Behavior {
        self.hosts
            .get_mut(&index)
            .expect("present member")
            .node
            .behavior_mut()
    }

    pub fn install_tap(&mut self) -> Arc<std::sync::Mutex<Vec<TappedFrame>>> {
        let tap = Arc::new(std::sync::Mutex::new(Vec::new()));
        self.taps.push(Arc::clone(&tap));
        tap
    }

    pub fn inject_fault(&mut self, fault: FaultRule) {
        self.faults.push(fault);
    }

    pub fn current_epoch(&self) -> u32 {
        self.epoch
    }

    // ----- instance driving -------------------------------------------------

    /// Runs the trustless setup to completion.
    pub fn run_setup(&mut self) -> InstanceResult {
        self.run_instance(InstanceMode::Setup, 0)
    }

    /// Runs a proactive refresh of the current epoch.
    pub fn run_refresh(&mut self) -> InstanceResult {
        let next = self.epoch + 1;
        self.run_instance(InstanceMode::Refresh, next)
    }

    fn run_instance(&mut self, mode: InstanceMode, epoch: u32) -> InstanceResult {
        let mut instance = [0u8; 16];
        self.rng.fill_bytes(&mut instance);
        for host in self.hosts.values_mut() {
            host.settled = None;
        }
        self.instance_result = None;
        let mut coordinator = Coordinator::new(
            self.config.n,
            instance,
            epoch,
            mode,
            self.config.coordinator_behavior.clone(),
            self.config.timeout_ms,
        );
        let outputs = coordinator.start(self.clock_ms);
        self.coordinator = Some(coordinator);
        self.process_coordinator_outputs(outputs);
        self.run_to_settlement();

        let result = self.instance_result.clone().unwrap_or(InstanceResult {
            outcome: Err(vec![(0, "unresolved".to_string())]),
        });
        if result.outcome.is_ok() {
            self.epoch = epoch;
        }
        self.record_outcomes(&result);
        result
    }

    fn record_outcomes(&mut self, result: &InstanceResult) {
        self.trace.outcome = match &result.outcome {
            Ok(()) => TraceOutcome::Done,
            Err(reasons) => TraceOutcome::Aborted {
                reasons: reasons.iter().map(|(j, r)| format!("{j}: {r}")).collect(),
            },
        };
        if self.config.record_events {
            let seq = self.next_seq();
            for host in self.hosts.values() {
                let outcome = match &host.settled {
                    Some(Ok(epoch)) => format!("done(epoch {epoch})"),
                    Some(Err(reason)) => format!("aborted: {reason}"),
                    None => "unsettled".to_string(),
                };
                self.trace.events.push(TraceEvent::Outcome {
                    seq,
                    node: host.node.index(),
                    outcome,
                });
            }
        }
    }

    /// Processes queued frames, advancing virtual time when the queue
    /// drains, until the instance settles or nothing can make progress.
    fn run_to_settlement(&mut self) {
        loop {
            self.drain_queue();
            if self.instance_result.is_some() {
                return;
            }
            if !self.advance_time() {
                return;
            }
        }
    }

    fn drain_queue(&mut self) {
        while let Some(envelope) = self.queue.pop_front() {
            self.deliver(envelope);
        }
    }

    /// Jumps the clock past the earliest deadline and delivers time to
    /// every party. Returns false if no further progress is possible.
    fn advance_time(&mut self) -> bool {
        self.clock_ms += self.config.timeout_ms + 1;
        let now = self.clock_ms;
        let members: Vec<u16> = self.hosts.keys().copied().collect();
        for idx in members {
            let outputs = self
                .hosts
                .get_mut(&idx)
                .expect("present")
                .node
                .handle(NodeInput::Time { now_ms: now });
            self.process_node_outputs(idx, outputs);
        }
        if let Some(mut coordinator) = self.coordinator.take() {
            let outputs = coordinator.time(now);
            self.coordinator = Some(coordinator);
            self.process_coordinator_outputs(outputs);
        }
        !self.queue.is_empty() || self.instance_result.is_some()
    }

    // ----- sessions ---------------------------------------------------------

    /// Runs a threshold encryption session from `initiator` with the given
    /// responder quorum.
    pub fn encrypt(
        &mut self,
        initiator: u16,
        quorum: &[u16],
        plaintext: &[u8],
    ) -> Result<Ciphertext, SessionError> {
        let session = self.next_session;
        self.next_session += 1;
        let cmd = NodeCommand::Encrypt {
            session,
            plaintext: plaintext.to_vec(),
            quorum: quorum.to_vec(),
        };
        match self.run_session(initiator, session, cmd)? {
            SessionOutcome::Encrypted(ct) => Ok(ct),
            SessionOutcome::Decrypted(_) => unreachable!("encrypt returned plaintext"),
        }
    }

    pub fn decrypt(
        &mut self,
        initiator: u16,
        quorum: &[u16],
        ciphertext: &Ciphertext,
    ) -> Result<Vec<u8>, SessionError> {
        let session = self.next_session;
        self.next_session += 1;
        let cmd = NodeCommand::Decrypt {
            session,
            ciphertext: ciphertext.clone(),
            quorum: quorum.to_vec(),
        };
        match self.run_session(initiator, session, cmd)? {
            SessionOutcome::Decrypted(m) => Ok(m),
            SessionOutcome::Encrypted(_) => unreachable!("decrypt returned ciphertext"),
        }
    }

    fn run_session(
        &mut self,
        initiator: u16,
        session: u64,
        cmd: NodeCommand,
    ) -> Result<SessionOutcome, SessionError> {
        let outputs = self
            .hosts
            .get_mut(&initiator)
            .expect("initiator present")
            .node
            .handle(NodeInput::Command(cmd));
        self.process_node_outputs(initiator, outputs);
        loop {
            self.drain_queue();
            if let Some(result) = self.session_results.remove(&session) {
                return result;
            }
            self.clock_ms += self.config.timeout_ms + 1;
            let now = self.clock_ms;
            let members: Vec<u16> = self.hosts.keys().copied().collect();
            for idx in members {
                let outputs = self
                    .hosts
                    .get_mut(&idx)
                    .expect("present")
                    .node
                    .handle(NodeInput::Time { now_ms: now });
                self.process_node_outputs(idx, outputs);
            }
            if let Some(result) = self.session_results.remove(&session) {
                return result;
            }
            if self.queue.is_empty() {
                return Err(SessionError::Timeout(0));
            }
        }
    }

    // ----- delivery ---------------------------------------------------------

    fn next_seq(&mut self) -> u64 {
        self.seq += 1;
        self.seq
    }

    fn push_frame(&mut self, from: Endpoint, to: Endpoint, frame: Vec<u8>) {
        self.queue.push_back(Envelope { from, to, frame });
    }

    fn count_protocol_message(&mut self, from: Endpoint, to: Endpoint, body: &Body, bytes: usize) {
        match body {
            Body::DealShare { .. } => self.trace.counts.deal_messages += 1,
            Body::EvalRequest { .. } => self.trace.counts.eval_requests += 1,
            Body::EvalResponse { .. } => self.trace.counts.eval_responses += 1,
            Body::CommitmentPosted { .. } | Body::PhasePrompt(_) | Body::Abort { .. } => {
                self.trace.counts.coordination += 1
            }
        }
        if self.config.record_events {
            let seq = self.next_seq();
            self.trace.events.push(TraceEvent::Message {
                seq,
                from: from.label(),
                to: to.label(),
                kind: body.kind_name().to_string(),
                bytes,
            });
        }
    }

    fn process_node_outputs(&mut self, from_idx: u16, outputs: Vec<NodeOutput>) {
        for output in outputs {
            match output {
                NodeOutput::Send { to, message } => {
                    let bytes = message.encode();
                    self.count_protocol_message(
                        Endpoint::Node(from_idx),
                        Endpoint::Node(to),
                        &message.body,
                        bytes.len(),
                    );
                    let frame = if to == from_idx {
                        // Loopback: same message path, no channel crypto.
                        Some(bytes)
                    } else {
                        let host = self.hosts.get_mut(&from_idx).expect("sender present");
                        // Sends to absent members go nowhere, like any
                        // unreachable peer.
                        host.channels
                            .get_mut(&to)
                            .map(|chan| chan.seal(&bytes).expect("channel established"))
                    };
                    if let Some(frame) = frame {
                        self.push_frame(Endpoint::Node(from_idx), Endpoint::Node(to), frame);
                    }
                }
                NodeOutput::Notify { message } => {
                    let bytes = message.encode();
                    self.count_protocol_message(
                        Endpoint::Node(from_idx),
                        Endpoint::Coordinator,
                        &message.body,
                        bytes.len(),
                    );
                    self.push_frame(Endpoint::Node(from_idx), Endpoint::Coordinator, bytes);
                }
                NodeOutput::Post(record) => {
                    self.trace.counts.commitment_posts +=
                        matches!(record.key.kind, crate::storage::RecordKind::Commitment) as u64;
                    if self.config.record_events {
                        let seq = self.next_seq();
                        self.trace.events.push(TraceEvent::StoragePost {
                            seq,
                            node: from_idx,
                            kind: format!("{:?}", record.key.kind),
                        });
                    }
                    // The instance gates on commitment visibility, so a
                    // duplicate means a retried epoch; surface loudly.
                    self.storage.append(record).expect("storage append");
                }
                NodeOutput::PhaseChanged(phase) => {
                    if self.config.record_events {
                        let seq = self.next_seq();
                        self.trace.events.push(TraceEvent::Phase {
                            seq,
                            node: from_idx,
                            phase: format!("{phase:?}"),
                        });
                    }
                }
                NodeOutput::InstanceSettled { outcome } => {
                    self.hosts.get_mut(&from_idx).expect("present").settled = Some(outcome);
                }
                NodeOutput::SessionResult { session, result } => {
                    self.session_results.insert(session, result);
                }
            }
        }
    }

    fn process_coordinator_outputs(&mut self, outputs: Vec<CoordinatorOutput>) {
        for output in outputs {
            match output {
                CoordinatorOutput::Prompt { to, message } => {
                    let bytes = message.encode();
                    self.count_protocol_message(
                        Endpoint::Coordinator,
                        Endpoint::Node(to),
                        &message.body,
                        bytes.len(),
                    );
                    self.push_frame(Endpoint::Coordinator, Endpoint::Node(to), bytes);
                }
                CoordinatorOutput::Settled(result) => {
                    self.instance_result = Some(result);
                }
            }
        }
    }

    fn apply_faults(&mut self, from: Endpoint, to: Endpoint, frame: &mut [u8]) {
        if let (Endpoint::Node(f), Endpoint::Node(t)) = (from, to) {
            for fault in &mut self.faults {
                if fault.applied || fault.from != f || fault.to != t {
                    continue;
                }
                if fault.seen == fault.nth && !frame.is_empty() {
                    let bit = fault.flip_bit % (frame.len() * 8);
                    frame[bit / 8] ^= 1 << (bit % 8);
                    fault.applied = true;
                }
                fault.seen += 1;
            }
        }
    }

    fn deliver(&mut self, envelope: Envelope) {
        let Envelope {
            from,
            to,
            mut frame,
        } = envelope;
        for tap in &self.taps {
            tap.lock().expect("tap poisoned").push(TappedFrame {
                from,
                to,
                bytes: frame.clone(),
            });
        }
        self.apply_faults(from, to, &mut frame);
        match (from, to) {
            (Endpoint::Coordinator, Endpoint::Coordinator) => {}
            (Endpoint::Coordinator, Endpoint::Node(idx)) => {
                let Ok(message) = ProtocolMessage::decode(&frame) else {
                    return;
                };
                let Some(host) = self.hosts.get_mut(&idx) else {
                    return;
                };
                let outputs = host.node.handle(NodeInput::Coordinator { message });
                self.process_node_outputs(idx, outputs);
            }
            (Endpoint::Node(idx), Endpoint::Coordinator) => {
                let Ok(message) = ProtocolMessage::decode(&frame) else {
                    return;
                };
                if let Some(mut coordinator) = self.coordinator.take() {
                    let outputs = coordinator.handle(idx, message, self.clock_ms);
                    self.coordinator = Some(coordinator);
                    self.process_coordinator_outputs(outputs);
                }
            }
            (Endpoint::Node(sender), Endpoint::Node(receiver)) => {
                if sender == receiver {
                    let Ok(message) = ProtocolMessage::decode(&frame) else {
                        return;
                    };
                    let Some(host) = self.hosts.get_mut(&receiver) else {
                        return;
                    };
                    let outputs = host.node.handle(NodeInput::Peer {
                        from: sender,
                        message,
                    });
                    self.process_node_outputs(receiver, outputs);
                    return;
                }
                let Some(host) = self.hosts.get_mut(&receiver) else {
                    return;
                };
                let events = {
                    let chan = host.channels.get_mut(&sender).expect("mesh is complete");
                    match chan.on_frame(&frame, &mut host.rng) {
                        Ok(events) => events,
                        // A tampered frame is detected and dropped; the
                        // payload never reaches the node.
                        Err(_) => return,
                    }
                };
                for event in events {
                    match event {
                        ChannelEvent::Send(reply) => {
                            self.trace.counts.channel_frames += 1;
                            self.push_frame(
                                Endpoint::Node(receiver),
                                Endpoint::Node(sender),
                                reply,
                            );
                        }
                        ChannelEvent::Established => {}
                        ChannelEvent::Message(bytes) => {
                            let Ok(message) = ProtocolMessage::decode(&bytes) else {
                                continue;
                            };
                            let outputs = self
                                .hosts
                                .get_mut(&receiver)
                                .expect("checked above")
                                .node
                                .handle(NodeInput::Peer {
                                    from: sender,
                                    message,
                                });
                            self.process_node_outputs(receiver, outputs);
                        }
                    }
                }
            }
        }
    }
}
