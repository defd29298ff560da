//! The participant node.
//!
//! A node owns one protocol identity and processes protocol messages
//! sequentially, sans-io: every input produces a list of outputs (messages
//! to send, storage records to post, results to surface) that the driver,
//! either the in-process simulator or the TCP runner, executes. No other
//! state is shared between nodes except the append-only public storage.
//!
//! Setup and refresh instances wrap a [`SetupTranscript`]; encryption and
//! decryption sessions collect proven partial evaluations from a chosen
//! quorum and finish locally. Misbehavior for the adversarial scenarios is
//! injected through [`Behavior`]; an honest node uses the default.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

use tse_core::cipher::{
    decrypt_finalize, dprf_input, encrypt_commit, encrypt_finalize, CipherError, Ciphertext,
};
use tse_core::commit::{HashCommitment, PedersenCommitment};
use tse_core::dkg::{AbortReason, DkgSuccess, InstanceParams, KeyMaterial, Phase, SetupTranscript};
use tse_core::dprf::{ssnpr_combine, PartialEval};
use tse_core::group::{Group, GroupParams};
use tse_core::sharing::Polynomial;

use crate::identity::Roster;
use crate::storage::{PublicParamsRecord, PublicStorage, Record, RecordKey, RecordKind};
use crate::wire::{
    Body, EvalOutcome, EvalPurpose, InstanceMode, PhaseSignal, ProtocolMessage, RefusalCode,
    ReportedPhase,
};

/// Which proof field a misbehaving responder corrupts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TamperField {
    H,
    C,
    U,
    UPrime,
    Issuer,
}

/// Adversarial knobs for the simulation harness. All defaults are honest.
#[derive(Clone, Debug, Default)]
pub struct Behavior {
    /// Deal with this polynomial degree instead of `k - 1`.
    pub deal_degree_override: Option<u16>,
    /// Deal a zero secret during setup.
    pub deal_zero_secret: bool,
    /// Deal a random (nonzero) secret during refresh.
    pub refresh_nonzero_secret: bool,
    /// Corrupt one field of every test-phase evaluation this node issues.
    pub tamper_test_eval: Option<TamperField>,
    /// Corrupt one field of every use-phase evaluation this node issues.
    pub tamper_use_eval: Option<TamperField>,
    /// Answer evaluation requests on a modified input.
    pub wrong_eval_input: bool,
    /// Drop every input (node is unreachable).
    pub offline: bool,
}

#[derive(Clone, Debug)]
pub struct NodeConfig {
    /// Deadline for every waiting state, in milliseconds of driver time.
    pub timeout_ms: u64,
    pub behavior: Behavior,
}

impl Default for NodeConfig {
    fn default() -> Self {
        Self {
            timeout_ms: 2_000,
            behavior: Behavior::default(),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SessionError {
    #[error("no responder for participant {0} in time")]
    Timeout(u16),
    #[error("partial evaluation from participant {0} rejected")]
    ProofRejected(u16),
    #[error("participant {peer} refused: {code:?}")]
    Refused { peer: u16, code: RefusalCode },
    #[error("recovered plaintext does not open the commitment")]
    CommitmentMismatch,
    #[error("this node holds no established keys")]
    NoKeys,
    #[error("quorum of {got} is below the threshold {need}")]
    QuorumTooSmall { need: u16, got: u16 },
    #[error("cipher failure: {0}")]
    Cipher(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SessionOutcome {
    Encrypted(Ciphertext),
    Decrypted(Vec<u8>),
}

#[derive(Clone, Debug)]
pub enum NodeCommand {
    Encrypt {
        session: u64,
        plaintext: Vec<u8>,
        quorum: Vec<u16>,
    },
    Decrypt {
        session: u64,
        ciphertext: Ciphertext,
        quorum: Vec<u16>,
    },
}

#[derive(Debug)]
pub enum NodeInput {
    /// A decrypted protocol message from another participant.
    Peer {
        from: u16,
        message: ProtocolMessage,
    },
    /// A message from the (untrusted) coordinator link.
    Coordinator {
        message: ProtocolMessage,
    },
    Command(NodeCommand),
    /// Driver clock. Nodes only observe time through these inputs.
    Time {
        now_ms: u64,
    },
}

#[derive(Debug)]
pub enum NodeOutput {
    Send {
        to: u16,
        message: ProtocolMessage,
    },
    Notify {
        message: ProtocolMessage,
    },
    Post(Record),
    PhaseChanged(Phase),
    InstanceSettled {
        outcome: Result<u32, AbortReason>,
    },
    SessionResult {
        session: u64,
        result: Result<SessionOutcome, SessionError>,
    },
}

/// Established key material bound to its instance.
#[derive(Clone, Debug)]
struct Deployment<G: Group> {
    instance: [u8; 16],
    keys: KeyMaterial<G>,
}

struct DkgRun<G: Group> {
    transcript: SetupTranscript<G>,
    mode: InstanceMode,
    /// Request id for this node's own test challenge.
    test_request: u64,
    pending_success: Option<DkgSuccess<G>>,
    settled: bool,
    deadline: u64,
}

enum SessionKind {
    Encrypt {
        plaintext: Vec<u8>,
        rho: [u8; 32],
        alpha: HashCommitment,
    },
    Decrypt {
        ciphertext: Ciphertext,
    },
}

struct Session<G: Group> {
    kind: SessionKind,
    x: Vec<u8>,
    quorum: Vec<u16>,
    partials: BTreeMap<u16, PartialEval<G>>,
    deadline: u64,
}

pub struct Node<G: Group> {
    index: u16,
    /// Deployment threshold `k`, fixed configuration like the roster.
    threshold: u16,
    roster: Roster,
    group: GroupParams<G>,
    config: NodeConfig,
    storage: Arc<PublicStorage>,
    rng: ChaCha20Rng,
    now_ms: u64,
    current: Option<Deployment<G>>,
    dkg: Option<DkgRun<G>>,
    sessions: BTreeMap<u64, Session<G>>,
    /// Test evaluation requests that arrived before this node reached the
    /// testing phase.
    buffered_tests: Vec<(u16, u64, Vec<u8>)>,
    /// Deals that arrived before the coordinator's start prompt.
    buffered_deals: Vec<(u16, [u8; 16], u32, Vec<u8>)>,
    next_request: u64,
}

impl<G: Group> Node<G> {
    pub fn new(
        index: u16,
        threshold: u16,
        roster: Roster,
        group: GroupParams<G>,
        storage: Arc<PublicStorage>,
        config: NodeConfig,
        rng_seed: [u8; 32],
    ) -> Self {
        Self {
            index,
            threshold,
            roster,
            group,
            config,
            storage,
            rng: ChaCha20Rng::from_seed(rng_seed),
            now_ms: 0,
            current: None,
            dkg: None,
            sessions: BTreeMap::new(),
            buffered_tests: Vec::new(),
            buffered_deals: Vec::new(),
            next_request: 1,
        }
    }

    pub fn index(&self) -> u16 {
        self.index
    }

    pub fn set_offline(&mut self, offline: bool) {
        self.config.behavior.offline = offline;
    }

    /// Harness access to the adversarial knobs mid-run.
    pub fn behavior_mut(&mut self) -> &mut Behavior {
        &mut self.config.behavior
    }

    /// Established key material, exposed for harness assertions.
    pub fn key_material(&self) -> Option<&KeyMaterial<G>> {
        self.current.as_ref().map(|d| &d.keys)
    }

    /// Installs previously established key material, e.g. when a node is
    /// reconstituted from its key store.
    pub fn install(&mut self, instance: [u8; 16], keys: KeyMaterial<G>) {
        self.current = Some(Deployment { instance, keys });
    }

    pub fn current_instance(&self) -> Option<[u8; 16]> {
        self.current.as_ref().map(|d| d.instance)
    }

    pub fn dkg_phase(&self) -> Option<Phase> {
        self.dkg.as_ref().map(|r| r.transcript.phase())
    }

    /// The public parameters record this node would publish; used to check
    /// that every participant reporting success holds the same view.
    pub fn params_record(&self) -> Option<PublicParamsRecord> {
        let dep = self.current.as_ref()?;
        Some(PublicParamsRecord {
            group_id: G::ID.to_string(),
            hash_suite: G::HASH_SUITE.to_string(),
            order: G::order().to_bytes_be(),
            k: self.threshold,
            n: self.roster.len(),
            epoch: dep.keys.share.epoch,
            h_seed: self.group.h_seed.clone(),
            roster: self.roster.clone(),
        })
    }

    pub fn handle(&mut self, input: NodeInput) -> Vec<NodeOutput> {
        if self.config.behavior.offline {
            return Vec::new();
        }
        match input {
            NodeInput::Peer { from, message } => self.handle_peer(from, message),
            NodeInput::Coordinator { message } => self.handle_coordinator(message),
            NodeInput::Command(cmd) => self.handle_command(cmd),
            NodeInput::Time { now_ms } => self.handle_time(now_ms),
        }
    }

    // ----- coordinator prompts -------------------------------------------

    fn handle_coordinator(&mut self, message: ProtocolMessage) -> Vec<NodeOutput> {
        match message.body {
            Body::PhasePrompt(PhaseSignal::Start { mode, epoch }) => {
                self.start_instance(message.instance, mode, epoch)
            }
            Body::PhasePrompt(PhaseSignal::BeginTest) => self.begin_test(message.instance),
            Body::PhasePrompt(PhaseSignal::Conclude { done }) => {
                self.conclude(message.instance, done)
            }
            Body::Abort { reason } => self.coordinator_abort(message.instance, reason),
            // The coordinator holds no keys and cannot request evaluations.
            _ => Vec::new(),
        }
    }

    fn start_instance(
        &mut self,
        instance: [u8; 16],
        mode: InstanceMode,
        epoch: u32,
    ) -> Vec<NodeOutput> {
        if self.dkg.is_some() {
            return Vec::new();
        }
        let n = self.roster.len();
        let params = InstanceParams {
            group: self.group.clone(),
            k: self.threshold,
            n,
            instance,
            roster_ids: self.roster.ids(),
            epoch,
        };
        let transcript = match mode {
            InstanceMode::Setup => {
                if epoch != 0 || self.current.is_some() {
                    return Vec::new();
                }
                SetupTranscript::new_setup(params, self.index)
            }
            InstanceMode::Refresh => {
                let Some(dep) = &self.current else {
                    return Vec::new();
                };
                SetupTranscript::new_refresh(params, self.index, dep.keys.clone())
            }
        };
        let mut transcript = match transcript {
            Ok(t) => t,
            Err(_) => return Vec::new(),
        };

        // Deal, honoring the adversarial knobs.
        let b = &self.config.behavior;
        let k = transcript.params().k;
        let degree = b.deal_degree_override.unwrap_or(k - 1) as usize;
        let secret = match (mode, b.deal_zero_secret, b.refresh_nonzero_secret) {
            (InstanceMode::Setup, true, _) => G::scalar_zero(),
            (InstanceMode::Setup, false, _) => {
                tse_core::group::random_scalar::<G, _>(&mut self.rng)
            }
            (InstanceMode::Refresh, _, true) => {
                tse_core::group::random_scalar::<G, _>(&mut self.rng)
            }
            (InstanceMode::Refresh, _, false) => G::scalar_zero(),
        };
        let poly = Polynomial::<G>::random(secret, degree, &mut self.rng);
        let shares = match transcript.deal_with_polynomial(&poly) {
            Ok(s) => s,
            Err(_) => return Vec::new(),
        };

        let mut outputs = vec![NodeOutput::PhaseChanged(Phase::Dealing)];
        for j in 1..=n {
            if j == self.index {
                continue;
            }
            outputs.push(NodeOutput::Send {
                to: j,
                message: ProtocolMessage {
                    instance,
                    body: Body::DealShare {
                        epoch,
                        value: G::scalar_encode(shares.share_for(j).expect("share exists")),
                    },
                },
            });
        }
        self.dkg = Some(DkgRun {
            transcript,
            mode,
            test_request: 0,
            pending_success: None,
            settled: false,
            deadline: self.now_ms + self.config.timeout_ms,
        });

        // Replay deals that beat the prompt here.
        let buffered: Vec<_> = std::mem::take(&mut self.buffered_deals);
        for (from, deal_instance, deal_epoch, value) in buffered {
            if deal_instance == instance {
                outputs.extend(self.record_deal(from, deal_epoch, value));
            }
        }
        outputs
    }

    fn begin_test(&mut self, instance: [u8; 16]) -> Vec<NodeOutput> {
        let Some(run) = self.dkg.as_mut() else {
            return Vec::new();
        };
        if run.transcript.params().instance != instance
            || run.transcript.phase() != Phase::Committing
        {
            // Premature or stale prompt; the deadline will handle a stall.
            return Vec::new();
        }
        let epoch = run.transcript.params().epoch;

        // Load every published commitment for this instance and epoch.
        let records = self.storage.list(&instance, RecordKind::Commitment, epoch);
        for record in records {
            let Ok(gamma) = G::element_decode(&record.value) else {
                continue;
            };
            let _ = run
                .transcript
                .record_commitment(record.key.issuer, PedersenCommitment { gamma });
        }
        if !run.transcript.commitments_complete() {
            return Vec::new();
        }
        let challenge = match run.transcript.begin_test(&mut self.rng) {
            Ok(c) => c,
            Err(_) => return Vec::new(),
        };
        let request = self.next_request;
        self.next_request += 1;
        run.test_request = request;
        run.deadline = self.now_ms + self.config.timeout_ms;
        let purpose = match run.mode {
            InstanceMode::Setup => EvalPurpose::SetupTest,
            InstanceMode::Refresh => EvalPurpose::RefreshTest,
        };

        let mut outputs = vec![NodeOutput::PhaseChanged(Phase::Testing)];
        // Every participant is asked, this node included, through the same
        // message path.
        for j in 1..=self.roster.len() {
            outputs.push(NodeOutput::Send {
                to: j,
                message: ProtocolMessage {
                    instance,
                    body: Body::EvalRequest {
                        id: request,
                        purpose,
                        epoch,
                        x: challenge.x.clone(),
                    },
                },
            });
        }
        // Answer test requests from peers that reached the test phase
        // before this node did.
        let buffered: Vec<_> = std::mem::take(&mut self.buffered_tests);
        for (from, id, x) in buffered {
            outputs.extend(self.answer_test_request(from, id, x));
        }
        outputs
    }

    fn conclude(&mut self, instance: [u8; 16], done: bool) -> Vec<NodeOutput> {
        let Some(run) = self.dkg.as_mut() else {
            return Vec::new();
        };
        if run.transcript.params().instance != instance {
            return Vec::new();
        }
        let mut outputs = Vec::new();
        if done {
            if let Some(success) = run.pending_success.take() {
                let epoch = success.keys.share.epoch;
                // Install the new epoch; prior key material is dropped.
                self.current = Some(Deployment {
                    instance,
                    keys: success.keys,
                });
                run.settled = true;
                outputs.push(NodeOutput::PhaseChanged(Phase::Done));
                outputs.push(NodeOutput::InstanceSettled { outcome: Ok(epoch) });
                if self.index == 1 {
                    if let Some(record) = self.params_record() {
                        outputs.push(NodeOutput::Post(Record {
                            key: RecordKey {
                                instance,
                                kind: RecordKind::PublicParams,
                                epoch,
                                issuer: self.index,
                            },
                            value: record.encode(),
                        }));
                    }
                }
                self.dkg = None;
                self.buffered_tests.clear();
                self.buffered_deals.clear();
                return outputs;
            }
            // A coordinator claiming success this node never observed
            // cannot make it install keys.
            return Vec::new();
        }
        outputs.extend(self.abort_instance(AbortReason::Timeout(0), false));
        outputs
    }

    fn coordinator_abort(&mut self, instance: [u8; 16], _reason: String) -> Vec<NodeOutput> {
        let Some(run) = self.dkg.as_ref() else {
            return Vec::new();
        };
        if run.transcript.params().instance != instance {
            return Vec::new();
        }
        self.abort_instance(AbortReason::Timeout(0), false)
    }

    // ----- peer messages --------------------------------------------------

    fn handle_peer(&mut self, from: u16, message: ProtocolMessage) -> Vec<NodeOutput> {
        if from == 0 || from > self.roster.len() {
            return Vec::new();
        }
        match message.body {
            Body::DealShare { epoch, value } => match &self.dkg {
                Some(run) if run.transcript.params().instance == message.instance => {
                    self.record_deal(from, epoch, value)
                }
                Some(_) => Vec::new(),
                None => {
                    self.buffered_deals
                        .push((from, message.instance, epoch, value));
                    Vec::new()
                }
            },
            Body::EvalRequest {
                id,
                purpose,
                epoch,
                x,
            } => match purpose {
                EvalPurpose::SetupTest | EvalPurpose::RefreshTest => {
                    self.handle_test_request(from, message.instance, id, x)
                }
                EvalPurpose::Use => self.handle_use_request(from, message.instance, id, epoch, x),
            },
            Body::EvalResponse { id, outcome } => self.handle_eval_response(from, id, outcome),
            // Deal acknowledgements and prompts only flow on the
            // coordinator link.
            _ => Vec::new(),
        }
    }

    fn record_deal(&mut self, from: u16, epoch: u32, value: Vec<u8>) -> Vec<NodeOutput> {
        let Some(run) = self.dkg.as_mut() else {
            return Vec::new();
        };
        if run.transcript.params().epoch != epoch || run.transcript.phase() != Phase::Dealing {
            return Vec::new();
        }
        let Ok(scalar) = G::scalar_decode(&value) else {
            return Vec::new();
        };
        if run.transcript.record_deal(from, scalar).is_err() {
            return Vec::new();
        }
        if !run.transcript.deals_complete() {
            return Vec::new();
        }
        let instance = run.transcript.params().instance;
        let (share, gamma) = match run.transcript.aggregate(&mut self.rng) {
            Ok(v) => v,
            Err(_) => return Vec::new(),
        };
        run.deadline = self.now_ms + self.config.timeout_ms;
        vec![
            NodeOutput::PhaseChanged(Phase::Committing),
            NodeOutput::Post(Record {
                key: RecordKey {
                    instance,
                    kind: RecordKind::Commitment,
                    epoch: share.epoch,
                    issuer: self.index,
                },
                value: G::element_encode(&gamma.gamma),
            }),
            NodeOutput::Notify {
                message: ProtocolMessage {
                    instance,
                    body: Body::CommitmentPosted {
                        index: self.index,
                        epoch: share.epoch,
                    },
                },
            },
        ]
    }

    fn handle_test_request(
        &mut self,
        from: u16,
        instance: [u8; 16],
        id: u64,
        x: Vec<u8>,
    ) -> Vec<NodeOutput> {
        match &self.dkg {
            Some(run) if run.transcript.params().instance == instance => {
                match run.transcript.phase() {
                    Phase::Testing => self.answer_test_request(from, id, x),
                    Phase::Committing | Phase::Dealing => {
                        // All commitments must be visible here before any
                        // test evaluation is answered.
                        self.buffered_tests.push((from, id, x));
                        Vec::new()
                    }
                    _ => self.refuse(from, instance, id, RefusalCode::NotReady),
                }
            }
            _ => self.refuse(from, instance, id, RefusalCode::NotReady),
        }
    }

    fn answer_test_request(&mut self, from: u16, id: u64, x: Vec<u8>) -> Vec<NodeOutput> {
        let Some(run) = self.dkg.as_ref() else {
            return Vec::new();
        };
        let instance = run.transcript.params().instance;
        let evaluated = if self.config.behavior.wrong_eval_input {
            let mut wrong = x.clone();
            wrong.extend_from_slice(b"/wrong");
            run.transcript.answer_test_request(&wrong, &mut self.rng)
        } else {
            run.transcript.answer_test_request(&x, &mut self.rng)
        };
        let (mut fresh, mut old) = match evaluated {
            Ok(v) => v,
            Err(_) => return self.refuse(from, instance, id, RefusalCode::NotReady),
        };
        if let Some(field) = self.config.behavior.tamper_test_eval {
            tamper_partial::<G>(&mut fresh, field);
            if let Some(old) = old.as_mut() {
                tamper_partial::<G>(old, field);
            }
        }
        let mut parts = vec![fresh.encode()];
        if let Some(old) = old {
            parts.push(old.encode());
        }
        vec![NodeOutput::Send {
            to: from,
            message: ProtocolMessage {
                instance,
                body: Body::EvalResponse {
                    id,
                    outcome: EvalOutcome::Partials(parts),
                },
            },
        }]
    }

    fn handle_use_request(
        &mut self,
        from: u16,
        instance: [u8; 16],
        id: u64,
        epoch: u32,
        x: Vec<u8>,
    ) -> Vec<NodeOutput> {
        let Some(dep) = &self.current else {
            return self.refuse(from, instance, id, RefusalCode::NotReady);
        };
        if dep.instance != instance || dep.keys.share.epoch != epoch {
            return self.refuse(from, instance, id, RefusalCode::WrongEpoch);
        }
        let keys = dep.keys.clone();
        let gamma = keys.gammas[&self.index].clone();
        let input = if self.config.behavior.wrong_eval_input {
            let mut wrong = x.clone();
            wrong.extend_from_slice(b"/wrong");
            wrong
        } else {
            x
        };
        let mut partial = tse_core::dprf::ssnpr_evaluate(
            &self.group,
            &keys.share.value,
            &keys.rand,
            &gamma,
            self.index,
            &input,
            &mut self.rng,
        );
        if let Some(field) = self.config.behavior.tamper_use_eval {
            tamper_partial::<G>(&mut partial, field);
        }
        vec![NodeOutput::Send {
            to: from,
            message: ProtocolMessage {
                instance,
                body: Body::EvalResponse {
                    id,
                    outcome: EvalOutcome::Partials(vec![partial.encode()]),
                },
            },
        }]
    }

    fn refuse(&self, to: u16, instance: [u8; 16], id: u64, code: RefusalCode) -> Vec<NodeOutput> {
        vec![NodeOutput::Send {
            to,
            message: ProtocolMessage {
                instance,
                body: Body::EvalResponse {
                    id,
                    outcome: EvalOutcome::Refused(code),
                },
            },
        }]
    }

    fn handle_eval_response(
        &mut self,
        from: u16,
        id: u64,
        outcome: EvalOutcome,
    ) -> Vec<NodeOutput> {
        // Test responses for the active instance.
        if let Some(run) = self.dkg.as_mut() {
            if run.test_request == id && run.transcript.phase() == Phase::Testing {
                let parts = match outcome {
                    EvalOutcome::Partials(parts) => parts,
                    EvalOutcome::Refused(_) => {
                        return self.abort_instance(AbortReason::Timeout(from), true);
                    }
                };
                let expect_old = matches!(run.mode, InstanceMode::Refresh);
                let fresh = parts.first().and_then(|b| PartialEval::<G>::decode(b).ok());
                let old = parts.get(1).and_then(|b| PartialEval::<G>::decode(b).ok());
                let Some(fresh) = fresh else {
                    return self.abort_instance(AbortReason::ProofRejected(from), true);
                };
                if expect_old && old.is_none() {
                    return self.abort_instance(AbortReason::ProofRejected(from), true);
                }
                if run
                    .transcript
                    .record_test_response(from, fresh, old)
                    .is_err()
                {
                    return Vec::new();
                }
                if !run.transcript.responses_complete() {
                    return Vec::new();
                }
                let instance = run.transcript.params().instance;
                let epoch = run.transcript.params().epoch;
                return match run.transcript.finalize() {
                    Ok(success) => {
                        run.pending_success = Some(success);
                        run.deadline = self.now_ms + self.config.timeout_ms;
                        vec![NodeOutput::Notify {
                            message: ProtocolMessage {
                                instance,
                                body: Body::PhasePrompt(PhaseSignal::Report {
                                    phase: ReportedPhase::TestPassed,
                                    epoch,
                                }),
                            },
                        }]
                    }
                    Err(reason) => self.abort_instance(reason, true),
                };
            }
        }
        // Otherwise this answers an encryption or decryption session.
        self.handle_session_response(from, id, outcome)
    }

    // ----- sessions -------------------------------------------------------

    fn handle_command(&mut self, cmd: NodeCommand) -> Vec<NodeOutput> {
        match cmd {
            NodeCommand::Encrypt {
                session,
                plaintext,
                quorum,
            } => self.start_session(session, quorum, |node, session_id| {
                let (alpha, rho, _digest) = encrypt_commit(&plaintext, &mut node.rng)
                    .map_err(|e| SessionError::Cipher(e.to_string()))?;
                let my_id = node
                    .roster
                    .by_index(node.index)
                    .expect("own index in roster")
                    .id;
                let x = dprf_input(&my_id, &alpha.alpha);
                let _ = session_id;
                Ok((
                    SessionKind::Encrypt {
                        plaintext,
                        rho,
                        alpha,
                    },
                    x,
                ))
            }),
            NodeCommand::Decrypt {
                session,
                ciphertext,
                quorum,
            } => self.start_session(session, quorum, |_node, _sid| {
                let x = dprf_input(&ciphertext.initiator, &ciphertext.alpha);
                Ok((SessionKind::Decrypt { ciphertext }, x))
            }),
        }
    }

    fn start_session(
        &mut self,
        session: u64,
        quorum: Vec<u16>,
        build: impl FnOnce(&mut Self, u64) -> Result<(SessionKind, Vec<u8>), SessionError>,
    ) -> Vec<NodeOutput> {
        let fail = |result| {
            vec![NodeOutput::SessionResult {
                session,
                result: Err(result),
            }]
        };
        let Some(dep) = &self.current else {
            return fail(SessionError::NoKeys);
        };
        let need = self.threshold;
        if (quorum.len() as u16) < need {
            return fail(SessionError::QuorumTooSmall {
                need,
                got: quorum.len() as u16,
            });
        }
        let instance = dep.instance;
        let epoch = dep.keys.share.epoch;
        let (kind, x) = match build(self, session) {
            Ok(v) => v,
            Err(e) => return fail(e),
        };
        self.sessions.insert(
            session,
            Session {
                kind,
                x: x.clone(),
                quorum: quorum.clone(),
                partials: BTreeMap::new(),
                deadline: self.now_ms + self.config.timeout_ms,
            },
        );
        quorum
            .into_iter()
            .map(|j| NodeOutput::Send {
                to: j,
                message: ProtocolMessage {
                    instance,
                    body: Body::EvalRequest {
                        id: session,
                        purpose: EvalPurpose::Use,
                        epoch,
                        x: x.clone(),
                    },
                },
            })
            .collect()
    }

    fn handle_session_response(
        &mut self,
        from: u16,
        id: u64,
        outcome: EvalOutcome,
    ) -> Vec<NodeOutput> {
        let Some(session) = self.sessions.get_mut(&id) else {
            return Vec::new();
        };
        if !session.quorum.contains(&from) {
            return Vec::new();
        }
        let parts = match outcome {
            EvalOutcome::Partials(parts) => parts,
            EvalOutcome::Refused(code) => {
                self.sessions.remove(&id);
                return vec![NodeOutput::SessionResult {
                    session: id,
                    result: Err(SessionError::Refused { peer: from, code }),
                }];
            }
        };
        let partial = parts.first().and_then(|b| PartialEval::<G>::decode(b).ok());
        let Some(partial) = partial else {
            self.sessions.remove(&id);
            return vec![NodeOutput::SessionResult {
                session: id,
                result: Err(SessionError::ProofRejected(from)),
            }];
        };
        session.partials.insert(from, partial);
        if session.partials.len() < session.quorum.len() {
            return Vec::new();
        }
        let session = self.sessions.remove(&id).expect("present");
        let result = self.finish_session(session);
        vec![NodeOutput::SessionResult {
            session: id,
            result,
        }]
    }

    fn finish_session(&mut self, session: Session<G>) -> Result<SessionOutcome, SessionError> {
        let dep = self.current.as_ref().ok_or(SessionError::NoKeys)?;
        let combined = ssnpr_combine(&self.group, &session.partials, &dep.keys.gammas, &session.x)
            .map_err(|e| match e {
                tse_core::dprf::DprfError::ProofRejected(j)
                | tse_core::dprf::DprfError::MissingCommitment(j) => SessionError::ProofRejected(j),
                tse_core::dprf::DprfError::Sharing(e) => SessionError::Cipher(e.to_string()),
            })?;
        match session.kind {
            SessionKind::Encrypt {
                plaintext,
                rho,
                alpha,
            } => {
                let my_id = self
                    .roster
                    .by_index(self.index)
                    .expect("own index in roster")
                    .id;
                let ct = encrypt_finalize::<G>(&plaintext, &rho, &alpha, &my_id, &combined)
                    .map_err(|e| SessionError::Cipher(e.to_string()))?;
                Ok(SessionOutcome::Encrypted(ct))
            }
            SessionKind::Decrypt { ciphertext } => {
                match decrypt_finalize::<G>(&ciphertext, &combined) {
                    Ok(m) => Ok(SessionOutcome::Decrypted(m)),
                    Err(CipherError::CommitmentMismatch) => Err(SessionError::CommitmentMismatch),
                    Err(e) => Err(SessionError::Cipher(e.to_string())),
                }
            }
        }
    }

    // ----- time and aborts -------------------------------------------------

    fn handle_time(&mut self, now_ms: u64) -> Vec<NodeOutput> {
        self.now_ms = now_ms;
        let mut outputs = Vec::new();

        let dkg_expired = self
            .dkg
            .as_ref()
            .map(|run| !run.settled && now_ms >= run.deadline)
            .unwrap_or(false);
        if dkg_expired {
            let reason = {
                let run = self.dkg.as_ref().expect("checked");
                match run.transcript.phase() {
                    Phase::Dealing => AbortReason::MissingDeal(
                        run.transcript
                            .missing_dealers()
                            .first()
                            .copied()
                            .unwrap_or(0),
                    ),
                    Phase::Testing => AbortReason::Timeout(
                        run.transcript
                            .missing_responders()
                            .first()
                            .copied()
                            .unwrap_or(0),
                    ),
                    _ => AbortReason::Timeout(0),
                }
            };
            outputs.extend(self.abort_instance(reason, true));
        }

        let expired: Vec<u64> = self
            .sessions
            .iter()
            .filter(|(_, s)| now_ms >= s.deadline)
            .map(|(&id, _)| id)
            .collect();
        for id in expired {
            let session = self.sessions.remove(&id).expect("present");
            let missing = session
                .quorum
                .iter()
                .find(|j| !session.partials.contains_key(j))
                .copied()
                .unwrap_or(0);
            outputs.push(NodeOutput::SessionResult {
                session: id,
                result: Err(SessionError::Timeout(missing)),
            });
        }
        outputs
    }

    fn abort_instance(&mut self, reason: AbortReason, notify: bool) -> Vec<NodeOutput> {
        let Some(run) = self.dkg.as_mut() else {
            return Vec::new();
        };
        if run.settled {
            return Vec::new();
        }
        run.settled = true;
        run.pending_success = None;
        run.transcript.mark_aborted(reason.clone());
        self.buffered_tests.clear();
        self.buffered_deals.clear();
        let instance = run.transcript.params().instance;
        let mut outputs = vec![
            NodeOutput::PhaseChanged(Phase::Aborted),
            NodeOutput::InstanceSettled {
                outcome: Err(reason.clone()),
            },
        ];
        if notify {
            outputs.push(NodeOutput::Notify {
                message: ProtocolMessage {
                    instance,
                    body: Body::Abort {
                        reason: reason.to_string(),
                    },
                },
            });
        }
        self.dkg = None;
        outputs
    }
}

fn tamper_partial<G: Group>(p: &mut PartialEval<G>, field: TamperField) {
    match field {
        TamperField::H => p.h = G::op(&p.h, &G::generator()),
        TamperField::C => p.c = G::scalar_add(&p.c, &G::scalar_one()),
        TamperField::U => p.u = G::scalar_add(&p.u, &G::scalar_one()),
        TamperField::UPrime => p.u_prime = G::scalar_add(&p.u_prime, &G::scalar_one()),
        TamperField::Issuer => p.issuer = p.issuer.wrapping_add(1),
    }
}
