//! Loopback TCP deployment.
//!
//! The same node state machines run over real sockets: one TCP connection
//! per participant pair carrying encrypted channel records, plus a plain
//! connection from the coordinator to each node. Every frame is
//! length-prefixed with a 4-byte big-endian count. The sequential simulator
//! remains the reference harness; this is the deployment-shaped path the
//! benchmarks can optionally exercise.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use crossbeam_channel::{unbounded, Receiver, Sender};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use tse_core::cipher::Ciphertext;
use tse_core::group::{Group, GroupParams};

use crate::channel::{ChannelEvent, SecureChannel};
use crate::coordinator::{Coordinator, CoordinatorBehavior, CoordinatorOutput, InstanceResult};
use crate::identity::{LocalIdentity, Roster};
use crate::node::{
    Node, NodeCommand, NodeConfig, NodeInput, NodeOutput, SessionError, SessionOutcome,
};
use crate::storage::PublicStorage;
use crate::trace::MessageCounts;
use crate::wire::{Body, InstanceMode, ProtocolMessage};

#[derive(Debug, thiserror::Error)]
pub enum TcpError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("handshake with peer {0} failed")]
    Handshake(u16),
    #[error("peer {0} unreachable at {1}")]
    PeerUnreachable(u16, String),
    #[error("cluster worker lost")]
    WorkerLost,
    #[error("operation did not settle in time")]
    Unsettled,
    #[error("session failed: {0}")]
    Session(#[from] SessionError),
}

fn write_frame(stream: &mut TcpStream, frame: &[u8]) -> std::io::Result<()> {
    stream.write_all(&(frame.len() as u32).to_be_bytes())?;
    stream.write_all(frame)?;
    stream.flush()
}

fn read_frame(stream: &mut TcpStream) -> std::io::Result<Vec<u8>> {
    let mut len = [0u8; 4];
    stream.read_exact(&mut len)?;
    let len = u32::from_be_bytes(len) as usize;
    if len > crate::wire::MAX_MESSAGE_LEN + 256 {
        return Err(std::io::Error::other("oversized frame"));
    }
    let mut frame = vec![0u8; len];
    stream.read_exact(&mut frame)?;
    Ok(frame)
}

enum Inbound {
    Peer { from: u16, message: ProtocolMessage },
    Coordinator(ProtocolMessage),
    Command(NodeCommand),
    Stop,
}

enum WorkerEvent {
    Settled {
        ok: bool,
    },
    Session {
        session: u64,
        result: Result<SessionOutcome, SessionError>,
    },
}

struct PeerLink {
    stream: Mutex<(TcpStream, SecureChannel)>,
}

impl PeerLink {
    fn send_sealed(&self, plaintext: &[u8]) -> std::io::Result<()> {
        let mut guard = self.stream.lock().expect("link poisoned");
        let (stream, channel) = &mut *guard;
        let frame = channel
            .seal(plaintext)
            .map_err(|_| std::io::Error::other("channel not established"))?;
        write_frame(stream, &frame)
    }
}

struct NodeWorker {
    inbox: Sender<Inbound>,
    handles: Vec<JoinHandle<()>>,
}

/// An in-process cluster of `n` participant nodes over loopback TCP.
pub struct TcpCluster<G: Group> {
    n: u16,
    k: u16,
    storage: Arc<PublicStorage>,
    workers: Vec<NodeWorker>,
    events: Receiver<WorkerEvent>,
    coordinator_links: Vec<Arc<Mutex<TcpStream>>>,
    coordinator_inbox: Receiver<(u16, ProtocolMessage)>,
    next_session: u64,
    epoch: u32,
    rng: ChaCha20Rng,
    /// Exact protocol message counts, mirrored from node outputs.
    pub counts: Arc<Mutex<MessageCounts>>,
    _group: std::marker::PhantomData<G>,
}

type AcceptedConn = (u16, TcpStream, Option<SecureChannel>);

impl<G: Group> TcpCluster<G> {
    /// Binds listeners, dials the mesh, runs every channel handshake and
    /// starts one event-loop thread per node.
    pub fn start(n: u16, k: u16, seed: u64, timeout_ms: u64) -> Result<Self, TcpError> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);

        let mut locals = Vec::new();
        let mut listeners = Vec::new();
        for _ in 1..=n {
            let listener = TcpListener::bind("127.0.0.1:0")?;
            let addr = listener.local_addr()?;
            let mut id = [0u8; 16];
            rng.fill_bytes(&mut id);
            let mut secret = [0u8; 32];
            rng.fill_bytes(&mut secret);
            locals.push(LocalIdentity::from_parts(id, addr.to_string(), secret));
            listeners.push(listener);
        }
        let roster =
            Roster::new(locals.iter().map(|l| l.identity.clone()).collect()).expect("unique ids");
        let mut h_seed = [0u8; 32];
        rng.fill_bytes(&mut h_seed);
        let group = GroupParams::<G>::derive(&h_seed);
        let storage = Arc::new(PublicStorage::in_memory());
        let counts = Arc::new(Mutex::new(MessageCounts::default()));
        let (event_tx, event_rx) = unbounded();

        // Accept loops: node j expects one connection from each lower-index
        // peer plus one from the coordinator.
        let mut accept_handles = Vec::new();
        for (zero, listener) in listeners.into_iter().enumerate() {
            let me = zero as u16 + 1;
            let local = locals[zero].clone();
            let roster = roster.clone();
            let expected_inbound = (me - 1) as usize + 1;
            accept_handles.push(std::thread::spawn(
                move || -> std::io::Result<Vec<AcceptedConn>> {
                    let mut inbound = Vec::new();
                    for _ in 0..expected_inbound {
                        let (mut stream, _) = listener.accept()?;
                        stream.set_nodelay(true)?;
                        let hello = read_frame(&mut stream)?;
                        if hello == b"coordinator" {
                            inbound.push((0u16, stream, None));
                            continue;
                        }
                        let dialer_id: [u8; 16] = hello
                            .get(1..17)
                            .and_then(|b| b.try_into().ok())
                            .ok_or_else(|| std::io::Error::other("malformed hello"))?;
                        // Only roster members get a channel.
                        let from = roster
                            .index_of(&dialer_id)
                            .ok_or_else(|| std::io::Error::other("dialer not in roster"))?;
                        let peer = roster.by_index(from).unwrap().clone();
                        let mut channel = SecureChannel::respond(local.clone(), peer);
                        let mut hs_rng = ChaCha20Rng::from_entropy();
                        for event in channel
                            .on_frame(&hello, &mut hs_rng)
                            .map_err(|_| std::io::Error::other("handshake"))?
                        {
                            if let ChannelEvent::Send(frame) = event {
                                write_frame(&mut stream, &frame)?;
                            }
                        }
                        let confirm = read_frame(&mut stream)?;
                        let events = channel
                            .on_frame(&confirm, &mut hs_rng)
                            .map_err(|_| std::io::Error::other("confirm"))?;
                        if !events
                            .iter()
                            .any(|e| matches!(e, ChannelEvent::Established))
                        {
                            return Err(std::io::Error::other("no establishment"));
                        }
                        inbound.push((from, stream, Some(channel)));
                    }
                    Ok(inbound)
                },
            ));
        }

        // Dial higher-indexed peers and run the initiator handshakes.
        let mut dialed: Vec<BTreeMap<u16, (TcpStream, SecureChannel)>> =
            (0..n).map(|_| BTreeMap::new()).collect();
        for i in 1..=n {
            for j in (i + 1)..=n {
                let peer = roster.by_index(j).expect("j <= n").clone();
                let mut stream = TcpStream::connect(&peer.address)
                    .map_err(|_| TcpError::PeerUnreachable(j, peer.address.clone()))?;
                stream.set_nodelay(true)?;
                let mut dial_rng = ChaCha20Rng::from_entropy();
                let (mut channel, hello) =
                    SecureChannel::initiate(locals[(i - 1) as usize].clone(), peer, &mut dial_rng);
                write_frame(&mut stream, &hello)?;
                let reply = read_frame(&mut stream)?;
                for event in channel
                    .on_frame(&reply, &mut dial_rng)
                    .map_err(|_| TcpError::Handshake(j))?
                {
                    if let ChannelEvent::Send(frame) = event {
                        write_frame(&mut stream, &frame)?;
                    }
                }
                let confirm = read_frame(&mut stream)?;
                let events = channel
                    .on_frame(&confirm, &mut dial_rng)
                    .map_err(|_| TcpError::Handshake(j))?;
                if !events
                    .iter()
                    .any(|e| matches!(e, ChannelEvent::Established))
                {
                    return Err(TcpError::Handshake(j));
                }
                dialed[(i - 1) as usize].insert(j, (stream, channel));
            }
        }

        // The coordinator dials every node over a plain link and keeps the
        // write half; reader threads feed its inbox.
        let (coord_tx, coord_rx) = unbounded();
        let mut coordinator_links = Vec::new();
        for j in 1..=n {
            let peer = roster.by_index(j).expect("j <= n").clone();
            let mut stream = TcpStream::connect(&peer.address)
                .map_err(|_| TcpError::PeerUnreachable(j, peer.address.clone()))?;
            stream.set_nodelay(true)?;
            write_frame(&mut stream, b"coordinator")?;
            let mut reader = stream.try_clone()?;
            let tx = coord_tx.clone();
            std::thread::spawn(move || loop {
                let Ok(frame) = read_frame(&mut reader) else {
                    return;
                };
                let Ok(message) = ProtocolMessage::decode(&frame) else {
                    continue;
                };
                if tx.send((j, message)).is_err() {
                    return;
                }
            });
            coordinator_links.push(Arc::new(Mutex::new(stream)));
        }

        let mut accepted: Vec<Vec<AcceptedConn>> = Vec::new();
        for handle in accept_handles {
            accepted.push(handle.join().map_err(|_| TcpError::WorkerLost)??);
        }

        let mut workers = Vec::new();
        for zero in 0..n as usize {
            let me = zero as u16 + 1;
            let (inbox_tx, inbox_rx) = unbounded::<Inbound>();
            let mut links: BTreeMap<u16, Arc<PeerLink>> = BTreeMap::new();
            let mut reader_handles = Vec::new();
            let mut coordinator_reply: Option<Arc<Mutex<TcpStream>>> = None;

            let mut attach = |from: u16, stream: TcpStream, channel: SecureChannel| {
                let reader = stream.try_clone().expect("clone stream");
                let link = Arc::new(PeerLink {
                    stream: Mutex::new((stream, channel)),
                });
                links.insert(from, Arc::clone(&link));
                let inbox = inbox_tx.clone();
                let handle = std::thread::spawn(move || {
                    let mut reader = reader;
                    let mut rng = ChaCha20Rng::from_entropy();
                    loop {
                        let Ok(frame) = read_frame(&mut reader) else {
                            return;
                        };
                        let payload = {
                            let mut guard = link.stream.lock().expect("link poisoned");
                            let (_, channel) = &mut *guard;
                            match channel.on_frame(&frame, &mut rng) {
                                Ok(events) => events.into_iter().find_map(|e| match e {
                                    ChannelEvent::Message(m) => Some(m),
                                    _ => None,
                                }),
                                // Tampered records are detected and dropped.
                                Err(_) => None,
                            }
                        };
                        let Some(payload) = payload else { continue };
                        let Ok(message) = ProtocolMessage::decode(&payload) else {
                            continue;
                        };
                        if inbox.send(Inbound::Peer { from, message }).is_err() {
                            return;
                        }
                    }
                });
                handle
            };

            for (from, stream, channel) in accepted[zero].drain(..) {
                if let Some(channel) = channel {
                    reader_handles.push(attach(from, stream, channel));
                } else {
                    let reply = Arc::new(Mutex::new(stream.try_clone()?));
                    coordinator_reply = Some(reply);
                    let mut reader = stream;
                    let inbox = inbox_tx.clone();
                    reader_handles.push(std::thread::spawn(move || loop {
                        let Ok(frame) = read_frame(&mut reader) else {
                            return;
                        };
                        let Ok(message) = ProtocolMessage::decode(&frame) else {
                            continue;
                        };
                        if inbox.send(Inbound::Coordinator(message)).is_err() {
                            return;
                        }
                    }));
                }
            }
            for (to, (stream, channel)) in std::mem::take(&mut dialed[zero]) {
                reader_handles.push(attach(to, stream, channel));
            }

            let mut node_seed = [0u8; 32];
            rng.fill_bytes(&mut node_seed);
            let mut node = Node::<G>::new(
                me,
                k,
                roster.clone(),
                group.clone(),
                Arc::clone(&storage),
                NodeConfig {
                    timeout_ms,
                    behavior: Default::default(),
                },
                node_seed,
            );
            let events = event_tx.clone();
            let storage_arc = Arc::clone(&storage);
            let counts_arc = Arc::clone(&counts);
            let self_inbox = inbox_tx.clone();
            let started = Instant::now();
            let loop_handle = std::thread::spawn(move || {
                let tick = Duration::from_millis(50);
                loop {
                    let input = match inbox_rx.recv_timeout(tick) {
                        Ok(Inbound::Stop) => return,
                        Ok(Inbound::Peer { from, message }) => NodeInput::Peer { from, message },
                        Ok(Inbound::Coordinator(message)) => NodeInput::Coordinator { message },
                        Ok(Inbound::Command(cmd)) => NodeInput::Command(cmd),
                        Err(crossbeam_channel::RecvTimeoutError::Timeout) => NodeInput::Time {
                            now_ms: started.elapsed().as_millis() as u64,
                        },
                        Err(crossbeam_channel::RecvTimeoutError::Disconnected) => return,
                    };
                    let outputs = node.handle(input);
                    dispatch(
                        me,
                        outputs,
                        &links,
                        &coordinator_reply,
                        &storage_arc,
                        &events,
                        &counts_arc,
                        &self_inbox,
                    );
                }
            });

            let mut handles = reader_handles;
            handles.push(loop_handle);
            workers.push(NodeWorker {
                inbox: inbox_tx,
                handles,
            });
        }

        Ok(Self {
            n,
            k,
            storage,
            workers,
            events: event_rx,
            coordinator_links,
            coordinator_inbox: coord_rx,
            next_session: 1,
            epoch: 0,
            rng,
            counts,
            _group: std::marker::PhantomData,
        })
    }

    fn send_prompt(&self, output: CoordinatorOutput) -> Result<Option<InstanceResult>, TcpError> {
        match output {
            CoordinatorOutput::Prompt { to, message } => {
                let mut stream = self.coordinator_links[(to - 1) as usize]
                    .lock()
                    .expect("coordinator link");
                write_frame(&mut stream, &message.encode())?;
                Ok(None)
            }
            CoordinatorOutput::Settled(result) => Ok(Some(result)),
        }
    }

    /// Drives one setup or refresh instance from the caller thread, which
    /// plays the (untrusted) coordinator.
    pub fn run_instance(
        &mut self,
        mode: InstanceMode,
        timeout: Duration,
    ) -> Result<InstanceResult, TcpError> {
        let epoch = match mode {
            InstanceMode::Setup => 0,
            InstanceMode::Refresh => self.epoch + 1,
        };
        let mut instance = [0u8; 16];
        self.rng.fill_bytes(&mut instance);
        let mut coordinator = Coordinator::new(
            self.n,
            instance,
            epoch,
            mode,
            CoordinatorBehavior::default(),
            timeout.as_millis() as u64,
        );
        let started = Instant::now();
        for output in coordinator.start(0) {
            if let Some(result) = self.send_prompt(output)? {
                return Ok(result);
            }
        }
        let result = loop {
            if started.elapsed() > timeout {
                return Err(TcpError::Unsettled);
            }
            let now = started.elapsed().as_millis() as u64;
            match self
                .coordinator_inbox
                .recv_timeout(Duration::from_millis(50))
            {
                Ok((from, message)) => {
                    let mut settled = None;
                    for output in coordinator.handle(from, message, now) {
                        if let Some(result) = self.send_prompt(output)? {
                            settled = Some(result);
                        }
                    }
                    if let Some(result) = settled {
                        break result;
                    }
                }
                Err(crossbeam_channel::RecvTimeoutError::Timeout) => {
                    let mut settled = None;
                    for output in coordinator.time(now) {
                        if let Some(result) = self.send_prompt(output)? {
                            settled = Some(result);
                        }
                    }
                    if let Some(result) = settled {
                        break result;
                    }
                }
                Err(crossbeam_channel::RecvTimeoutError::Disconnected) => {
                    return Err(TcpError::WorkerLost)
                }
            }
        };
        if result.outcome.is_ok() {
            self.await_installations(Duration::from_secs(10))?;
            self.epoch = epoch;
        }
        Ok(result)
    }

    /// Waits until every node confirms it installed the epoch.
    fn await_installations(&self, timeout: Duration) -> Result<(), TcpError> {
        let mut settled = 0u16;
        let started = Instant::now();
        while settled < self.n {
            if started.elapsed() > timeout {
                return Err(TcpError::Unsettled);
            }
            match self.events.recv_timeout(Duration::from_millis(50)) {
                Ok(WorkerEvent::Settled { ok: true }) => settled += 1,
                Ok(_) => {}
                Err(crossbeam_channel::RecvTimeoutError::Timeout) => {}
                Err(crossbeam_channel::RecvTimeoutError::Disconnected) => {
                    return Err(TcpError::WorkerLost)
                }
            }
        }
        Ok(())
    }

    pub fn encrypt(
        &mut self,
        initiator: u16,
        quorum: &[u16],
        plaintext: &[u8],
        timeout: Duration,
    ) -> Result<Ciphertext, TcpError> {
        let session = self.next_session;
        self.next_session += 1;
        self.workers[(initiator - 1) as usize]
            .inbox
            .send(Inbound::Command(NodeCommand::Encrypt {
                session,
                plaintext: plaintext.to_vec(),
                quorum: quorum.to_vec(),
            }))
            .map_err(|_| TcpError::WorkerLost)?;
        match self.await_session(session, timeout)? {
            SessionOutcome::Encrypted(ct) => Ok(ct),
            SessionOutcome::Decrypted(_) => unreachable!("encrypt yields ciphertext"),
        }
    }

    pub fn decrypt(
        &mut self,
        initiator: u16,
        quorum: &[u16],
        ciphertext: &Ciphertext,
        timeout: Duration,
    ) -> Result<Vec<u8>, TcpError> {
        let session = self.next_session;
        self.next_session += 1;
        self.workers[(initiator - 1) as usize]
            .inbox
            .send(Inbound::Command(NodeCommand::Decrypt {
                session,
                ciphertext: ciphertext.clone(),
                quorum: quorum.to_vec(),
            }))
            .map_err(|_| TcpError::WorkerLost)?;
        match self.await_session(session, timeout)? {
            SessionOutcome::Decrypted(m) => Ok(m),
            SessionOutcome::Encrypted(_) => unreachable!("decrypt yields plaintext"),
        }
    }

    fn await_session(&self, session: u64, timeout: Duration) -> Result<SessionOutcome, TcpError> {
        let started = Instant::now();
        loop {
            if started.elapsed() > timeout {
                return Err(TcpError::Unsettled);
            }
            match self.events.recv_timeout(Duration::from_millis(50)) {
                Ok(WorkerEvent::Session {
                    session: done,
                    result,
                }) if done == session => return Ok(result?),
                Ok(_) => {}
                Err(crossbeam_channel::RecvTimeoutError::Timeout) => {}
                Err(crossbeam_channel::RecvTimeoutError::Disconnected) => {
                    return Err(TcpError::WorkerLost)
                }
            }
        }
    }

    pub fn storage(&self) -> &Arc<PublicStorage> {
        &self.storage
    }

    pub fn threshold(&self) -> u16 {
        self.k
    }

    /// Stops the node loops; reader threads exit as sockets drop.
    pub fn shutdown(self) {
        for worker in &self.workers {
            let _ = worker.inbox.send(Inbound::Stop);
        }
        drop(self.coordinator_links);
        for worker in self.workers {
            for handle in worker.handles {
                if handle.is_finished() {
                    let _ = handle.join();
                }
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn dispatch(
    me: u16,
    outputs: Vec<NodeOutput>,
    links: &BTreeMap<u16, Arc<PeerLink>>,
    coordinator: &Option<Arc<Mutex<TcpStream>>>,
    storage: &Arc<PublicStorage>,
    events: &Sender<WorkerEvent>,
    counts: &Arc<Mutex<MessageCounts>>,
    self_inbox: &Sender<Inbound>,
) {
    for output in outputs {
        match output {
            NodeOutput::Send { to, message } => {
                {
                    let mut c = counts.lock().expect("counts");
                    match &message.body {
                        Body::DealShare { .. } => c.deal_messages += 1,
                        Body::EvalRequest { .. } => c.eval_requests += 1,
                        Body::EvalResponse { .. } => c.eval_responses += 1,
                        _ => c.coordination += 1,
                    }
                }
                if to == me {
                    let _ = self_inbox.send(Inbound::Peer { from: me, message });
                } else if let Some(link) = links.get(&to) {
                    let _ = link.send_sealed(&message.encode());
                }
            }
            NodeOutput::Notify { message } => {
                counts.lock().expect("counts").coordination += 1;
                if let Some(stream) = coordinator {
                    let mut stream = stream.lock().expect("coordinator reply");
                    let _ = write_frame(&mut stream, &message.encode());
                }
            }
            NodeOutput::Post(record) => {
                counts.lock().expect("counts").commitment_posts +=
                    matches!(record.key.kind, crate::storage::RecordKind::Commitment) as u64;
                let _ = storage.append(record);
            }
            NodeOutput::PhaseChanged(_) => {}
            NodeOutput::InstanceSettled { outcome } => {
                let _ = events.send(WorkerEvent::Settled {
                    ok: outcome.is_ok(),
                });
            }
            NodeOutput::SessionResult { session, result } => {
                let _ = events.send(WorkerEvent::Session { session, result });
            }
        }
    }
}
