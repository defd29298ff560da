//! Distributed runtime for threshold symmetric encryption.
//!
//! The setting: `n` participant nodes holding key shares, an untrusted
//! coordinator that only prompts phases, and an append-only public storage
//! that never sees secret material. Participants talk pairwise over
//! mutually authenticated encrypted channels.
//!
//! Two drivers execute the same node state machines:
//!
//! * [`sim`]: a deterministic single-threaded simulation with virtual
//!   time, in-memory queues, wire taps and fault injection. This is the
//!   reference harness for tests and benchmarks.
//! * [`tcp`]: loopback TCP with one thread per node, the
//!   deployment-shaped path.

pub mod channel;
pub mod coordinator;
pub mod harness;
pub mod identity;
pub mod node;
pub mod sim;
pub mod storage;
pub mod tcp;
pub mod trace;
pub mod wire;
