//! Core primitives for trustless threshold symmetric-key encryption.
//!
//! A `k`-of-`n` quorum jointly holds a DPRF key that no party (and no
//! dealer) ever sees in full; any `k` participants can evaluate it, and the
//! evaluation drives an authenticated symmetric encryption scheme. This
//! crate contains the pure, transport-free pieces:
//!
//! * [`group`]: prime-order group abstraction over secp256k1, plus a
//!   hand-checkable toy Schnorr group behind the same interface.
//! * [`sharing`]: Shamir secret sharing over the scalar field.
//! * [`commit`]: Pedersen and hash-based commitments.
//! * [`dprf`]: the DDH-based DPRF with Chaum-Pedersen proofs on every
//!   partial evaluation.
//! * [`cipher`]: threshold authenticated encryption on top of the DPRF.
//! * [`dkg`]: dealer-free setup and proactive key refresh, as sans-io
//!   per-participant state machines.
//!
//! The networking, storage and simulation layers live in `tse-net`.

pub mod cipher;
pub mod commit;
pub mod dkg;
pub mod dprf;
pub mod group;
pub mod sharing;

#[cfg(any(test, feature = "testkit"))]
pub mod testkit;
