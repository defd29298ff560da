//! Commitment schemes: Pedersen commitments over the group and hash-based
//! commitments via SHAKE256.
//!
//! Pedersen commitments bind each participant to its aggregated key share;
//! hash commitments bind a ciphertext to the message that produced it. The
//! hash commitment output is three times the committed message length, and
//! the committed value here is always a 32-byte digest, so `alpha` is
//! 96 bytes on the wire.

use sha3::digest::{ExtendableOutput, Update, XofReader};
use sha3::Shake256;
use thiserror::Error;

use crate::group::{Group, GroupParams};

/// Output expansion factor of the hash commitment.
pub const HASH_COMMIT_EXPANSION: usize = 3;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CommitError {
    #[error("randomness length {r} must equal message length {m}")]
    LengthMismatch { m: usize, r: usize },
    #[error("cannot commit to an empty message")]
    EmptyMessage,
}

/// `γ = g^m · h^r`. Perfectly hiding; binding under discrete log as long as
/// nobody knows `log_g(h)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PedersenCommitment<G: Group> {
    pub gamma: G::Element,
}

pub fn pedersen_commit<G: Group>(
    pp: &GroupParams<G>,
    m: &G::Scalar,
    r: &G::Scalar,
) -> PedersenCommitment<G> {
    let gamma = G::op(&G::exp(&G::generator(), m), &G::exp(&pp.h, r));
    PedersenCommitment { gamma }
}

pub fn pedersen_verify<G: Group>(
    pp: &GroupParams<G>,
    m: &G::Scalar,
    r: &G::Scalar,
    commitment: &PedersenCommitment<G>,
) -> bool {
    pedersen_commit(pp, m, r) == *commitment
}

/// `α = SHAKE256(r || m)` with output length `3·|m|`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HashCommitment {
    pub alpha: Vec<u8>,
}

pub fn hash_commit(m: &[u8], r: &[u8]) -> Result<HashCommitment, CommitError> {
    if m.is_empty() {
        return Err(CommitError::EmptyMessage);
    }
    if r.len() != m.len() {
        return Err(CommitError::LengthMismatch {
            m: m.len(),
            r: r.len(),
        });
    }
    let mut xof = Shake256::default();
    xof.update(r);
    xof.update(m);
    let mut alpha = vec![0u8; HASH_COMMIT_EXPANSION * m.len()];
    xof.finalize_xof().read(&mut alpha);
    Ok(HashCommitment { alpha })
}

pub fn hash_verify(m: &[u8], r: &[u8], alpha: &[u8]) -> bool {
    match hash_commit(m, r) {
        Ok(c) => c.alpha == alpha,
        Err(_) => false,
    }
}
