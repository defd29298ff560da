//! Threshold authenticated encryption on top of the DPRF.
//!
//! An initiator commits to the digest of its message, has a quorum evaluate
//! the DPRF on `initiator_id || alpha`, and masks `m || ρ` with an
//! AES-256-CTR keystream. Decryption reverses the masking and accepts only
//! if the recovered `(m, ρ)` opens the commitment; anything tampered fails
//! closed rather than yielding a wrong plaintext.
//!
//! The session key binds the combined group element to `(initiator, alpha)`
//! through the KDF, so no keystream is ever reused across sessions and a
//! ciphertext cannot be re-bound to a different commitment.

use aes::Aes256;
use ctr::cipher::{KeyIvInit, StreamCipher};
use rand_core::{CryptoRng, RngCore};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::commit::{hash_commit, hash_verify, CommitError, HashCommitment};
use crate::group::Group;

type Aes256Ctr = ctr::Ctr128BE<Aes256>;

/// Length of the commitment randomness and of the committed digest.
pub const RHO_LEN: usize = 32;
pub const DIGEST_LEN: usize = 32;
/// `3 * DIGEST_LEN`, the fixed ciphertext commitment size.
pub const ALPHA_LEN: usize = 96;
pub const INITIATOR_ID_LEN: usize = 16;
/// Keystream requests are capped at 2^32 bytes.
pub const MAX_KEYSTREAM_LEN: u64 = 1 << 32;

const KDF_DST: &[u8] = b"TSE-V01-session-kdf";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CipherError {
    #[error("message must not be empty")]
    EmptyMessage,
    #[error("keystream length {0} exceeds the 2^32-byte limit")]
    LengthLimit(u64),
    #[error("recovered plaintext does not open the ciphertext commitment")]
    CommitmentMismatch,
    #[error("malformed ciphertext: {0}")]
    MalformedCiphertext(&'static str),
    #[error(transparent)]
    Commit(#[from] CommitError),
}

/// `(i, α, ε)`: initiator identifier, message commitment, masked payload.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Ciphertext {
    pub initiator: [u8; INITIATOR_ID_LEN],
    pub alpha: Vec<u8>,
    pub epsilon: Vec<u8>,
}

impl Ciphertext {
    /// Wire form: `initiator(16) || alpha_len(2, BE) || alpha || epsilon`.
    pub fn encode(&self) -> Vec<u8> {
        let mut out =
            Vec::with_capacity(INITIATOR_ID_LEN + 2 + self.alpha.len() + self.epsilon.len());
        out.extend_from_slice(&self.initiator);
        out.extend_from_slice(&(self.alpha.len() as u16).to_be_bytes());
        out.extend_from_slice(&self.alpha);
        out.extend_from_slice(&self.epsilon);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, CipherError> {
        if bytes.len() < INITIATOR_ID_LEN + 2 {
            return Err(CipherError::MalformedCiphertext("truncated header"));
        }
        let mut initiator = [0u8; INITIATOR_ID_LEN];
        initiator.copy_from_slice(&bytes[..INITIATOR_ID_LEN]);
        let alpha_len = u16::from_be_bytes(
            bytes[INITIATOR_ID_LEN..INITIATOR_ID_LEN + 2]
                .try_into()
                .unwrap(),
        ) as usize;
        let rest = &bytes[INITIATOR_ID_LEN + 2..];
        if rest.len() < alpha_len {
            return Err(CipherError::MalformedCiphertext("truncated commitment"));
        }
        let alpha = rest[..alpha_len].to_vec();
        let epsilon = rest[alpha_len..].to_vec();
        if epsilon.len() < RHO_LEN {
            return Err(CipherError::MalformedCiphertext("payload shorter than rho"));
        }
        Ok(Self {
            initiator,
            alpha,
            epsilon,
        })
    }
}

/// A single-use session key derived from the combined DPRF output. Never
/// persisted; the debug form hides the seed.
#[derive(Clone, PartialEq, Eq)]
pub struct SessionKey {
    seed: [u8; 32],
}

impl std::fmt::Debug for SessionKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("SessionKey(..)")
    }
}

/// The DPRF input for a session: `initiator_id || alpha`.
pub fn dprf_input(initiator: &[u8; INITIATOR_ID_LEN], alpha: &[u8]) -> Vec<u8> {
    let mut x = Vec::with_capacity(INITIATOR_ID_LEN + alpha.len());
    x.extend_from_slice(initiator);
    x.extend_from_slice(alpha);
    x
}

/// Commits to SHA-256 of the message with fresh 32-byte randomness.
///
/// Returns `(alpha, rho, digest)`.
pub fn encrypt_commit<R: RngCore + CryptoRng>(
    m: &[u8],
    rng: &mut R,
) -> Result<(HashCommitment, [u8; RHO_LEN], [u8; DIGEST_LEN]), CipherError> {
    if m.is_empty() {
        return Err(CipherError::EmptyMessage);
    }
    let digest: [u8; DIGEST_LEN] = Sha256::digest(m).into();
    let mut rho = [0u8; RHO_LEN];
    rng.fill_bytes(&mut rho);
    let alpha = hash_commit(&digest, &rho)?;
    Ok((alpha, rho, digest))
}

/// Derives the session key from the combined DPRF output and the session
/// context. Distinct `(combined, initiator, alpha)` triples give independent
/// keys.
pub fn kdf<G: Group>(
    combined: &G::Element,
    initiator: &[u8; INITIATOR_ID_LEN],
    alpha: &[u8],
) -> SessionKey {
    let mut hasher = Sha256::new();
    hasher.update(KDF_DST);
    let enc = G::element_encode(combined);
    hasher.update((enc.len() as u16).to_be_bytes());
    hasher.update(&enc);
    hasher.update(initiator);
    hasher.update(alpha);
    SessionKey {
        seed: hasher.finalize().into(),
    }
}

/// AES-256-CTR keystream with a zero IV. Safe because every session key is
/// single-use by construction.
pub fn keystream(key: &SessionKey, len: usize) -> Result<Vec<u8>, CipherError> {
    if len as u64 > MAX_KEYSTREAM_LEN {
        return Err(CipherError::LengthLimit(len as u64));
    }
    let mut out = vec![0u8; len];
    let mut ctr = Aes256Ctr::new(&key.seed.into(), &[0u8; 16].into());
    ctr.apply_keystream(&mut out);
    Ok(out)
}

/// Masks `m || rho` with the session keystream and assembles the ciphertext.
pub fn encrypt_finalize<G: Group>(
    m: &[u8],
    rho: &[u8; RHO_LEN],
    alpha: &HashCommitment,
    initiator: &[u8; INITIATOR_ID_LEN],
    combined: &G::Element,
) -> Result<Ciphertext, CipherError> {
    let key = kdf::<G>(combined, initiator, &alpha.alpha);
    let mut payload = Vec::with_capacity(m.len() + RHO_LEN);
    payload.extend_from_slice(m);
    payload.extend_from_slice(rho);
    let ks = keystream(&key, payload.len())?;
    for (b, k) in payload.iter_mut().zip(&ks) {
        *b ^= k;
    }
    Ok(Ciphertext {
        initiator: *initiator,
        alpha: alpha.alpha.clone(),
        epsilon: payload,
    })
}

/// Unmasks the payload and returns the message iff it opens the commitment.
pub fn decrypt_finalize<G: Group>(
    c: &Ciphertext,
    combined: &G::Element,
) -> Result<Vec<u8>, CipherError> {
    if c.epsilon.len() < RHO_LEN {
        return Err(CipherError::MalformedCiphertext("payload shorter than rho"));
    }
    let key = kdf::<G>(combined, &c.initiator, &c.alpha);
    let ks = keystream(&key, c.epsilon.len())?;
    let mut payload = c.epsilon.clone();
    for (b, k) in payload.iter_mut().zip(&ks) {
        *b ^= k;
    }
    let split = payload.len() - RHO_LEN;
    let (m, rho) = payload.split_at(split);
    let digest: [u8; DIGEST_LEN] = Sha256::digest(m).into();
    if !hash_verify(&digest, rho, &c.alpha) {
        return Err(CipherError::CommitmentMismatch);
    }
    Ok(m.to_vec())
}
