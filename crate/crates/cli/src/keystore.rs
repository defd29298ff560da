//! Encrypted participant key stores.
//!
//! A store holds exactly what a participant must keep after setup: its
//! secret share (evaluation point and value, 64 bytes together), the
//! commitment randomness used to prove partial evaluations, the static
//! channel secret, and the deployment context (instance, epoch, thresholds,
//! second-generator seed). Everything is sealed with a passphrase-derived
//! key: PBKDF2-HMAC-SHA256 into ChaCha20Poly1305.

use std::path::Path;

use chacha20poly1305::aead::Aead;
use chacha20poly1305::{ChaCha20Poly1305, KeyInit, Nonce};
use hmac::Hmac;
use rand_core::{OsRng, RngCore};
use sha2::Sha256;
use thiserror::Error;

use tse_core::group::{Group, Secp256k1};

const MAGIC: &[u8; 7] = b"TSEKS01";
const PBKDF2_ROUNDS: u32 = 60_000;

#[derive(Debug, Error)]
pub enum KeyStoreError {
    #[error("key store is malformed: {0}")]
    Malformed(&'static str),
    #[error("wrong passphrase or corrupted key store")]
    Unsealed,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Plaintext contents of one participant's store.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KeyStore {
    pub group_id: String,
    pub instance: [u8; 16],
    pub k: u16,
    pub n: u16,
    pub epoch: u32,
    pub index: u16,
    /// Canonical encoding of the share value; the evaluation point is the
    /// index, so the stored share is the (x, value) pair the docs cost at
    /// 64 bytes.
    pub share_value: Vec<u8>,
    pub rand: Vec<u8>,
    pub static_secret: [u8; 32],
    pub h_seed: Vec<u8>,
}

impl KeyStore {
    fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        let put = |out: &mut Vec<u8>, b: &[u8]| {
            out.extend_from_slice(&(b.len() as u16).to_be_bytes());
            out.extend_from_slice(b);
        };
        put(&mut out, self.group_id.as_bytes());
        out.extend_from_slice(&self.instance);
        out.extend_from_slice(&self.k.to_be_bytes());
        out.extend_from_slice(&self.n.to_be_bytes());
        out.extend_from_slice(&self.epoch.to_be_bytes());
        out.extend_from_slice(&self.index.to_be_bytes());
        put(&mut out, &self.share_value);
        put(&mut out, &self.rand);
        out.extend_from_slice(&self.static_secret);
        put(&mut out, &self.h_seed);
        out
    }

    fn decode(bytes: &[u8]) -> Result<Self, KeyStoreError> {
        let mut at = 0usize;
        let take = |at: &mut usize, n: usize| -> Result<&[u8], KeyStoreError> {
            if *at + n > bytes.len() {
                return Err(KeyStoreError::Malformed("truncated"));
            }
            let out = &bytes[*at..*at + n];
            *at += n;
            Ok(out)
        };
        let take_var = |at: &mut usize| -> Result<Vec<u8>, KeyStoreError> {
            let len = u16::from_be_bytes(take(at, 2)?.try_into().unwrap()) as usize;
            Ok(take(at, len)?.to_vec())
        };
        let group_id = String::from_utf8(take_var(&mut at)?)
            .map_err(|_| KeyStoreError::Malformed("group id"))?;
        let instance: [u8; 16] = take(&mut at, 16)?.try_into().unwrap();
        let k = u16::from_be_bytes(take(&mut at, 2)?.try_into().unwrap());
        let n = u16::from_be_bytes(take(&mut at, 2)?.try_into().unwrap());
        let epoch = u32::from_be_bytes(take(&mut at, 4)?.try_into().unwrap());
        let index = u16::from_be_bytes(take(&mut at, 2)?.try_into().unwrap());
        let share_value = take_var(&mut at)?;
        let rand = take_var(&mut at)?;
        let static_secret: [u8; 32] = take(&mut at, 32)?.try_into().unwrap();
        let h_seed = take_var(&mut at)?;
        if at != bytes.len() {
            return Err(KeyStoreError::Malformed("trailing bytes"));
        }
        Ok(Self {
            group_id,
            instance,
            k,
            n,
            epoch,
            index,
            share_value,
            rand,
            static_secret,
            h_seed,
        })
    }
}

fn derive_key(passphrase: &str, salt: &[u8; 16]) -> [u8; 32] {
    let mut key = [0u8; 32];
    pbkdf2::pbkdf2::<Hmac<Sha256>>(passphrase.as_bytes(), salt, PBKDF2_ROUNDS, &mut key)
        .expect("output length is valid");
    key
}

pub fn save(path: &Path, passphrase: &str, store: &KeyStore) -> Result<(), KeyStoreError> {
    let mut salt = [0u8; 16];
    OsRng.fill_bytes(&mut salt);
    let mut nonce = [0u8; 12];
    OsRng.fill_bytes(&mut nonce);
    let key = derive_key(passphrase, &salt);
    let sealed = ChaCha20Poly1305::new(&key.into())
        .encrypt(Nonce::from_slice(&nonce), store.encode().as_slice())
        .expect("in-memory encryption");
    let mut file = Vec::with_capacity(MAGIC.len() + 28 + sealed.len());
    file.extend_from_slice(MAGIC);
    file.extend_from_slice(&salt);
    file.extend_from_slice(&nonce);
    file.extend_from_slice(&sealed);
    std::fs::write(path, file)?;
    Ok(())
}

pub fn load(path: &Path, passphrase: &str) -> Result<KeyStore, KeyStoreError> {
    let bytes = std::fs::read(path)?;
    if bytes.len() < MAGIC.len() + 28 || &bytes[..MAGIC.len()] != MAGIC {
        return Err(KeyStoreError::Malformed("bad header"));
    }
    let salt: [u8; 16] = bytes[7..23].try_into().unwrap();
    let nonce: [u8; 12] = bytes[23..35].try_into().unwrap();
    let key = derive_key(passphrase, &salt);
    let plaintext = ChaCha20Poly1305::new(&key.into())
        .decrypt(Nonce::from_slice(&nonce), &bytes[35..])
        .map_err(|_| KeyStoreError::Unsealed)?;
    KeyStore::decode(&plaintext)
}

/// Rebuilds the typed key material from a store plus the public commitment
/// records.
pub fn to_key_material(
    store: &KeyStore,
    gammas: std::collections::BTreeMap<u16, tse_core::commit::PedersenCommitment<Secp256k1>>,
) -> Result<tse_core::dkg::KeyMaterial<Secp256k1>, KeyStoreError> {
    let value = Secp256k1::scalar_decode(&store.share_value)
        .map_err(|_| KeyStoreError::Malformed("share value"))?;
    let rand = Secp256k1::scalar_decode(&store.rand)
        .map_err(|_| KeyStoreError::Malformed("randomness"))?;
    Ok(tse_core::dkg::KeyMaterial {
        share: tse_core::sharing::SecretShare {
            index: store.index,
            value,
            epoch: store.epoch,
        },
        rand,
        gammas,
    })
}
