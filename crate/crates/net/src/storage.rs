//! Append-only public storage.
//!
//! Holds commitments, public parameter records and ciphertexts, never any
//! secret material. Records are keyed by `(instance, kind, epoch, issuer)`
//! and writes never overwrite: a duplicate key is rejected. The in-memory
//! store is linearizable behind a mutex; the persistent variant appends
//! length-prefixed records to a log file.

use std::collections::HashSet;
use std::fs::{File, OpenOptions};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use thiserror::Error;

use crate::identity::{ParticipantId, ParticipantIdentity, Roster};

#[derive(Debug, Error)]
pub enum StorageError {
    #[error("record already exists for this key")]
    Duplicate,
    #[error("corrupt storage log: {0}")]
    Corrupt(&'static str),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RecordKind {
    Commitment,
    PublicParams,
    Ciphertext,
}

impl RecordKind {
    fn tag(self) -> u8 {
        match self {
            RecordKind::Commitment => 1,
            RecordKind::PublicParams => 2,
            RecordKind::Ciphertext => 3,
        }
    }

    fn from_tag(tag: u8) -> Result<Self, StorageError> {
        Ok(match tag {
            1 => RecordKind::Commitment,
            2 => RecordKind::PublicParams,
            3 => RecordKind::Ciphertext,
            _ => return Err(StorageError::Corrupt("unknown record kind")),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RecordKey {
    pub instance: ParticipantId,
    pub kind: RecordKind,
    pub epoch: u32,
    pub issuer: u16,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Record {
    pub key: RecordKey,
    pub value: Vec<u8>,
}

const KEY_LEN: usize = 16 + 1 + 4 + 2;

impl Record {
    fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(4 + KEY_LEN + self.value.len());
        out.extend_from_slice(&((KEY_LEN + self.value.len()) as u32).to_be_bytes());
        out.extend_from_slice(&self.key.instance);
        out.push(self.key.kind.tag());
        out.extend_from_slice(&self.key.epoch.to_be_bytes());
        out.extend_from_slice(&self.key.issuer.to_be_bytes());
        out.extend_from_slice(&self.value);
        out
    }
}

/// The shared append-only record store.
pub struct PublicStorage {
    inner: Mutex<Inner>,
    path: Option<PathBuf>,
}

struct Inner {
    records: Vec<Record>,
    keys: HashSet<RecordKey>,
    file: Option<File>,
}

impl PublicStorage {
    pub fn in_memory() -> Self {
        Self {
            inner: Mutex::new(Inner {
                records: Vec::new(),
                keys: HashSet::new(),
                file: None,
            }),
            path: None,
        }
    }

    /// Opens (or creates) a persistent log, loading any existing records.
    pub fn open(path: &Path) -> Result<Self, StorageError> {
        let mut records = Vec::new();
        let mut keys = HashSet::new();
        if path.exists() {
            let mut bytes = Vec::new();
            File::open(path)?.read_to_end(&mut bytes)?;
            let mut at = 0usize;
            while at < bytes.len() {
                if at + 4 > bytes.len() {
                    return Err(StorageError::Corrupt("truncated length prefix"));
                }
                let len = u32::from_be_bytes(bytes[at..at + 4].try_into().unwrap()) as usize;
                at += 4;
                if len < KEY_LEN || at + len > bytes.len() {
                    return Err(StorageError::Corrupt("truncated record"));
                }
                let rec = &bytes[at..at + len];
                at += len;
                let key = RecordKey {
                    instance: rec[..16].try_into().unwrap(),
                    kind: RecordKind::from_tag(rec[16])?,
                    epoch: u32::from_be_bytes(rec[17..21].try_into().unwrap()),
                    issuer: u16::from_be_bytes(rec[21..23].try_into().unwrap()),
                };
                if !keys.insert(key) {
                    return Err(StorageError::Corrupt("duplicate key in log"));
                }
                records.push(Record {
                    key,
                    value: rec[KEY_LEN..].to_vec(),
                });
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self {
            inner: Mutex::new(Inner {
                records,
                keys,
                file: Some(file),
            }),
            path: Some(path.to_path_buf()),
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    /// Appends a record. Fails if the key is already present; nothing is
    /// ever overwritten.
    pub fn append(&self, record: Record) -> Result<(), StorageError> {
        let mut inner = self.inner.lock().expect("storage poisoned");
        if !inner.keys.insert(record.key) {
            return Err(StorageError::Duplicate);
        }
        if let Some(file) = inner.file.as_mut() {
            file.write_all(&record.encode())?;
            file.flush()?;
        }
        inner.records.push(record);
        Ok(())
    }

    pub fn get(&self, key: &RecordKey) -> Option<Vec<u8>> {
        let inner = self.inner.lock().expect("storage poisoned");
        inner
            .records
            .iter()
            .find(|r| &r.key == key)
            .map(|r| r.value.clone())
    }

    /// All records for `(instance, kind, epoch)` in append order.
    pub fn list(&self, instance: &ParticipantId, kind: RecordKind, epoch: u32) -> Vec<Record> {
        let inner = self.inner.lock().expect("storage poisoned");
        inner
            .records
            .iter()
            .filter(|r| r.key.instance == *instance && r.key.kind == kind && r.key.epoch == epoch)
            .cloned()
            .collect()
    }

    pub fn snapshot(&self) -> Vec<Record> {
        self.inner.lock().expect("storage poisoned").records.clone()
    }

    pub fn len(&self) -> usize {
        self.inner.lock().expect("storage poisoned").records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// The final public parameters of an established epoch; everything a new
/// reader needs to verify and use the deployment.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PublicParamsRecord {
    pub group_id: String,
    /// Hash-to-group suite identifier.
    pub hash_suite: String,
    /// Big-endian group order.
    pub order: Vec<u8>,
    pub k: u16,
    pub n: u16,
    pub epoch: u32,
    pub h_seed: Vec<u8>,
    pub roster: Roster,
}

impl PublicParamsRecord {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        let put = |out: &mut Vec<u8>, bytes: &[u8]| {
            out.extend_from_slice(&(bytes.len() as u16).to_be_bytes());
            out.extend_from_slice(bytes);
        };
        put(&mut out, self.group_id.as_bytes());
        put(&mut out, self.hash_suite.as_bytes());
        put(&mut out, &self.order);
        out.extend_from_slice(&self.k.to_be_bytes());
        out.extend_from_slice(&self.n.to_be_bytes());
        out.extend_from_slice(&self.epoch.to_be_bytes());
        put(&mut out, &self.h_seed);
        out.extend_from_slice(&(self.roster.participants.len() as u16).to_be_bytes());
        for p in &self.roster.participants {
            out.extend_from_slice(&p.id);
            put(&mut out, p.address.as_bytes());
            out.extend_from_slice(&p.static_public_key);
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, StorageError> {
        let mut at = 0usize;
        let take = |at: &mut usize, n: usize| -> Result<&[u8], StorageError> {
            if *at + n > bytes.len() {
                return Err(StorageError::Corrupt("truncated params record"));
            }
            let out = &bytes[*at..*at + n];
            *at += n;
            Ok(out)
        };
        let take_var = |at: &mut usize| -> Result<Vec<u8>, StorageError> {
            let len = u16::from_be_bytes(take(at, 2)?.try_into().unwrap()) as usize;
            Ok(take(at, len)?.to_vec())
        };
        let group_id = String::from_utf8(take_var(&mut at)?)
            .map_err(|_| StorageError::Corrupt("group id not utf8"))?;
        let hash_suite = String::from_utf8(take_var(&mut at)?)
            .map_err(|_| StorageError::Corrupt("hash suite not utf8"))?;
        let order = take_var(&mut at)?;
        let k = u16::from_be_bytes(take(&mut at, 2)?.try_into().unwrap());
        let n = u16::from_be_bytes(take(&mut at, 2)?.try_into().unwrap());
        let epoch = u32::from_be_bytes(take(&mut at, 4)?.try_into().unwrap());
        let h_seed = take_var(&mut at)?;
        let count = u16::from_be_bytes(take(&mut at, 2)?.try_into().unwrap());
        let mut participants = Vec::with_capacity(count as usize);
        for _ in 0..count {
            let id: ParticipantId = take(&mut at, 16)?.try_into().unwrap();
            let address = String::from_utf8(take_var(&mut at)?)
                .map_err(|_| StorageError::Corrupt("address not utf8"))?;
            let static_public_key: [u8; 32] = take(&mut at, 32)?.try_into().unwrap();
            participants.push(ParticipantIdentity {
                id,
                address,
                static_public_key,
            });
        }
        if at != bytes.len() {
            return Err(StorageError::Corrupt("trailing bytes in params record"));
        }
        let roster =
            Roster::new(participants).map_err(|_| StorageError::Corrupt("invalid roster"))?;
        Ok(Self {
            group_id,
            hash_suite,
            order,
            k,
            n,
            epoch,
            h_seed,
            roster,
        })
    }
}
