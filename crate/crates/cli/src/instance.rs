//! On-disk layout of a deployment and (re)construction of the in-process
//! runtime from it.
//!
//! A store directory contains `roster.json`, the append-only `storage.log`
//! with commitments and public parameter records, and one encrypted
//! `party-<j>.keystore` per participant.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand_core::{OsRng, RngCore};
use thiserror::Error;

use tse_core::commit::PedersenCommitment;
use tse_core::group::{Group, GroupParams, Secp256k1};
use tse_net::identity::Roster;
use tse_net::sim::{RestoredMember, SimNetwork};
use tse_net::storage::{PublicStorage, RecordKind, StorageError};

use crate::keystore::{self, KeyStore, KeyStoreError};

pub const ROSTER_FILE: &str = "roster.json";
pub const STORAGE_FILE: &str = "storage.log";

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("store directory problem: {0}")]
    Layout(String),
    #[error("key stores disagree on deployment parameters")]
    Inconsistent,
    #[error("missing commitment record for participant {0}")]
    MissingCommitment(u16),
    #[error(transparent)]
    KeyStore(#[from] KeyStoreError),
    #[error(transparent)]
    Storage(#[from] StorageError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub fn keystore_path(dir: &Path, index: u16) -> PathBuf {
    dir.join(format!("party-{index}.keystore"))
}

pub fn read_roster(dir: &Path) -> Result<Roster, InstanceError> {
    let text = std::fs::read_to_string(dir.join(ROSTER_FILE))?;
    serde_json::from_str(&text).map_err(|e| InstanceError::Layout(format!("roster.json: {e}")))
}

pub fn write_roster(dir: &Path, roster: &Roster) -> Result<(), InstanceError> {
    let text = serde_json::to_string_pretty(roster)
        .map_err(|e| InstanceError::Layout(format!("roster serialization: {e}")))?;
    std::fs::write(dir.join(ROSTER_FILE), text)?;
    Ok(())
}

/// Lists the participant indices that have a key store in the directory.
pub fn available_indices(dir: &Path, n: u16) -> Vec<u16> {
    (1..=n)
        .filter(|&j| keystore_path(dir, j).exists())
        .collect()
}

/// A deployment loaded back from disk for the given members.
pub struct LoadedInstance {
    pub roster: Roster,
    pub storage: Arc<PublicStorage>,
    pub stores: Vec<KeyStore>,
}

impl LoadedInstance {
    pub fn load(dir: &Path, members: &[u16], passphrase: &str) -> Result<Self, InstanceError> {
        let roster = read_roster(dir)?;
        let storage = Arc::new(PublicStorage::open(&dir.join(STORAGE_FILE))?);
        let mut stores = Vec::new();
        for &j in members {
            stores.push(keystore::load(&keystore_path(dir, j), passphrase)?);
        }
        let first = stores.first().ok_or_else(|| {
            InstanceError::Layout("at least one participant key store is required".into())
        })?;
        for s in &stores[1..] {
            if (s.instance, s.k, s.n, s.epoch, &s.h_seed)
                != (first.instance, first.k, first.n, first.epoch, &first.h_seed)
            {
                return Err(InstanceError::Inconsistent);
            }
        }
        if roster.len() != first.n {
            return Err(InstanceError::Inconsistent);
        }
        Ok(Self {
            roster,
            storage,
            stores,
        })
    }

    pub fn k(&self) -> u16 {
        self.stores[0].k
    }

    pub fn n(&self) -> u16 {
        self.stores[0].n
    }

    pub fn epoch(&self) -> u32 {
        self.stores[0].epoch
    }

    pub fn instance(&self) -> [u8; 16] {
        self.stores[0].instance
    }

    fn gammas(&self) -> Result<BTreeMap<u16, PedersenCommitment<Secp256k1>>, InstanceError> {
        let mut gammas = BTreeMap::new();
        for j in 1..=self.n() {
            let records = self
                .storage
                .list(&self.instance(), RecordKind::Commitment, self.epoch());
            let record = records
                .iter()
                .find(|r| r.key.issuer == j)
                .ok_or(InstanceError::MissingCommitment(j))?;
            let gamma = Secp256k1::element_decode(&record.value)
                .map_err(|_| InstanceError::MissingCommitment(j))?;
            gammas.insert(j, PedersenCommitment { gamma });
        }
        Ok(gammas)
    }

    /// Spins the loaded members up as an in-process network ready for
    /// encryption, decryption or refresh.
    pub fn into_network(self) -> Result<SimNetwork<Secp256k1>, InstanceError> {
        let gammas = self.gammas()?;
        let group = GroupParams::<Secp256k1>::derive(&self.stores[0].h_seed);
        let mut members = Vec::new();
        for store in &self.stores {
            members.push(RestoredMember {
                index: store.index,
                static_secret: store.static_secret,
                instance: store.instance,
                keys: keystore::to_key_material(store, gammas.clone())?,
            });
        }
        let mut seed = [0u8; 8];
        OsRng.fill_bytes(&mut seed);
        Ok(SimNetwork::restore(
            self.k(),
            self.roster,
            group,
            self.storage,
            members,
            u64::from_be_bytes(seed),
            2_000,
        ))
    }
}

/// Persists every participant's key material after a completed setup or
/// refresh.
pub fn persist_from_network(
    dir: &Path,
    net: &SimNetwork<Secp256k1>,
    passphrase: &str,
) -> Result<(), InstanceError> {
    let n = net.roster().len();
    for j in 1..=n {
        let km = net
            .node(j)
            .key_material()
            .ok_or_else(|| InstanceError::Layout(format!("node {j} holds no keys")))?;
        let instance = net
            .node(j)
            .current_instance()
            .expect("installed with key material");
        let store = KeyStore {
            group_id: Secp256k1::ID.into(),
            instance,
            k: net.node(j).params_record().expect("installed").k,
            n,
            epoch: km.share.epoch,
            index: j,
            share_value: Secp256k1::scalar_encode(&km.share.value),
            rand: Secp256k1::scalar_encode(&km.rand),
            static_secret: net.local_identity(j).static_secret.to_bytes(),
            h_seed: net.group_params().h_seed.clone(),
        };
        keystore::save(&keystore_path(dir, j), passphrase, &store)?;
    }
    Ok(())
}
