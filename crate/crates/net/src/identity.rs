//! Participant identities and the roster.
//!
//! A participant is known by a 16-byte identifier, a transport address and a
//! 32-byte static public key used to authenticate its pairwise channels.
//! Protocol indices are positions in the roster: participant `j` is
//! `roster.participants[j - 1]`.

use serde::{Deserialize, Serialize};
use thiserror::Error;
use x25519_dalek::{PublicKey, StaticSecret};

pub const PARTICIPANT_ID_LEN: usize = 16;
pub type ParticipantId = [u8; PARTICIPANT_ID_LEN];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RosterError {
    #[error("duplicate participant id in roster")]
    DuplicateId,
    #[error("participant {0} not in roster")]
    UnknownIndex(u16),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParticipantIdentity {
    #[serde(with = "hex_array_16")]
    pub id: ParticipantId,
    pub address: String,
    #[serde(with = "hex_array_32")]
    pub static_public_key: [u8; 32],
}

/// The ordered participant list shared by everyone in a deployment.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Roster {
    pub participants: Vec<ParticipantIdentity>,
}

impl Roster {
    pub fn new(participants: Vec<ParticipantIdentity>) -> Result<Self, RosterError> {
        let mut seen = std::collections::HashSet::new();
        for p in &participants {
            if !seen.insert(p.id) {
                return Err(RosterError::DuplicateId);
            }
        }
        Ok(Self { participants })
    }

    pub fn len(&self) -> u16 {
        self.participants.len() as u16
    }

    pub fn is_empty(&self) -> bool {
        self.participants.is_empty()
    }

    /// 1-based protocol index.
    pub fn by_index(&self, index: u16) -> Result<&ParticipantIdentity, RosterError> {
        if index == 0 || index > self.len() {
            return Err(RosterError::UnknownIndex(index));
        }
        Ok(&self.participants[(index - 1) as usize])
    }

    pub fn index_of(&self, id: &ParticipantId) -> Option<u16> {
        self.participants
            .iter()
            .position(|p| &p.id == id)
            .map(|i| i as u16 + 1)
    }

    pub fn ids(&self) -> Vec<ParticipantId> {
        self.participants.iter().map(|p| p.id).collect()
    }
}

/// A participant's own identity plus the static channel secret.
#[derive(Clone)]
pub struct LocalIdentity {
    pub identity: ParticipantIdentity,
    pub static_secret: StaticSecret,
}

impl LocalIdentity {
    /// Builds a fresh identity from raw key material.
    pub fn from_parts(id: ParticipantId, address: String, secret: [u8; 32]) -> Self {
        let static_secret = StaticSecret::from(secret);
        let identity = ParticipantIdentity {
            id,
            address,
            static_public_key: PublicKey::from(&static_secret).to_bytes(),
        };
        Self {
            identity,
            static_secret,
        }
    }
}

impl std::fmt::Debug for LocalIdentity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LocalIdentity")
            .field("identity", &self.identity)
            .finish_non_exhaustive()
    }
}

macro_rules! hex_array_mod {
    ($name:ident, $len:expr) => {
        mod $name {
            use serde::{Deserialize, Deserializer, Serializer};

            pub fn serialize<S: Serializer>(v: &[u8; $len], s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(&hex::encode(v))
            }

            pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[u8; $len], D::Error> {
                let text = String::deserialize(d)?;
                let bytes = hex::decode(&text).map_err(serde::de::Error::custom)?;
                bytes
                    .try_into()
                    .map_err(|_| serde::de::Error::custom("wrong length"))
            }
        }
    };
}

hex_array_mod!(hex_array_16, 16);
hex_array_mod!(hex_array_32, 32);
