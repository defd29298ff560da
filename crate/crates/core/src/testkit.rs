//! Test-only oracles.
//!
//! The dealer-based key generation here matches what a trusted dealer would
//! do: sample the secret, share it, and commit to every share. The product
//! protocol never runs this path; tests use it as an independent reference
//! for what the dealer-free setup must be equivalent to.

use std::collections::BTreeMap;

use rand_core::{CryptoRng, RngCore};

use crate::commit::{pedersen_commit, PedersenCommitment};
use crate::group::{random_scalar, Group, GroupParams};
use crate::sharing::{generate_shares, SecretShare, SharingError};

/// Everything a dealer would hand out, plus the secret itself for
/// test assertions.
pub struct DealerSetup<G: Group> {
    pub secret: G::Scalar,
    pub shares: BTreeMap<u16, SecretShare<G>>,
    pub rands: BTreeMap<u16, G::Scalar>,
    pub gammas: BTreeMap<u16, PedersenCommitment<G>>,
}

/// Dealer-based DPRF key generation: one trusted party samples the secret,
/// shares it and publishes a Pedersen commitment per share.
pub fn dealer_generate<G: Group, R: RngCore + CryptoRng>(
    pp: &GroupParams<G>,
    k: u16,
    n: u16,
    rng: &mut R,
) -> Result<DealerSetup<G>, SharingError> {
    let secret = random_scalar::<G, _>(rng);
    let set = generate_shares::<G, _>(k, n, &secret, rng)?;
    let mut shares = BTreeMap::new();
    let mut rands = BTreeMap::new();
    let mut gammas = BTreeMap::new();
    for (&j, value) in &set.shares {
        let r = random_scalar::<G, _>(rng);
        gammas.insert(j, pedersen_commit(pp, value, &r));
        rands.insert(j, r);
        shares.insert(
            j,
            SecretShare {
                index: j,
                value: value.clone(),
                epoch: 0,
            },
        );
    }
    Ok(DealerSetup {
        secret,
        shares,
        rands,
        gammas,
    })
}
