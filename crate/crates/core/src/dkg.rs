//! Dealer-free key generation and proactive key refresh.
//!
//! Every participant deals a fresh sharing of its own secret (a zero secret
//! during refresh), sums the shares it receives into its key share, and
//! publishes a Pedersen commitment to that share. Once all commitments are
//! visible, each participant independently runs a threshold-validation test:
//! it derives a test message bound to the published commitments, collects
//! proven partial evaluations from everyone, and asserts that
//!
//! * a subset of size exactly `k` combines to the same value as all `n`
//!   (a dealer that used a too-high polynomial degree breaks this),
//! * a subset of size `k - 1` combines to a different value (a too-low
//!   effective degree breaks this),
//! * the combined value is not the identity (a zero secret breaks this),
//! * during refresh, the old keys and the new keys combine to the same
//!   value on the same input (a refresh dealer sharing a nonzero secret
//!   breaks this).
//!
//! Any failed assertion or rejected proof aborts the instance; the protocol
//! has no recovery path and must be restarted from scratch.
//!
//! [`SetupTranscript`] is a sans-io state machine: the network layer feeds
//! it received values and sends whatever it hands back. All messages for one
//! instance are processed sequentially by a single owner.

use std::collections::BTreeMap;

use rand_core::{CryptoRng, RngCore};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::cipher::{dprf_input, RHO_LEN};
use crate::commit::{hash_commit, pedersen_commit, HashCommitment, PedersenCommitment};
use crate::dprf::{
    npr_combine, ssnpr_combine_at, ssnpr_evaluate_at, DprfError, EvalInput, PartialEval,
};
use crate::group::{random_scalar, Group, GroupParams};
use crate::sharing::{shares_from_polynomial, Polynomial, SecretShare, ShareSet, SharingError};

/// Protocol phase of one setup or refresh instance. Transitions are
/// monotone: `Dealing -> Committing -> Testing -> {Done, Aborted}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    Dealing,
    Committing,
    Testing,
    Done,
    Aborted,
}

/// Why an instance was aborted. Every reason requires restarting the setup
/// from the beginning.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum AbortReason {
    /// The size-`k` subset disagreed with the full combine: some dealer used
    /// a polynomial of degree greater than `k - 1`.
    #[error("k-subset combine disagrees with the full combine (degree too high)")]
    DegreeTooHigh,
    /// The size-`k-1` subset already agreed with the full combine.
    #[error("(k-1)-subset combine equals the full combine (degree too low)")]
    DegreeTooLow,
    /// The combined test value is the group identity.
    #[error("combined test value is the identity")]
    IdentitySecret,
    /// A partial-evaluation proof failed during the test.
    #[error("proof from participant {0} rejected")]
    ProofRejected(u16),
    /// A peer never delivered a message we were waiting for.
    #[error("timed out waiting for participant {0}")]
    Timeout(u16),
    /// A dealt share never arrived.
    #[error("missing deal from participant {0}")]
    MissingDeal(u16),
    /// Refresh only: the refreshed keys evaluate differently from the old
    /// keys, so some dealer changed the shared secret.
    #[error("refreshed keys disagree with the previous epoch")]
    EpochMismatch,
}

/// Usage errors: the caller drove the transcript outside its contract.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DkgError {
    #[error("operation requires phase {expected:?}, transcript is in {actual:?}")]
    WrongPhase { expected: Phase, actual: Phase },
    #[error("participant index {0} is not in the roster")]
    UnknownParticipant(u16),
    #[error("duplicate deal from participant {0}")]
    DuplicateDeal(u16),
    #[error("duplicate commitment for participant {0}")]
    DuplicateCommitment(u16),
    #[error("duplicate test response from participant {0}")]
    DuplicateResponse(u16),
    #[error("not all deals have been received")]
    DealsIncomplete,
    #[error("not all commitments have been received")]
    CommitmentsIncomplete,
    #[error("not all test responses have been received")]
    ResponsesIncomplete,
    #[error("refresh requires the prior epoch {expected}, got {actual}")]
    WrongEpoch { expected: u32, actual: u32 },
    #[error(transparent)]
    Sharing(#[from] SharingError),
}

/// Public parameters of one instance, identical across all participants.
#[derive(Clone, Debug)]
pub struct InstanceParams<G: Group> {
    pub group: GroupParams<G>,
    pub k: u16,
    pub n: u16,
    /// Instance identifier chosen by the initiating party.
    pub instance: [u8; 16],
    /// Participant identifiers in index order (index `j` is `roster_ids[j-1]`).
    pub roster_ids: Vec<[u8; 16]>,
    /// The epoch this instance establishes: 0 for setup, prior + 1 for a
    /// refresh.
    pub epoch: u32,
}

/// Key material a participant holds for an established epoch.
#[derive(Clone, Debug)]
pub struct KeyMaterial<G: Group> {
    pub share: SecretShare<G>,
    /// Commitment randomness, needed to prove partial evaluations.
    pub rand: G::Scalar,
    pub gammas: BTreeMap<u16, PedersenCommitment<G>>,
}

/// Output of a completed instance.
#[derive(Clone, Debug)]
pub struct DkgSuccess<G: Group> {
    pub keys: KeyMaterial<G>,
    /// The combined DPRF value observed during the test.
    pub test_output: G::Element,
}

/// The test challenge a participant broadcasts: `x = id || alpha`.
#[derive(Clone, Debug)]
pub struct TestChallenge {
    pub x: Vec<u8>,
}

enum Mode<G: Group> {
    Setup,
    Refresh { prior: KeyMaterial<G> },
}

/// The message every participant derives for its test encryption, bound to
/// the public parameters and all published commitments.
pub fn h_test<G: Group>(
    params: &InstanceParams<G>,
    gammas: &BTreeMap<u16, PedersenCommitment<G>>,
) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(b"TSE-V01-h-test");
    hasher.update((G::ID.len() as u16).to_be_bytes());
    hasher.update(G::ID.as_bytes());
    let order = G::order().to_bytes_be();
    hasher.update((order.len() as u16).to_be_bytes());
    hasher.update(&order);
    hasher.update((G::order().bits() as u16).to_be_bytes());
    hasher.update(params.k.to_be_bytes());
    hasher.update(params.n.to_be_bytes());
    hasher.update(params.epoch.to_be_bytes());
    for id in &params.roster_ids {
        hasher.update(id);
    }
    for j in 1..=params.n {
        let enc = gammas
            .get(&j)
            .map(|c| G::element_encode(&c.gamma))
            .unwrap_or_default();
        hasher.update((enc.len() as u16).to_be_bytes());
        hasher.update(&enc);
    }
    hasher.finalize().into()
}

/// Per-participant state of one setup or refresh instance.
pub struct SetupTranscript<G: Group> {
    params: InstanceParams<G>,
    my_index: u16,
    mode: Mode<G>,
    phase: Phase,
    abort: Option<AbortReason>,
    /// Received partial keys, one per dealer (column `my_index`).
    dealt: BTreeMap<u16, G::Scalar>,
    my_share: Option<SecretShare<G>>,
    my_rand: Option<G::Scalar>,
    gammas: BTreeMap<u16, PedersenCommitment<G>>,
    test: Option<TestState<G>>,
}

struct TestState<G: Group> {
    input: EvalInput<G>,
    partials: BTreeMap<u16, PartialEval<G>>,
    old_partials: BTreeMap<u16, PartialEval<G>>,
}

impl<G: Group> SetupTranscript<G> {
    pub fn new_setup(params: InstanceParams<G>, my_index: u16) -> Result<Self, DkgError> {
        Self::new(params, my_index, Mode::Setup)
    }

    /// A refresh instance re-randomizing `prior`. The instance epoch must be
    /// exactly one past the prior share's epoch.
    pub fn new_refresh(
        params: InstanceParams<G>,
        my_index: u16,
        prior: KeyMaterial<G>,
    ) -> Result<Self, DkgError> {
        if params.epoch != prior.share.epoch + 1 {
            return Err(DkgError::WrongEpoch {
                expected: prior.share.epoch + 1,
                actual: params.epoch,
            });
        }
        Self::new(params, my_index, Mode::Refresh { prior })
    }

    fn new(params: InstanceParams<G>, my_index: u16, mode: Mode<G>) -> Result<Self, DkgError> {
        if my_index == 0 || my_index > params.n {
            return Err(DkgError::UnknownParticipant(my_index));
        }
        debug_assert_eq!(params.roster_ids.len(), params.n as usize);
        Ok(Self {
            params,
            my_index,
            mode,
            phase: Phase::Dealing,
            abort: None,
            dealt: BTreeMap::new(),
            my_share: None,
            my_rand: None,
            gammas: BTreeMap::new(),
            test: None,
        })
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn abort_reason(&self) -> Option<&AbortReason> {
        self.abort.as_ref()
    }

    pub fn params(&self) -> &InstanceParams<G> {
        &self.params
    }

    pub fn my_index(&self) -> u16 {
        self.my_index
    }

    pub fn my_id(&self) -> [u8; 16] {
        self.params.roster_ids[(self.my_index - 1) as usize]
    }

    fn is_refresh(&self) -> bool {
        matches!(self.mode, Mode::Refresh { .. })
    }

    /// Marks the instance aborted. Idempotent; the first reason wins.
    pub fn mark_aborted(&mut self, reason: AbortReason) {
        if self.phase != Phase::Done && self.abort.is_none() {
            self.abort = Some(reason);
            self.phase = Phase::Aborted;
        }
    }

    /// Deals this participant's contribution: a fresh uniform secret during
    /// setup, zero during refresh. The own share is retained locally; the
    /// caller sends `shares[j]` to every other participant `j` over its
    /// secure channel.
    pub fn deal<R: RngCore + CryptoRng>(&mut self, rng: &mut R) -> Result<ShareSet<G>, DkgError> {
        let secret = match self.mode {
            Mode::Setup => random_scalar::<G, _>(rng),
            Mode::Refresh { .. } => G::scalar_zero(),
        };
        let poly = Polynomial::<G>::random(secret, (self.params.k - 1) as usize, rng);
        self.deal_with_polynomial(&poly)
    }

    /// Deals from an explicit polynomial. This is the hook the simulation
    /// harness uses to model misbehaving dealers (wrong degree, nonzero
    /// refresh secret); the test phase is what must catch them.
    pub fn deal_with_polynomial(&mut self, poly: &Polynomial<G>) -> Result<ShareSet<G>, DkgError> {
        self.expect_phase(Phase::Dealing)?;
        let set = shares_from_polynomial(self.params.k, self.params.n, poly)?;
        let own = set
            .share_for(self.my_index)
            .expect("own index is within 1..=n")
            .clone();
        self.record_deal(self.my_index, own)?;
        Ok(set)
    }

    /// Records the partial key received from dealer `from`.
    pub fn record_deal(&mut self, from: u16, value: G::Scalar) -> Result<(), DkgError> {
        self.expect_phase(Phase::Dealing)?;
        if from == 0 || from > self.params.n {
            return Err(DkgError::UnknownParticipant(from));
        }
        if self.dealt.insert(from, value).is_some() {
            return Err(DkgError::DuplicateDeal(from));
        }
        Ok(())
    }

    pub fn deals_complete(&self) -> bool {
        self.dealt.len() == self.params.n as usize
    }

    pub fn missing_dealers(&self) -> Vec<u16> {
        (1..=self.params.n)
            .filter(|j| !self.dealt.contains_key(j))
            .collect()
    }

    /// Sums the received partial keys into this participant's share and
    /// commits to it with fresh randomness. During refresh the prior share
    /// value joins the sum, leaving the shared secret unchanged.
    ///
    /// Moves the transcript to `Committing`; the caller publishes the
    /// returned commitment.
    pub fn aggregate<R: RngCore + CryptoRng>(
        &mut self,
        rng: &mut R,
    ) -> Result<(SecretShare<G>, PedersenCommitment<G>), DkgError> {
        self.expect_phase(Phase::Dealing)?;
        if !self.deals_complete() {
            return Err(DkgError::DealsIncomplete);
        }
        let mut value = G::scalar_zero();
        for v in self.dealt.values() {
            value = G::scalar_add(&value, v);
        }
        if let Mode::Refresh { prior } = &self.mode {
            value = G::scalar_add(&value, &prior.share.value);
        }
        let share = SecretShare {
            index: self.my_index,
            value,
            epoch: self.params.epoch,
        };
        let rand = random_scalar::<G, _>(rng);
        let gamma = pedersen_commit(&self.params.group, &share.value, &rand);
        self.my_share = Some(share.clone());
        self.my_rand = Some(rand);
        self.phase = Phase::Committing;
        Ok((share, gamma))
    }

    /// Records participant `j`'s published commitment for this epoch.
    pub fn record_commitment(
        &mut self,
        j: u16,
        gamma: PedersenCommitment<G>,
    ) -> Result<(), DkgError> {
        self.expect_phase(Phase::Committing)?;
        if j == 0 || j > self.params.n {
            return Err(DkgError::UnknownParticipant(j));
        }
        if self.gammas.insert(j, gamma).is_some() {
            return Err(DkgError::DuplicateCommitment(j));
        }
        Ok(())
    }

    pub fn commitments_complete(&self) -> bool {
        self.gammas.len() == self.params.n as usize
    }

    /// Enters the test phase: derives the bound test message, commits to it
    /// and returns the challenge `x = id || alpha` to send to every
    /// participant (including this one, through the same path).
    pub fn begin_test<R: RngCore + CryptoRng>(
        &mut self,
        rng: &mut R,
    ) -> Result<TestChallenge, DkgError> {
        self.expect_phase(Phase::Committing)?;
        if !self.commitments_complete() {
            return Err(DkgError::CommitmentsIncomplete);
        }
        let m = h_test(&self.params, &self.gammas);
        let mut rho = [0u8; RHO_LEN];
        rng.fill_bytes(&mut rho);
        let alpha = hash_commit(&m, &rho).expect("32-byte message and randomness");
        let x = dprf_input(&self.my_id(), &alpha.alpha);
        self.test = Some(TestState {
            input: EvalInput::derive(&x),
            partials: BTreeMap::new(),
            old_partials: BTreeMap::new(),
        });
        self.phase = Phase::Testing;
        Ok(TestChallenge { x })
    }

    /// The commitment this participant derived for the test input, for
    /// callers that want the pieces.
    pub fn test_commitment(&self, m: &[u8; 32], rho: &[u8; RHO_LEN]) -> HashCommitment {
        hash_commit(m, rho).expect("fixed lengths")
    }

    /// Answers another participant's (or our own) test challenge.
    ///
    /// Only legal once this transcript reached `Testing`, which implies all
    /// commitments were visible here first. Returns the new-epoch partial
    /// and, during refresh, the prior-epoch partial alongside.
    pub fn answer_test_request<R: RngCore + CryptoRng>(
        &self,
        x: &[u8],
        rng: &mut R,
    ) -> Result<(PartialEval<G>, Option<PartialEval<G>>), DkgError> {
        self.expect_phase(Phase::Testing)?;
        let share = self.my_share.as_ref().expect("set when entering Testing");
        let rand = self.my_rand.as_ref().expect("set when entering Testing");
        let gamma = &self.gammas[&self.my_index];
        let input = EvalInput::derive(x);
        let fresh = ssnpr_evaluate_at(
            &self.params.group,
            &share.value,
            rand,
            gamma,
            self.my_index,
            &input,
            rng,
        );
        let old = match &self.mode {
            Mode::Setup => None,
            Mode::Refresh { prior } => Some(ssnpr_evaluate_at(
                &self.params.group,
                &prior.share.value,
                &prior.rand,
                &prior.gammas[&self.my_index],
                self.my_index,
                &input,
                rng,
            )),
        };
        Ok((fresh, old))
    }

    /// Records participant `j`'s response to our own test challenge.
    pub fn record_test_response(
        &mut self,
        j: u16,
        fresh: PartialEval<G>,
        old: Option<PartialEval<G>>,
    ) -> Result<(), DkgError> {
        self.expect_phase(Phase::Testing)?;
        if j == 0 || j > self.params.n {
            return Err(DkgError::UnknownParticipant(j));
        }
        let test = self.test.as_mut().expect("set when entering Testing");
        if test.partials.insert(j, fresh).is_some() {
            return Err(DkgError::DuplicateResponse(j));
        }
        if let Some(old) = old {
            test.old_partials.insert(j, old);
        }
        Ok(())
    }

    pub fn responses_complete(&self) -> bool {
        match &self.test {
            Some(t) => {
                t.partials.len() == self.params.n as usize
                    && (!self.is_refresh() || t.old_partials.len() == self.params.n as usize)
            }
            None => false,
        }
    }

    pub fn missing_responders(&self) -> Vec<u16> {
        let have: Vec<u16> = match &self.test {
            Some(t) => t.partials.keys().copied().collect(),
            None => Vec::new(),
        };
        (1..=self.params.n).filter(|j| !have.contains(j)).collect()
    }

    /// Runs the threshold-validation assertions over the collected partials
    /// and settles the instance.
    ///
    /// On success the prior-epoch key material is dropped and the new epoch
    /// becomes this participant's key. Any failure aborts the instance.
    pub fn finalize(&mut self) -> Result<DkgSuccess<G>, AbortReason> {
        if self.phase != Phase::Testing || !self.responses_complete() {
            let missing = self.missing_responders().first().copied().unwrap_or(0);
            let reason = AbortReason::Timeout(missing);
            self.mark_aborted(reason.clone());
            return Err(reason);
        }
        let test = self.test.as_ref().expect("in Testing");
        let pp = &self.params.group;

        // Verify every proof and combine over all n participants.
        let full = match ssnpr_combine_at(pp, &test.partials, &self.gammas, &test.input) {
            Ok(v) => v,
            Err(e) => {
                let reason = match e {
                    DprfError::ProofRejected(j) | DprfError::MissingCommitment(j) => {
                        AbortReason::ProofRejected(j)
                    }
                    DprfError::Sharing(_) => AbortReason::Timeout(0),
                };
                self.mark_aborted(reason.clone());
                return Err(reason);
            }
        };

        // Refresh: the previous keys must evaluate to the same value.
        if let Mode::Refresh { prior } = &self.mode {
            let old_full =
                match ssnpr_combine_at(pp, &test.old_partials, &prior.gammas, &test.input) {
                    Ok(v) => v,
                    Err(e) => {
                        let reason = match e {
                            DprfError::ProofRejected(j) | DprfError::MissingCommitment(j) => {
                                AbortReason::ProofRejected(j)
                            }
                            DprfError::Sharing(_) => AbortReason::Timeout(0),
                        };
                        self.mark_aborted(reason.clone());
                        return Err(reason);
                    }
                };
            if old_full != full {
                self.mark_aborted(AbortReason::EpochMismatch);
                return Err(AbortReason::EpochMismatch);
            }
        }

        // Proofs are verified; the subset assertions interpolate the plain
        // values.
        let values: BTreeMap<u16, G::Element> = test
            .partials
            .iter()
            .map(|(&j, p)| (j, p.h.clone()))
            .collect();
        let k = self.params.k;

        let subset_k: BTreeMap<u16, G::Element> = values
            .iter()
            .filter(|(&j, _)| j <= k)
            .map(|(&j, v)| (j, v.clone()))
            .collect();
        let combined_k = npr_combine::<G>(&subset_k).expect("k >= 1 distinct points");
        if combined_k != full {
            self.mark_aborted(AbortReason::DegreeTooHigh);
            return Err(AbortReason::DegreeTooHigh);
        }

        if k > 1 {
            let subset_t: BTreeMap<u16, G::Element> = values
                .iter()
                .filter(|(&j, _)| j < k)
                .map(|(&j, v)| (j, v.clone()))
                .collect();
            let combined_t = npr_combine::<G>(&subset_t).expect("k - 1 >= 1 distinct points");
            if combined_t == full {
                self.mark_aborted(AbortReason::DegreeTooLow);
                return Err(AbortReason::DegreeTooLow);
            }
        }

        if full == G::identity() {
            self.mark_aborted(AbortReason::IdentitySecret);
            return Err(AbortReason::IdentitySecret);
        }

        self.phase = Phase::Done;
        let keys = KeyMaterial {
            share: self.my_share.clone().expect("aggregated"),
            rand: self.my_rand.clone().expect("aggregated"),
            gammas: self.gammas.clone(),
        };
        // Old material becomes obsolete the moment the new epoch is live.
        self.mode = Mode::Setup;
        Ok(DkgSuccess {
            keys,
            test_output: full,
        })
    }

    fn expect_phase(&self, expected: Phase) -> Result<(), DkgError> {
        if self.phase != expected {
            return Err(DkgError::WrongPhase {
                expected,
                actual: self.phase,
            });
        }
        Ok(())
    }
}
