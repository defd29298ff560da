//! Scenario harness: spins up a full deployment in one process and runs
//! honest or adversarial scripts against it, returning a machine-readable
//! trace.

use std::str::FromStr;

use rand_chacha::ChaCha20Rng;

use tse_core::dprf::{npr_combine, ssnpr_evaluate, PartialEval};
use tse_core::group::{Group, Secp256k1};

use crate::coordinator::CoordinatorBehavior;
use crate::node::{Behavior, TamperField};
use crate::sim::{SimConfig, SimNetwork};
use crate::trace::Trace;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scenario {
    Honest,
    MaliciousDealerHighDegree,
    TamperedEval,
    OfflineSubset,
    MaliciousCoordinator,
    RefreshMixEpochs,
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::Honest => "honest",
            Scenario::MaliciousDealerHighDegree => "malicious_dealer_high_degree",
            Scenario::TamperedEval => "tampered_eval",
            Scenario::OfflineSubset => "offline_subset",
            Scenario::MaliciousCoordinator => "malicious_coordinator",
            Scenario::RefreshMixEpochs => "refresh_mix_epochs",
        }
    }

    pub fn all() -> [Scenario; 6] {
        [
            Scenario::Honest,
            Scenario::MaliciousDealerHighDegree,
            Scenario::TamperedEval,
            Scenario::OfflineSubset,
            Scenario::MaliciousCoordinator,
            Scenario::RefreshMixEpochs,
        ]
    }
}

impl FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scenario::all()
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Scenario::all().iter().map(|s| s.name()).collect();
                format!(
                    "unknown scenario '{s}', expected one of: {}",
                    names.join(", ")
                )
            })
    }
}

/// Runs one scenario on the production group.
pub fn harness_run(n: u16, k: u16, scenario: Scenario, seed: u64) -> Trace {
    harness_run_in::<Secp256k1>(n, k, scenario, seed)
}

/// Runs one scenario on an arbitrary group instantiation.
pub fn harness_run_in<G: Group>(n: u16, k: u16, scenario: Scenario, seed: u64) -> Trace {
    let mut config = SimConfig::honest(n, k, seed);
    match scenario {
        Scenario::Honest => {}
        Scenario::MaliciousDealerHighDegree => {
            // Dealer 1 uses degree k instead of k - 1.
            let mut behaviors = vec![Behavior::default(); n as usize];
            behaviors[0].deal_degree_override = Some(k);
            config.behaviors = behaviors;
        }
        Scenario::TamperedEval => {
            let mut behaviors = vec![Behavior::default(); n as usize];
            behaviors[1.min(n as usize - 1)].tamper_test_eval = Some(TamperField::U);
            config.behaviors = behaviors;
        }
        Scenario::MaliciousCoordinator => {
            config.coordinator_behavior = CoordinatorBehavior {
                skip_prompt_for: [n].into_iter().collect(),
                prompts_out_of_order: true,
            };
        }
        Scenario::OfflineSubset | Scenario::RefreshMixEpochs => {}
    }

    let mut net = SimNetwork::<G>::new(config);
    net.trace.scenario = scenario.name().to_string();
    let setup = net.run_setup();

    match scenario {
        Scenario::Honest => {
            if setup.outcome.is_ok() {
                roundtrip_note(&mut net, k);
            }
        }
        Scenario::OfflineSubset => {
            if setup.outcome.is_ok() {
                offline_subset_script(&mut net, n, k);
            }
        }
        Scenario::RefreshMixEpochs if setup.outcome.is_ok() => {
            refresh_mix_script(&mut net, n, k, seed);
        }
        _ => {}
    }

    let mut trace = net.trace.clone();
    // A malicious coordinator must never produce mismatched installed
    // parameter sets; record what every node ended with.
    if scenario == Scenario::MaliciousCoordinator {
        let installed: Vec<String> = (1..=n)
            .map(|j| match net.node(j).params_record() {
                Some(rec) => format!("node {j}: epoch {}", rec.epoch),
                None => format!("node {j}: none"),
            })
            .collect();
        trace
            .notes
            .push(format!("installed parameters: {installed:?}"));
    }
    trace
}

fn roundtrip_note<G: Group>(net: &mut SimNetwork<G>, k: u16) {
    let quorum: Vec<u16> = (1..=k).collect();
    let message = b"harness smoke message";
    match net.encrypt(1, &quorum, message) {
        Ok(ct) => match net.decrypt(1, &quorum, &ct) {
            Ok(back) if back == message => {
                net.trace.notes.push("roundtrip: ok".to_string());
            }
            Ok(_) => net
                .trace
                .notes
                .push("roundtrip: wrong plaintext".to_string()),
            Err(e) => net
                .trace
                .notes
                .push(format!("roundtrip decrypt failed: {e}")),
        },
        Err(e) => net
            .trace
            .notes
            .push(format!("roundtrip encrypt failed: {e}")),
    }
}

/// Setup with everyone online, then all but `k` participants go offline.
/// A request hitting an offline member times out; retrying with an online
/// substitute succeeds with exactly `k` responders.
fn offline_subset_script<G: Group>(net: &mut SimNetwork<G>, n: u16, k: u16) {
    for j in (k + 1)..=n {
        net.set_offline(j, true);
    }
    let message = b"offline subset message";
    // First attempt deliberately includes an offline member.
    let mut with_offline: Vec<u16> = (2..=k).collect();
    with_offline.push(n);
    if with_offline.len() < k as usize {
        with_offline.push(1);
    }
    match net.encrypt(1, &with_offline, message) {
        Err(e) => net
            .trace
            .notes
            .push(format!("attempt with offline member: {e}")),
        Ok(_) => net
            .trace
            .notes
            .push("attempt with offline member unexpectedly succeeded".to_string()),
    }
    // Retry with the online quorum.
    let online: Vec<u16> = (1..=k).collect();
    match net.encrypt(1, &online, message) {
        Ok(ct) => match net.decrypt(1, &online, &ct) {
            Ok(back) if back == message => net.trace.notes.push(format!(
                "retry with substituted quorum: ok ({k} responders)"
            )),
            other => net
                .trace
                .notes
                .push(format!("retry decrypt unexpected: {other:?}")),
        },
        Err(e) => net.trace.notes.push(format!("retry failed: {e}")),
    }
}

/// Refresh preserves the DPRF output; stale shares mixed into a quorum do
/// not reproduce it.
fn refresh_mix_script<G: Group>(net: &mut SimNetwork<G>, n: u16, k: u16, seed: u64) {
    use rand_chacha::rand_core::SeedableRng;
    let mut rng = ChaCha20Rng::seed_from_u64(seed ^ 0x5eed);

    let probe = b"refresh probe input";
    let old_keys: Vec<_> = (1..=n)
        .map(|j| net.node(j).key_material().expect("setup done").clone())
        .collect();
    let h_seed = net.node(1).params_record().expect("installed").h_seed;
    let pp = tse_core::group::GroupParams::<G>::derive(&h_seed);
    let reference = eval_combined::<G>(
        &pp,
        &old_keys,
        &(1..=k).collect::<Vec<_>>(),
        probe,
        &mut rng,
    );

    let refresh = net.run_refresh();
    if refresh.outcome.is_err() {
        net.trace
            .notes
            .push("refresh aborted unexpectedly".to_string());
        return;
    }
    let new_keys: Vec<_> = (1..=n)
        .map(|j| net.node(j).key_material().expect("refresh done").clone())
        .collect();
    let after = eval_combined::<G>(
        &pp,
        &new_keys,
        &(1..=k).collect::<Vec<_>>(),
        probe,
        &mut rng,
    );
    net.trace.notes.push(format!(
        "dprf preserved across refresh: {}",
        reference == after
    ));

    // Mix k-1 new shares with one stale share.
    let mut mixed_material = new_keys.clone();
    mixed_material[0] = old_keys[0].clone();
    let mixed = eval_combined::<G>(
        &pp,
        &mixed_material,
        &(1..=k).collect::<Vec<_>>(),
        probe,
        &mut rng,
    );
    net.trace.notes.push(format!(
        "mixed-epoch quorum reproduces output: {}",
        mixed == reference
    ));
}

/// Combines partial evaluations produced directly from key material,
/// without the network path; harness-side probe only.
fn eval_combined<G: Group>(
    pp: &tse_core::group::GroupParams<G>,
    keys: &[tse_core::dkg::KeyMaterial<G>],
    quorum: &[u16],
    input: &[u8],
    rng: &mut ChaCha20Rng,
) -> G::Element {
    let partials: std::collections::BTreeMap<u16, PartialEval<G>> = quorum
        .iter()
        .map(|&j| {
            let km = &keys[(j - 1) as usize];
            (
                j,
                ssnpr_evaluate(pp, &km.share.value, &km.rand, &km.gammas[&j], j, input, rng),
            )
        })
        .collect();
    let values: std::collections::BTreeMap<u16, G::Element> =
        partials.iter().map(|(&j, p)| (j, p.h.clone())).collect();
    npr_combine::<G>(&values).expect("nonempty quorum")
}

/// Scans public storage for any node's secret share bytes; used by tests to
/// assert no secret material ever lands in shared storage.
pub fn storage_contains_secret_material<G: Group>(net: &SimNetwork<G>) -> bool {
    let mut needles: Vec<Vec<u8>> = Vec::new();
    for j in 1..=net.roster().len() {
        if let Some(km) = net.node(j).key_material() {
            needles.push(G::scalar_encode(&km.share.value));
            needles.push(G::scalar_encode(&km.rand));
        }
    }
    if needles.is_empty() {
        return false;
    }
    for record in net.storage().snapshot() {
        for needle in &needles {
            if record
                .value
                .windows(needle.len())
                .any(|w| w == needle.as_slice())
            {
                return true;
            }
        }
    }
    false
}
