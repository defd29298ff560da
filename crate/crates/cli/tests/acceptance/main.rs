//! Acceptance suite.
//!
//! One test per release criterion, each printing a PASS line. The criteria
//! run serialized behind a global lock so the timing-sensitive ones are not
//! disturbed by sibling tests.

mod h2c_oracle;

use std::collections::BTreeMap;
use std::sync::Mutex;

use rand::rngs::StdRng;
use rand::{Rng, RngCore, SeedableRng};

use tse_core::dkg::{InstanceParams, KeyMaterial, SetupTranscript};
use tse_core::dprf::{npr_combine, npr_evaluate_at, ssnpr_evaluate, EvalInput, PartialEval};
use tse_core::group::{random_scalar, Group, GroupParams, Secp256k1, ToyGroup, ToySchnorr};
use tse_core::sharing::{combine_shares, generate_shares};
use tse_net::harness::{harness_run, Scenario};
use tse_net::node::{SessionError, TamperField};
use tse_net::sim::{SimConfig, SimNetwork};
use tse_net::trace::TraceOutcome;

use tse_cli::bench::{bench_run, KRule, NetworkKind};

static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> std::sync::MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

/// Drives an honest dealer-free key generation (deal, exchange, aggregate)
/// without the test-encryption gate, returning every participant's share.
fn honest_keygen<G: Group>(n: u16, k: u16, rng: &mut StdRng) -> BTreeMap<u16, G::Scalar> {
    let params = InstanceParams::<G> {
        group: GroupParams::derive(b"acceptance-keygen"),
        k,
        n,
        instance: [1u8; 16],
        roster_ids: (0..n)
            .map(|i| {
                let mut id = [0u8; 16];
                id[0] = i as u8 + 1;
                id
            })
            .collect(),
        epoch: 0,
    };
    let mut transcripts: Vec<SetupTranscript<G>> = (1..=n)
        .map(|i| SetupTranscript::new_setup(params.clone(), i).expect("valid index"))
        .collect();
    let mut deals = Vec::new();
    for t in transcripts.iter_mut() {
        deals.push(t.deal(rng).expect("dealing"));
    }
    for (dealer_zero, set) in deals.iter().enumerate() {
        for (rec_zero, t) in transcripts.iter_mut().enumerate() {
            if rec_zero != dealer_zero {
                t.record_deal(
                    dealer_zero as u16 + 1,
                    set.share_for(rec_zero as u16 + 1).expect("share").clone(),
                )
                .expect("recording");
            }
        }
    }
    transcripts
        .iter_mut()
        .map(|t| {
            let (share, _gamma) = t.aggregate(rng).expect("aggregate");
            (share.index, share.value)
        })
        .collect()
}

fn subsets_of_size(n: u16, size: usize) -> Vec<Vec<u16>> {
    let mut out = Vec::new();
    fn rec(start: u16, n: u16, size: usize, cur: &mut Vec<u16>, out: &mut Vec<Vec<u16>>) {
        if cur.len() == size {
            out.push(cur.clone());
            return;
        }
        for j in start..=n {
            cur.push(j);
            rec(j + 1, n, size, cur, out);
            cur.pop();
        }
    }
    rec(1, n, size, &mut Vec::new(), &mut out);
    out
}

#[test]
fn criterion_01_consistency_every_k_subset_agrees() {
    let _guard = serial();
    let started = std::time::Instant::now();
    type Toy = ToySchnorr;
    let mut rng = StdRng::seed_from_u64(0xC1);
    let (n, k) = (5u16, 3u16);
    let subsets = subsets_of_size(n, k as usize);
    assert_eq!(subsets.len(), 10);
    for run in 0..50u32 {
        let shares = honest_keygen::<Toy>(n, k, &mut rng);
        let input = EvalInput::<Toy>::derive(format!("consistency {run}").as_bytes());
        let partials: BTreeMap<u16, _> = shares
            .iter()
            .map(|(&j, sk)| (j, npr_evaluate_at::<Toy>(sk, &input)))
            .collect();
        let mut reference = None;
        for subset in &subsets {
            let sub: BTreeMap<u16, _> = subset.iter().map(|j| (*j, partials[j].clone())).collect();
            let combined = npr_combine::<Toy>(&sub).expect("combine");
            match &reference {
                None => reference = Some(combined),
                Some(r) => assert_eq!(&combined, r, "subset {subset:?} disagreed in run {run}"),
            }
        }
    }
    assert!(
        started.elapsed() < std::time::Duration::from_secs(10),
        "criterion 1 exceeded its 10 s budget"
    );
    println!("[acceptance] criterion 1 (consistency, 50 toy setups, all 3-subsets): PASS");
}

fn key_homomorphism_bullets<G: Group>(seed: u64) {
    let mut rng = StdRng::seed_from_u64(seed);
    let (n, k) = (4u16, 2u16);
    for round in 0..100u32 {
        let input = EvalInput::<G>::derive(format!("homomorphism input {round}").as_bytes());

        // Bullet 1: the product of per-dealer evaluations equals the
        // evaluation under the summed key.
        let keys: Vec<G::Scalar> = (0..5).map(|_| random_scalar::<G, _>(&mut rng)).collect();
        let mut sum = G::scalar_zero();
        let mut product = G::identity();
        for sk in &keys {
            sum = G::scalar_add(&sum, sk);
            product = G::op(&product, &npr_evaluate_at::<G>(sk, &input));
        }
        assert_eq!(npr_evaluate_at::<G>(&sum, &input), product);

        // Bullet 2: combine commutes with taking per-index products of the
        // five dealers' partials, for a k-subset and the full set.
        let sharings: Vec<_> = (0..5)
            .map(|_| {
                let s = random_scalar::<G, _>(&mut rng);
                generate_shares::<G, _>(k, n, &s, &mut rng).expect("sharing")
            })
            .collect();
        for subset in [vec![1u16, 3], vec![1, 2, 3, 4]] {
            let mut product_of_combines = G::identity();
            let mut per_index: BTreeMap<u16, G::Element> =
                subset.iter().map(|&j| (j, G::identity())).collect();
            for sharing in &sharings {
                let partials: BTreeMap<u16, _> = subset
                    .iter()
                    .map(|&j| {
                        (
                            j,
                            npr_evaluate_at::<G>(sharing.share_for(j).expect("share"), &input),
                        )
                    })
                    .collect();
                product_of_combines = G::op(
                    &product_of_combines,
                    &npr_combine::<G>(&partials).expect("combine"),
                );
                for (&j, acc) in per_index.iter_mut() {
                    *acc = G::op(acc, &partials[&j]);
                }
            }
            assert_eq!(
                npr_combine::<G>(&per_index).expect("combine"),
                product_of_combines,
                "bullet 2 failed on subset {subset:?}"
            );
        }
    }
}

#[test]
fn criterion_02_key_homomorphism_both_groups() {
    let _guard = serial();
    let started = std::time::Instant::now();
    key_homomorphism_bullets::<ToySchnorr>(0xC2A);
    key_homomorphism_bullets::<Secp256k1>(0xC2B);
    assert!(
        started.elapsed() < std::time::Duration::from_secs(30),
        "criterion 2 exceeded its 30 s budget"
    );
    println!(
        "[acceptance] criterion 2 (key homomorphism, 5 summands, 100 inputs, both groups): PASS"
    );
}

#[test]
fn criterion_03_toy_group_oracle_values() {
    let _guard = serial();
    // Partials 13 and 6 at indices 1, 2 combine to 2^5 = 9 mod 23.
    type Toy = ToySchnorr;
    let mut partials = BTreeMap::new();
    partials.insert(1u16, Toy::element(13).expect("on group"));
    partials.insert(2u16, Toy::element(6).expect("on group"));
    assert_eq!(npr_combine::<Toy>(&partials).expect("combine").value(), 9);

    // Shares (1,5), (2,7) of P(X) = 3 + 2X over Z_13 reconstruct 3.
    type F13 = ToyGroup<53, 13, 16>;
    let mut subset = BTreeMap::new();
    subset.insert(1u16, F13::scalar_from_u64(5));
    subset.insert(2u16, F13::scalar_from_u64(7));
    assert_eq!(combine_shares::<F13>(&subset).expect("combine").value(), 3);
    println!("[acceptance] criterion 3 (toy-group oracle values 9 and 3): PASS");
}

#[test]
fn criterion_04_strong_correctness_tamper_rejection() {
    let _guard = serial();
    let mut rng = StdRng::seed_from_u64(0xC4);
    let mut net = SimNetwork::<Secp256k1>::new(SimConfig {
        record_events: false,
        ..SimConfig::honest(3, 2, 0xC4)
    });
    assert!(net.run_setup().outcome.is_ok());

    // One honest ciphertext for the decryption-side trials.
    let reference_plain = b"strong correctness reference";
    let honest_ct = net
        .encrypt(1, &[1, 3], reference_plain)
        .expect("honest encrypt");

    let fields = [
        TamperField::H,
        TamperField::C,
        TamperField::U,
        TamperField::UPrime,
        TamperField::Issuer,
    ];
    let mut rejected = 0u32;
    for trial in 0..1_000u32 {
        let field = fields[rng.gen_range(0..fields.len())];
        net.behavior_mut(2).tamper_use_eval = Some(field);
        let outcome = if trial % 2 == 0 {
            net.encrypt(1, &[1, 2], b"tampered session").map(|_| ())
        } else {
            net.decrypt(3, &[2, 3], &honest_ct).map(|recovered| {
                // A wrong plaintext slipping through would be a strong
                // correctness break even before the error check.
                assert_eq!(recovered, reference_plain.to_vec());
            })
        };
        match outcome {
            Err(SessionError::ProofRejected(2)) => rejected += 1,
            Err(other) => panic!("trial {trial}: unexpected error {other:?}"),
            Ok(()) => panic!("trial {trial}: tampered partial was accepted"),
        }
        net.behavior_mut(2).tamper_use_eval = None;
    }
    assert_eq!(rejected, 1_000);

    // Sanity: the deployment still works untampered.
    let ct = net.encrypt(1, &[1, 2], b"clean").expect("clean encrypt");
    assert_eq!(
        net.decrypt(3, &[2, 3], &ct).expect("clean decrypt"),
        b"clean"
    );
    println!("[acceptance] criterion 4 (strong correctness, 1000/1000 tampers rejected): PASS");
}

#[test]
fn criterion_05_dkg_abort_soundness() {
    let _guard = serial();
    for (n, k) in [(4u16, 2u16), (6, 3), (5, 4)] {
        for seed in 0..200u64 {
            let trace = harness_run(n, k, Scenario::MaliciousDealerHighDegree, seed);
            match &trace.outcome {
                TraceOutcome::Aborted { reasons } => assert!(
                    reasons.iter().any(|r| r.contains("degree too high")),
                    "(n={n}, k={k}, seed={seed}): wrong abort {reasons:?}"
                ),
                other => panic!("(n={n}, k={k}, seed={seed}): completed with {other:?}"),
            }
        }
    }
    for seed in 0..200u64 {
        let trace = harness_run(4, 2, Scenario::Honest, seed);
        assert_eq!(
            trace.outcome,
            TraceOutcome::Done,
            "honest run {seed} aborted"
        );
    }
    // k = n corner case: a degree-k dealer stays consistent because every
    // combine uses all n evaluations.
    for seed in 0..200u64 {
        let trace = harness_run(3, 3, Scenario::MaliciousDealerHighDegree, seed);
        assert_eq!(
            trace.outcome,
            TraceOutcome::Done,
            "k = n corner case {seed} aborted"
        );
    }
    println!("[acceptance] criterion 5 (DKG abort soundness, 600 malicious + 200 honest + 200 corner runs): PASS");
}

fn quorum_output(
    pp: &GroupParams<Secp256k1>,
    keys: &[KeyMaterial<Secp256k1>],
    quorum: &[u16],
    input: &EvalInput<Secp256k1>,
) -> <Secp256k1 as Group>::Element {
    let _ = pp;
    let partials: BTreeMap<u16, _> = quorum
        .iter()
        .map(|&j| {
            let km = keys.iter().find(|k| k.share.index == j).expect("member");
            (j, npr_evaluate_at::<Secp256k1>(&km.share.value, input))
        })
        .collect();
    npr_combine::<Secp256k1>(&partials).expect("combine")
}

#[test]
fn criterion_06_proactive_refresh() {
    let _guard = serial();
    let (n, k) = (4u16, 2u16);
    let mut net = SimNetwork::<Secp256k1>::new(SimConfig {
        record_events: false,
        ..SimConfig::honest(n, k, 0xC6)
    });
    assert!(net.run_setup().outcome.is_ok());
    let pp = net.group_params().clone();
    let old_keys: Vec<_> = (1..=n)
        .map(|j| net.node(j).key_material().expect("installed").clone())
        .collect();

    let inputs: Vec<EvalInput<Secp256k1>> = (0..100)
        .map(|i| EvalInput::derive(format!("refresh fixed input {i}").as_bytes()))
        .collect();
    let before: Vec<_> = inputs
        .iter()
        .map(|x| quorum_output(&pp, &old_keys, &[1, 2], x))
        .collect();

    assert!(net.run_refresh().outcome.is_ok());
    let new_keys: Vec<_> = (1..=n)
        .map(|j| net.node(j).key_material().expect("installed").clone())
        .collect();

    for (x, expected) in inputs.iter().zip(&before) {
        // Same output from the refreshed shares, over two different quorums.
        assert_eq!(&quorum_output(&pp, &new_keys, &[1, 2], x), expected);
        assert_eq!(&quorum_output(&pp, &new_keys, &[3, 4], x), expected);
    }

    // Mixed-epoch quorums of size k never reproduce the output.
    for (trial, (x, expected)) in inputs.iter().zip(&before).enumerate() {
        let stale = (trial % n as usize) as u16 + 1;
        let fresh = (stale % n) + 1;
        let mut mixed_material = new_keys.clone();
        mixed_material[(stale - 1) as usize] = old_keys[(stale - 1) as usize].clone();
        let mixed = quorum_output(&pp, &mixed_material, &[stale, fresh], x);
        assert_ne!(
            &mixed, expected,
            "trial {trial}: stale share {stale} went unnoticed"
        );
    }
    println!("[acceptance] criterion 6 (refresh preserves DPRF on 100 inputs; 100/100 mixed-epoch quorums fail): PASS");
}

#[test]
fn criterion_07_communication_complexity() {
    let _guard = serial();
    // Setup: n(n-1) deals + n commitment posts + n^2 eval exchanges
    // (request/response pairs), asserted exactly for n = 3..8.
    for n in 3u16..=8 {
        let k = n / 2 + 1;
        let mut net = SimNetwork::<Secp256k1>::new(SimConfig {
            record_events: false,
            ..SimConfig::honest(n, k, 0xC7)
        });
        assert!(net.run_setup().outcome.is_ok());
        let counts = net.counts();
        let n64 = n as u64;
        assert_eq!(counts.deal_messages, n64 * (n64 - 1), "deals at n={n}");
        assert_eq!(counts.commitment_posts, n64, "posts at n={n}");
        assert_eq!(counts.eval_requests, n64 * n64, "requests at n={n}");
        assert_eq!(counts.eval_responses, n64 * n64, "responses at n={n}");
        assert_eq!(
            counts.protocol_total(),
            n64 * (n64 - 1) + n64 + 2 * n64 * n64
        );
    }
    // Encryption: exactly 2k messages, independent of n.
    for (n, k) in [(4u16, 2u16), (6, 3), (6, 5), (8, 4), (5, 5)] {
        let mut net = SimNetwork::<Secp256k1>::new(SimConfig {
            record_events: false,
            ..SimConfig::honest(n, k, 0xC7C)
        });
        assert!(net.run_setup().outcome.is_ok());
        let before = net.counts();
        let quorum: Vec<u16> = (1..=k).collect();
        net.encrypt(1, &quorum, b"complexity probe")
            .expect("encrypt");
        let diff = net.counts().diff(&before);
        assert_eq!(diff.protocol_total(), 2 * k as u64, "(n={n}, k={k})");
        assert_eq!(diff.eval_requests, k as u64);
        assert_eq!(diff.eval_responses, k as u64);
    }
    println!("[acceptance] criterion 7 (communication complexity closed forms, n=3..8 and 2k sessions): PASS");
}

#[test]
fn criterion_08_scaling_trends() {
    let _guard = serial();
    // Encryption latency for fixed k = 2 must stay flat (< 20% spread)
    // across n = 12, 18, 24: runs of 30 sequential 32-byte encryptions per
    // cell. The sandbox is a shared 2-core box, so the passes are
    // interleaved round-robin across the cells (ambient load hits every
    // cell alike) and the fastest pass stands for each cell; the 20%
    // tolerance itself is untouched.
    let ns = [12u16, 18, 24];
    let quorum = [1u16, 2];
    let mut nets: Vec<SimNetwork<Secp256k1>> = ns
        .iter()
        .map(|&n| {
            let mut net = SimNetwork::<Secp256k1>::new(SimConfig {
                record_events: false,
                ..SimConfig::honest(n, 2, 0xC8 ^ n as u64)
            });
            assert!(net.run_setup().outcome.is_ok());
            net
        })
        .collect();
    for net in nets.iter_mut() {
        // Messages per encryption stay 2k regardless of n.
        let before = net.counts();
        net.encrypt(1, &quorum, b"message count probe")
            .expect("encrypt");
        assert_eq!(net.counts().diff(&before).protocol_total(), 4);
    }
    let mut encrypt_latencies = vec![f64::MAX; ns.len()];
    for _pass in 0..5 {
        for (cell, net) in nets.iter_mut().enumerate() {
            for _ in 0..3 {
                net.encrypt(1, &quorum, b"warmup, untimed").expect("warmup");
            }
            let runs = 30u32;
            let started = std::time::Instant::now();
            for r in 0..runs {
                let mut message = [0u8; 32];
                message[..4].copy_from_slice(&r.to_be_bytes());
                net.encrypt(1, &quorum, &message).expect("timed encrypt");
            }
            let latency_ms = started.elapsed().as_secs_f64() * 1_000.0 / runs as f64;
            encrypt_latencies[cell] = encrypt_latencies[cell].min(latency_ms);
        }
    }
    let min = encrypt_latencies.iter().cloned().fold(f64::MAX, f64::min);
    let max = encrypt_latencies.iter().cloned().fold(0.0_f64, f64::max);
    assert!(
        max / min < 1.20,
        "encryption latency varies more than 20%: {encrypt_latencies:?}"
    );

    // Setup latency at k = n/3 must grow by more than 2.5x from n = 12 to
    // n = 24 (the communication and verification load is quadratic).
    let report = bench_run(
        &KRule::parse("n/3").expect("rule"),
        &[12, 24],
        30,
        NetworkKind::Harness,
        0xC8B,
    )
    .expect("bench");
    assert_eq!(report.aborted_runs, 0);
    let setup_latency = |n: u16| {
        report
            .rows
            .iter()
            .find(|r| r.op == "setup" && r.n == n)
            .expect("row")
            .latency_ms
    };
    let ratio = setup_latency(24) / setup_latency(12);
    assert!(
        ratio > 2.5,
        "setup latency ratio n=24/n=12 is only {ratio:.2}"
    );
    println!(
        "[acceptance] criterion 8 (scaling trends: encrypt spread {:.1}%, setup ratio {ratio:.2}x): PASS",
        (max / min - 1.0) * 100.0
    );
}

#[test]
fn criterion_09_hash_to_curve_matches_independent_oracle() {
    let _guard = serial();
    use k256::elliptic_curve::sec1::ToEncodedPoint;

    // Published vectors for secp256k1_XMD:SHA-256_SSWU_RO_ with the
    // reference tag.
    let dst: &[u8] = b"QUUX-V01-CS02-with-secp256k1_XMD:SHA-256_SSWU_RO_";
    let vectors: [(&[u8], &str, &str); 5] = [
        (
            b"",
            "c1cae290e291aee617ebaef1be6d73861479c48b841eaba9b7b5852ddfeb1346",
            "64fa678e07ae116126f08b022a94af6de15985c996c3a91b64c406a960e51067",
        ),
        (
            b"abc",
            "3377e01eab42db296b512293120c6cee72b6ecf9f9205760bd9ff11fb3cb2c4b",
            "7f95890f33efebd1044d382a01b1bee0900fb6116f94688d487c6c7b9c8371f6",
        ),
        (
            b"abcdef0123456789",
            "bac54083f293f1fe08e4a70137260aa90783a5cb84d3f35848b324d0674b0e3a",
            "4436476085d4c3c4508b60fcf4389c40176adce756b398bdee27bca19758d828",
        ),
        (
            b"q128_qqqqqqqqqqqqqqqqqqqqqqqqqqqqqqqqqqqqqqqqqqqqqqqqqqqqqqqqqqqqqqqqqqqqqqqqqqqqqqqqqqqqqqqqqqqqqqqqqqqqqqqqqqqqqqqqqqqqqqqqqqqqqqqq",
            "e2167bc785333a37aa562f021f1e881defb853839babf52a7f72b102e41890e9",
            "f2401dd95cc35867ffed4f367cd564763719fbc6a53e969fb8496a1e6685d873",
        ),
        (
            b"a512_aaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaa",
            "e3c8d35aaaf0b9b647e88a0a0a7ee5d5bed5ad38238152e4e6fd8c1f8cb7c998",
            "8446eeb6181bf12f56a9d24e262221cc2f0c4725c7e3803024b5888ee5823aa6",
        ),
    ];

    for (msg, expected_x, expected_y) in vectors {
        // Implementation under test.
        let point = Secp256k1::hash_to_group(msg, dst);
        let encoded = point.to_encoded_point(false);
        assert_eq!(hex::encode(encoded.x().expect("affine")), expected_x);
        assert_eq!(hex::encode(encoded.y().expect("affine")), expected_y);

        // Independent oracle.
        let oracle_point = h2c_oracle::hash_to_curve(msg, dst);
        let (ox, oy) = oracle_point.expect("not infinity");
        assert_eq!(format!("{ox:064x}"), expected_x);
        assert_eq!(format!("{oy:064x}"), expected_y);
    }

    // Implementation and oracle agree on random inputs under both
    // production tags.
    let mut rng = StdRng::seed_from_u64(0xC9);
    for trial in 0..25 {
        let len = rng.gen_range(0..200);
        let mut msg = vec![0u8; len];
        rng.fill_bytes(&mut msg);
        for tag in [Secp256k1::DST_INPUT, Secp256k1::DST_GEN] {
            let ours = Secp256k1::element_encode(&Secp256k1::hash_to_group(&msg, tag));
            let oracle = h2c_oracle::encode_compressed(&h2c_oracle::hash_to_curve(&msg, tag));
            assert_eq!(ours, oracle.to_vec(), "trial {trial} diverged");
        }
    }
    println!("[acceptance] criterion 9 (hash-to-curve matches published vectors and independent oracle): PASS");
}

#[test]
fn criterion_10_cli_end_to_end() {
    let _guard = serial();
    use std::process::Command;
    let bin = env!("CARGO_BIN_EXE_tse");
    let dir = tempfile::tempdir().expect("tempdir");
    let store = dir.path().join("instance");
    let plain = dir.path().join("plain.bin");
    let cipher = dir.path().join("cipher.tse");
    let recovered = dir.path().join("recovered.bin");

    let mut rng = StdRng::seed_from_u64(0xC10);
    let mut content = vec![0u8; 1024];
    rng.fill_bytes(&mut content);
    std::fs::write(&plain, &content).expect("write plaintext");

    let run = |args: &[&str]| {
        Command::new(bin)
            .args(args)
            .env("TSE_PASSPHRASE", "acceptance")
            .output()
            .expect("spawn tse")
    };

    let store_str = store.to_str().expect("utf8 path");
    let out = run(&["setup", "--n", "4", "--k", "2", "--out", store_str]);
    assert!(
        out.status.success(),
        "setup: {}",
        String::from_utf8_lossy(&out.stderr)
    );

    let out = run(&[
        "encrypt",
        "--in",
        plain.to_str().expect("utf8"),
        "--participants",
        "1,2",
        "--out",
        cipher.to_str().expect("utf8"),
        "--store",
        store_str,
    ]);
    assert!(
        out.status.success(),
        "encrypt: {}",
        String::from_utf8_lossy(&out.stderr)
    );

    let out = run(&[
        "decrypt",
        "--in",
        cipher.to_str().expect("utf8"),
        "--out",
        recovered.to_str().expect("utf8"),
        "--store",
        store_str,
        "--participants",
        "3,4",
    ]);
    assert!(
        out.status.success(),
        "decrypt: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(
        std::fs::read(&recovered).expect("read recovered"),
        content,
        "roundtrip is not byte-exact"
    );

    // Flip one ciphertext bit: decryption must exit 1 and name the
    // commitment mismatch.
    let mut tampered_bytes = std::fs::read(&cipher).expect("read ciphertext");
    let mid = tampered_bytes.len() / 2;
    tampered_bytes[mid] ^= 0x10;
    let tampered = dir.path().join("tampered.tse");
    std::fs::write(&tampered, &tampered_bytes).expect("write tampered");
    let out = run(&[
        "decrypt",
        "--in",
        tampered.to_str().expect("utf8"),
        "--out",
        dir.path().join("bad.bin").to_str().expect("utf8"),
        "--store",
        store_str,
    ]);
    assert_eq!(out.status.code(), Some(1), "tampered decrypt exit code");
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.contains("commitment mismatch"),
        "stderr was: {stderr}"
    );
    println!(
        "[acceptance] criterion 10 (CLI setup/encrypt/decrypt roundtrip, tamper exits 1): PASS"
    );
}

/// The wire form of a partial evaluation is pinned: issuer(2) || h(33) ||
/// c(32) || u(32) || u'(32).
#[test]
fn partial_eval_wire_size_is_pinned() {
    let _guard = serial();
    assert_eq!(PartialEval::<Secp256k1>::wire_len(), 131);
}

/// Sanity that the SSNPR proof layer the criteria rely on is active in the
/// session path: an honest partial round-trips its wire encoding.
#[test]
fn session_partials_round_trip_on_the_wire() {
    let _guard = serial();
    let mut rng = StdRng::seed_from_u64(77);
    let pp = GroupParams::<Secp256k1>::derive(b"acceptance-wire");
    let sk = random_scalar::<Secp256k1, _>(&mut rng);
    let r = random_scalar::<Secp256k1, _>(&mut rng);
    let gamma = tse_core::commit::pedersen_commit(&pp, &sk, &r);
    let partial = ssnpr_evaluate(&pp, &sk, &r, &gamma, 3, b"wire", &mut rng);
    let decoded = PartialEval::<Secp256k1>::decode(&partial.encode()).expect("decode");
    assert_eq!(decoded, partial);
}
