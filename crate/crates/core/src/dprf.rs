//! The DDH-based distributed pseudo-random function.
//!
//! The plain construction evaluates `z_i = ω^{sk_i}` on `ω = H(x)` and
//! combines partials by Lagrange interpolation in the exponent. The strongly
//! secure variant attaches a Chaum–Pedersen style proof, made non-interactive
//! with the Fiat–Shamir transform, binding each partial evaluation to the
//! issuer's published Pedersen commitment. Combining verifies every proof
//! before interpolating, so a tampered partial is rejected rather than
//! silently corrupting the output.

use std::collections::BTreeMap;

use rand_core::{CryptoRng, RngCore};
use sha2::{Digest, Sha256};
use sha3::digest::{ExtendableOutput, Update, XofReader};
use sha3::Shake256;
use thiserror::Error;

use crate::commit::PedersenCommitment;
use crate::group::{random_scalar, Group, GroupError, GroupParams};
use crate::sharing::{lagrange_coefficient, SharingError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DprfError {
    /// The proof carried by participant `j`'s partial evaluation failed.
    #[error("partial evaluation proof from participant {0} rejected")]
    ProofRejected(u16),
    /// No published commitment to check participant `j`'s proof against.
    #[error("no commitment available for participant {0}")]
    MissingCommitment(u16),
    #[error(transparent)]
    Sharing(#[from] SharingError),
}

/// A DPRF input point `ω = H(x)`, obtainable only by hashing.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalInput<G: Group> {
    omega: G::Element,
}

impl<G: Group> EvalInput<G> {
    pub fn derive(x: &[u8]) -> Self {
        Self {
            omega: G::hash_to_group(x, G::DST_INPUT),
        }
    }

    pub fn element(&self) -> &G::Element {
        &self.omega
    }
}

/// Plain partial evaluation: `z_i = ω^{sk_i}`.
pub fn npr_evaluate<G: Group>(sk: &G::Scalar, x: &[u8]) -> G::Element {
    npr_evaluate_at::<G>(sk, &EvalInput::derive(x))
}

/// Same as [`npr_evaluate`] with the input point already hashed.
pub fn npr_evaluate_at<G: Group>(sk: &G::Scalar, input: &EvalInput<G>) -> G::Element {
    G::exp(&input.omega, sk)
}

/// Lagrange interpolation in the exponent: `Π z_j^{λ_j}`.
///
/// Equals `ω^s` whenever the partials come from at least `k` honest shares
/// of a degree-(k-1) sharing of `s`.
pub fn npr_combine<G: Group>(
    partials: &BTreeMap<u16, G::Element>,
) -> Result<G::Element, DprfError> {
    if partials.is_empty() {
        return Err(SharingError::EmptySubset.into());
    }
    let indices: Vec<u16> = partials.keys().copied().collect();
    let mut acc = G::identity();
    for (&j, z_j) in partials {
        let lambda = lagrange_coefficient::<G>(&indices, j)?;
        acc = G::op(&acc, &G::exp(z_j, &lambda));
    }
    Ok(acc)
}

/// A strongly secure partial evaluation: the value `h = ω^{sk_i}` plus the
/// Fiat–Shamir proof scalars `(c, u, u')` tying it to the issuer's Pedersen
/// commitment.
#[derive(Clone, Debug, PartialEq)]
pub struct PartialEval<G: Group> {
    pub issuer: u16,
    pub h: G::Element,
    pub c: G::Scalar,
    pub u: G::Scalar,
    pub u_prime: G::Scalar,
}

impl<G: Group> PartialEval<G> {
    /// Wire length: issuer (2) plus one element and three scalars.
    pub fn wire_len() -> usize {
        2 + G::ELEMENT_LEN + 3 * G::SCALAR_LEN
    }

    /// `issuer || h || c || u || u'`, fixed-width fields.
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(Self::wire_len());
        out.extend_from_slice(&self.issuer.to_be_bytes());
        out.extend_from_slice(&G::element_encode(&self.h));
        out.extend_from_slice(&G::scalar_encode(&self.c));
        out.extend_from_slice(&G::scalar_encode(&self.u));
        out.extend_from_slice(&G::scalar_encode(&self.u_prime));
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, GroupError> {
        if bytes.len() != Self::wire_len() {
            return Err(GroupError::InvalidEncoding("partial evaluation"));
        }
        let issuer = u16::from_be_bytes(bytes[..2].try_into().unwrap());
        let mut at = 2;
        let h = G::element_decode(&bytes[at..at + G::ELEMENT_LEN])?;
        at += G::ELEMENT_LEN;
        let c = G::scalar_decode(&bytes[at..at + G::SCALAR_LEN])?;
        at += G::SCALAR_LEN;
        let u = G::scalar_decode(&bytes[at..at + G::SCALAR_LEN])?;
        at += G::SCALAR_LEN;
        let u_prime = G::scalar_decode(&bytes[at..at + G::SCALAR_LEN])?;
        Ok(Self {
            issuer,
            h,
            c,
            u,
            u_prime,
        })
    }
}

/// The Fiat–Shamir challenge over the seven proof elements, in protocol
/// order. Each element is length-prefixed before hashing so no two argument
/// lists collide; the digest is expanded to 48 bytes and reduced mod `q`,
/// keeping the bias below `2^-128`.
pub fn h_chal<G: Group>(
    h_i: &G::Element,
    omega: &G::Element,
    gamma: &G::Element,
    g: &G::Element,
    h: &G::Element,
    t: &G::Element,
    t_prime: &G::Element,
) -> G::Scalar {
    let mut hasher = Sha256::new();
    for e in [h_i, omega, gamma, g, h, t, t_prime] {
        let enc = G::element_encode(e);
        Digest::update(&mut hasher, (enc.len() as u16).to_be_bytes());
        Digest::update(&mut hasher, &enc);
    }
    let digest = hasher.finalize();
    let mut xof = Shake256::default();
    xof.update(&digest);
    let mut wide = [0u8; 48];
    xof.finalize_xof().read(&mut wide);
    G::scalar_reduce_wide(&wide)
}

/// Produces a proven partial evaluation on input `x`.
///
/// `gamma_i` must be the issuer's published commitment `g^{sk_i} · h^{r_i}`.
pub fn ssnpr_evaluate<G: Group, R: RngCore + CryptoRng>(
    pp: &GroupParams<G>,
    sk_i: &G::Scalar,
    r_i: &G::Scalar,
    gamma_i: &PedersenCommitment<G>,
    issuer: u16,
    x: &[u8],
    rng: &mut R,
) -> PartialEval<G> {
    ssnpr_evaluate_at(pp, sk_i, r_i, gamma_i, issuer, &EvalInput::derive(x), rng)
}

pub fn ssnpr_evaluate_at<G: Group, R: RngCore + CryptoRng>(
    pp: &GroupParams<G>,
    sk_i: &G::Scalar,
    r_i: &G::Scalar,
    gamma_i: &PedersenCommitment<G>,
    issuer: u16,
    input: &EvalInput<G>,
    rng: &mut R,
) -> PartialEval<G> {
    let g = G::generator();
    let omega = input.element();
    let h_i = G::exp(omega, sk_i);
    let v = random_scalar::<G, _>(rng);
    let v_prime = random_scalar::<G, _>(rng);
    let t = G::exp(omega, &v);
    let t_prime = G::op(&G::exp(&g, &v), &G::exp(&pp.h, &v_prime));
    let c = h_chal::<G>(&h_i, omega, &gamma_i.gamma, &g, &pp.h, &t, &t_prime);
    let u = G::scalar_sub(&v, &G::scalar_mul(&c, sk_i));
    let u_prime = G::scalar_sub(&v_prime, &G::scalar_mul(&c, r_i));
    PartialEval {
        issuer,
        h: h_i,
        c,
        u,
        u_prime,
    }
}

/// Checks a partial evaluation against the issuer's commitment.
///
/// Recomputes `t = ω^u · h_i^c` and `t' = g^u · h^{u'} · γ^c` and accepts
/// iff the challenge matches.
pub fn ssnpr_verify<G: Group>(
    pp: &GroupParams<G>,
    partial: &PartialEval<G>,
    gamma_i: &PedersenCommitment<G>,
    x: &[u8],
) -> bool {
    ssnpr_verify_at(pp, partial, gamma_i, &EvalInput::derive(x))
}

pub fn ssnpr_verify_at<G: Group>(
    pp: &GroupParams<G>,
    partial: &PartialEval<G>,
    gamma_i: &PedersenCommitment<G>,
    input: &EvalInput<G>,
) -> bool {
    let g = G::generator();
    let omega = input.element();
    let t = G::op(&G::exp(omega, &partial.u), &G::exp(&partial.h, &partial.c));
    let t_prime = G::op(
        &G::op(&G::exp(&g, &partial.u), &G::exp(&pp.h, &partial.u_prime)),
        &G::exp(&gamma_i.gamma, &partial.c),
    );
    partial.c == h_chal::<G>(&partial.h, omega, &gamma_i.gamma, &g, &pp.h, &t, &t_prime)
}

/// Verifies every partial and interpolates the survivors' values.
///
/// Fails fast on the first bad proof (by ascending issuer index) so the
/// protocol layer can abort the session and name the issuer. The combined
/// value is exactly what [`npr_combine`] yields on the embedded `h` values.
pub fn ssnpr_combine<G: Group>(
    pp: &GroupParams<G>,
    partials: &BTreeMap<u16, PartialEval<G>>,
    gammas: &BTreeMap<u16, PedersenCommitment<G>>,
    x: &[u8],
) -> Result<G::Element, DprfError> {
    ssnpr_combine_at(pp, partials, gammas, &EvalInput::derive(x))
}

pub fn ssnpr_combine_at<G: Group>(
    pp: &GroupParams<G>,
    partials: &BTreeMap<u16, PartialEval<G>>,
    gammas: &BTreeMap<u16, PedersenCommitment<G>>,
    input: &EvalInput<G>,
) -> Result<G::Element, DprfError> {
    for (&j, partial) in partials {
        if partial.issuer != j {
            return Err(DprfError::ProofRejected(j));
        }
        let gamma = gammas.get(&j).ok_or(DprfError::MissingCommitment(j))?;
        if !ssnpr_verify_at(pp, partial, gamma, input) {
            return Err(DprfError::ProofRejected(j));
        }
    }
    let values: BTreeMap<u16, G::Element> =
        partials.iter().map(|(&j, p)| (j, p.h.clone())).collect();
    npr_combine::<G>(&values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::commit::pedersen_commit;
    use crate::group::{Secp256k1, ToySchnorr};
    use crate::sharing::{generate_shares, shares_from_polynomial, Polynomial};
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    type Toy = ToySchnorr;

    fn toy_params() -> GroupParams<Toy> {
        GroupParams::from_h(Toy::element(9).unwrap())
    }

    #[test]
    fn toy_evaluation_values() {
        // omega = 4, sk = 3: 4^3 = 18 mod 23.
        let omega = Toy::element(4).unwrap();
        let input = EvalInput::<Toy> { omega };
        assert_eq!(
            npr_evaluate_at::<Toy>(&Toy::scalar_from_u64(3), &input).value(),
            18
        );
        // sk = 0 gives the identity, sk = 1 gives omega back.
        assert_eq!(
            npr_evaluate_at::<Toy>(&Toy::scalar_zero(), &input),
            Toy::identity()
        );
        assert_eq!(
            npr_evaluate_at::<Toy>(&Toy::scalar_one(), &input).value(),
            4
        );
    }

    #[test]
    fn toy_combine_value() {
        // P(X) = 5 + 2X mod 11, omega = 2: partials 2^7 = 13 and 2^9 = 6
        // combine to 2^5 = 9 mod 23.
        let mut partials = BTreeMap::new();
        partials.insert(1u16, Toy::element(13).unwrap());
        partials.insert(2u16, Toy::element(6).unwrap());
        assert_eq!(npr_combine::<Toy>(&partials).unwrap().value(), 9);
    }

    #[test]
    fn single_partial_of_k1_sharing_is_the_output() {
        let mut partials = BTreeMap::new();
        partials.insert(3u16, Toy::element(8).unwrap());
        assert_eq!(npr_combine::<Toy>(&partials).unwrap().value(), 8);
    }

    #[test]
    fn any_two_k_subsets_of_honest_sharing_agree() {
        let mut rng = StdRng::seed_from_u64(21);
        let secret = random_scalar::<Toy, _>(&mut rng);
        let set = generate_shares::<Toy, _>(2, 4, &secret, &mut rng).unwrap();
        let input = EvalInput::<Toy>::derive(b"subset agreement");
        let all: BTreeMap<u16, _> = set
            .shares
            .iter()
            .map(|(&j, sk)| (j, npr_evaluate_at::<Toy>(sk, &input)))
            .collect();
        let reference = npr_combine::<Toy>(&all).unwrap();
        for a in 1..=4u16 {
            for b in (a + 1)..=4u16 {
                let sub: BTreeMap<u16, _> = [(a, all[&a].clone()), (b, all[&b].clone())]
                    .into_iter()
                    .collect();
                assert_eq!(npr_combine::<Toy>(&sub).unwrap(), reference);
            }
        }
    }

    fn proven_partial<G: Group>(
        pp: &GroupParams<G>,
        sk: &G::Scalar,
        issuer: u16,
        x: &[u8],
        rng: &mut StdRng,
    ) -> (PartialEval<G>, PedersenCommitment<G>) {
        let r = random_scalar::<G, _>(rng);
        let gamma = pedersen_commit(pp, sk, &r);
        let partial = ssnpr_evaluate(pp, sk, &r, &gamma, issuer, x, rng);
        (partial, gamma)
    }

    #[test]
    fn ssnpr_completeness_and_value() {
        let mut rng = StdRng::seed_from_u64(22);
        let pp = toy_params();
        let sk = random_scalar::<Toy, _>(&mut rng);
        let x = b"completeness";
        let (partial, gamma) = proven_partial(&pp, &sk, 1, x, &mut rng);
        assert!(ssnpr_verify(&pp, &partial, &gamma, x));
        assert_eq!(partial.h, npr_evaluate::<Toy>(&sk, x));
    }

    #[test]
    fn repeated_evaluations_share_h_but_not_the_proof() {
        let mut rng = StdRng::seed_from_u64(23);
        let pp = GroupParams::<Secp256k1>::derive(b"dprf-test");
        let sk = random_scalar::<Secp256k1, _>(&mut rng);
        let r = random_scalar::<Secp256k1, _>(&mut rng);
        let gamma = pedersen_commit(&pp, &sk, &r);
        let x = b"same input";
        let p1 = ssnpr_evaluate(&pp, &sk, &r, &gamma, 1, x, &mut rng);
        let p2 = ssnpr_evaluate(&pp, &sk, &r, &gamma, 1, x, &mut rng);
        assert_eq!(p1.h, p2.h);
        assert_ne!((p1.c, p1.u, p1.u_prime), (p2.c, p2.u, p2.u_prime));
    }

    #[test]
    fn tampered_h_and_wrong_gamma_are_rejected() {
        let mut rng = StdRng::seed_from_u64(24);
        let pp = GroupParams::<Secp256k1>::derive(b"dprf-test");
        let sk = random_scalar::<Secp256k1, _>(&mut rng);
        let x = b"tamper";
        let (mut partial, gamma) = proven_partial(&pp, &sk, 1, x, &mut rng);
        partial.h = Secp256k1::op(&partial.h, &Secp256k1::generator());
        assert!(!ssnpr_verify(&pp, &partial, &gamma, x));

        let (honest, _) = proven_partial(&pp, &sk, 1, x, &mut rng);
        let other_sk = random_scalar::<Secp256k1, _>(&mut rng);
        let other_r = random_scalar::<Secp256k1, _>(&mut rng);
        let wrong_gamma = pedersen_commit(&pp, &other_sk, &other_r);
        assert!(!ssnpr_verify(&pp, &honest, &wrong_gamma, x));
    }

    #[test]
    fn combine_rejects_first_bad_proof_and_matches_npr_otherwise() {
        let mut rng = StdRng::seed_from_u64(25);
        let pp = GroupParams::<Secp256k1>::derive(b"dprf-test");
        let secret = random_scalar::<Secp256k1, _>(&mut rng);
        let set = generate_shares::<Secp256k1, _>(2, 3, &secret, &mut rng).unwrap();
        let x = b"combine";

        let mut partials = BTreeMap::new();
        let mut gammas = BTreeMap::new();
        for (&j, sk) in &set.shares {
            let r = random_scalar::<Secp256k1, _>(&mut rng);
            let gamma = pedersen_commit(&pp, sk, &r);
            partials.insert(j, ssnpr_evaluate(&pp, sk, &r, &gamma, j, x, &mut rng));
            gammas.insert(j, gamma);
        }

        let combined = ssnpr_combine(&pp, &partials, &gammas, x).unwrap();
        let plain: BTreeMap<u16, _> = partials.iter().map(|(&j, p)| (j, p.h.clone())).collect();
        assert_eq!(combined, npr_combine::<Secp256k1>(&plain).unwrap());
        assert_eq!(combined, npr_evaluate::<Secp256k1>(&secret, x));

        // Tamper with participant 2's u scalar.
        let mut bad = partials.clone();
        let entry = bad.get_mut(&2).unwrap();
        entry.u = Secp256k1::scalar_add(&entry.u, &Secp256k1::scalar_one());
        assert_eq!(
            ssnpr_combine(&pp, &bad, &gammas, x).unwrap_err(),
            DprfError::ProofRejected(2)
        );

        // Combine over k and over n agree.
        let sub: BTreeMap<u16, _> = partials
            .iter()
            .filter(|(&j, _)| j <= 2)
            .map(|(&j, p)| (j, p.clone()))
            .collect();
        assert_eq!(ssnpr_combine(&pp, &sub, &gammas, x).unwrap(), combined);
    }

    #[test]
    fn key_homomorphism_bullet_one() {
        // Evaluating under the summed key equals the product of the
        // per-dealer evaluations, for 5 summands on both groups.
        fn check<G: Group>(seed: u64) {
            let mut rng = StdRng::seed_from_u64(seed);
            let input = EvalInput::<G>::derive(b"homomorphism");
            let keys: Vec<G::Scalar> = (0..5).map(|_| random_scalar::<G, _>(&mut rng)).collect();
            let mut sum = G::scalar_zero();
            let mut product = G::identity();
            for sk in &keys {
                sum = G::scalar_add(&sum, sk);
                product = G::op(&product, &npr_evaluate_at::<G>(sk, &input));
            }
            assert_eq!(npr_evaluate_at::<G>(&sum, &input), product);
        }
        check::<Toy>(26);
        check::<Secp256k1>(27);
    }

    #[test]
    fn key_homomorphism_bullet_two_exhaustive_n4() {
        // Product of per-dealer combines equals the combine of per-index
        // products, over every subset of {1..4} with at least one member.
        let mut rng = StdRng::seed_from_u64(28);
        let n = 4u16;
        let input = EvalInput::<Toy>::derive(b"exchange");
        let sets: Vec<_> = (0..5)
            .map(|_| {
                let s = random_scalar::<Toy, _>(&mut rng);
                generate_shares::<Toy, _>(2, n, &s, &mut rng).unwrap()
            })
            .collect();
        for mask in 1u32..(1 << n) {
            let subset: Vec<u16> = (1..=n).filter(|j| mask >> (j - 1) & 1 == 1).collect();
            let mut product_of_combines = Toy::identity();
            let mut per_index_products: BTreeMap<u16, _> =
                subset.iter().map(|&j| (j, Toy::identity())).collect();
            let mut ok = true;
            for set in &sets {
                let partials: BTreeMap<u16, _> = subset
                    .iter()
                    .map(|&j| (j, npr_evaluate_at::<Toy>(set.share_for(j).unwrap(), &input)))
                    .collect();
                match npr_combine::<Toy>(&partials) {
                    Ok(c) => product_of_combines = Toy::op(&product_of_combines, &c),
                    Err(_) => {
                        ok = false;
                        break;
                    }
                }
                for (&j, acc) in per_index_products.iter_mut() {
                    *acc = Toy::op(acc, &partials[&j]);
                }
            }
            if !ok {
                continue;
            }
            let combined_products = npr_combine::<Toy>(&per_index_products).unwrap();
            assert_eq!(product_of_combines, combined_products, "subset {subset:?}");
        }
    }

    #[test]
    fn challenge_hash_is_deterministic_order_sensitive_and_reduced() {
        let mut rng = StdRng::seed_from_u64(29);
        let a = Toy::hash_to_group(b"a", Toy::DST_INPUT);
        let b = Toy::hash_to_group(b"b", Toy::DST_INPUT);
        let els: Vec<_> = (0..7)
            .map(|_| npr_evaluate::<Toy>(&random_scalar::<Toy, _>(&mut rng), b"el"))
            .collect();
        let c1 = h_chal::<Toy>(
            &els[0], &els[1], &els[2], &els[3], &els[4], &els[5], &els[6],
        );
        let c2 = h_chal::<Toy>(
            &els[0], &els[1], &els[2], &els[3], &els[4], &els[5], &els[6],
        );
        assert_eq!(c1, c2);
        // Swapping two arguments changes the challenge.
        let c3 = h_chal::<Toy>(
            &els[1], &els[0], &els[2], &els[3], &els[4], &els[5], &els[6],
        );
        assert_ne!(c1, c3);
        // Output is always reduced (scalar construction enforces < q);
        // exercise with a couple of fixed elements too.
        let c4 = h_chal::<Toy>(&a, &b, &a, &b, &a, &b, &a);
        assert!(c4.value() < 11);
    }

    #[test]
    fn soundness_smoke_random_single_field_tampers() {
        // 10^4 random single-field tampers never verify. Run on secp256k1:
        // the challenge space must be large for this to hold statistically.
        let mut rng = StdRng::seed_from_u64(30);
        let pp = GroupParams::<Secp256k1>::derive(b"soundness");
        let sk = random_scalar::<Secp256k1, _>(&mut rng);
        let r = random_scalar::<Secp256k1, _>(&mut rng);
        let gamma = pedersen_commit(&pp, &sk, &r);
        let x = b"soundness input";
        let input = EvalInput::<Secp256k1>::derive(x);
        let honest = ssnpr_evaluate_at(&pp, &sk, &r, &gamma, 1, &input, &mut rng);
        assert!(ssnpr_verify_at(&pp, &honest, &gamma, &input));

        let mut accepted = 0u32;
        for trial in 0..10_000u32 {
            let mut tampered = honest.clone();
            match trial % 4 {
                0 => {
                    let delta = random_scalar::<Secp256k1, _>(&mut rng);
                    tampered.h = Secp256k1::op(
                        &tampered.h,
                        &Secp256k1::exp(&Secp256k1::generator(), &delta),
                    );
                    if tampered.h == honest.h {
                        continue;
                    }
                }
                1 => {
                    let c = random_scalar::<Secp256k1, _>(&mut rng);
                    if c == tampered.c {
                        continue;
                    }
                    tampered.c = c;
                }
                2 => {
                    let u = random_scalar::<Secp256k1, _>(&mut rng);
                    if u == tampered.u {
                        continue;
                    }
                    tampered.u = u;
                }
                _ => {
                    let u = random_scalar::<Secp256k1, _>(&mut rng);
                    if u == tampered.u_prime {
                        continue;
                    }
                    tampered.u_prime = u;
                }
            }
            if ssnpr_verify_at(&pp, &tampered, &gamma, &input) {
                accepted += 1;
            }
        }
        assert_eq!(accepted, 0);
    }

    #[test]
    fn partial_eval_wire_format() {
        let mut rng = StdRng::seed_from_u64(31);
        let pp = GroupParams::<Secp256k1>::derive(b"wire");
        let sk = random_scalar::<Secp256k1, _>(&mut rng);
        let r = random_scalar::<Secp256k1, _>(&mut rng);
        let gamma = pedersen_commit(&pp, &sk, &r);
        let partial = ssnpr_evaluate(&pp, &sk, &r, &gamma, 7, b"x", &mut rng);
        let bytes = partial.encode();
        // issuer(2) || h(33) || c(32) || u(32) || u'(32)
        assert_eq!(bytes.len(), 131);
        assert_eq!(&bytes[..2], &7u16.to_be_bytes());
        let decoded = PartialEval::<Secp256k1>::decode(&bytes).unwrap();
        assert_eq!(decoded, partial);
        assert!(PartialEval::<Secp256k1>::decode(&bytes[..130]).is_err());
    }

    #[test]
    fn high_degree_sharing_shows_up_in_the_exponent() {
        // Underpins the DKG degree test: a degree-k dealer makes the
        // k-subset combine disagree with the full combine.
        let mut rng = StdRng::seed_from_u64(32);
        let poly = Polynomial::<Secp256k1>::random(
            random_scalar::<Secp256k1, _>(&mut rng),
            2, // degree k = 2 while the threshold says k - 1 = 1
            &mut rng,
        );
        let set = shares_from_polynomial::<Secp256k1>(2, 4, &poly).unwrap();
        let input = EvalInput::<Secp256k1>::derive(b"degree");
        let all: BTreeMap<u16, _> = set
            .shares
            .iter()
            .map(|(&j, sk)| (j, npr_evaluate_at::<Secp256k1>(sk, &input)))
            .collect();
        let full = npr_combine::<Secp256k1>(&all).unwrap();
        let sub: BTreeMap<u16, _> = all
            .iter()
            .filter(|(&j, _)| j <= 2)
            .map(|(&j, z)| (j, z.clone()))
            .collect();
        assert_ne!(npr_combine::<Secp256k1>(&sub).unwrap(), full);
    }
}
