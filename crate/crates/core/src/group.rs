//! Prime-order group abstraction with hash-to-group support.
//!
//! The protocol is written against an abstract multiplicative group of prime
//! order `q` together with its scalar field `Z_q`. Two instantiations are
//! provided:
//!
//! * [`Secp256k1`]: the production group. Points live on secp256k1 (cofactor
//!   one, so the whole curve is the prime-order group) and `hash_to_group`
//!   follows the IETF `secp256k1_XMD:SHA-256_SSWU_RO_` suite: two field
//!   elements are derived with `expand_message_xmd`, mapped through the
//!   simplified SWU map and the 3-isogeny, and added.
//! * [`ToyGroup`]: a mod-p Schnorr group small enough to check by hand.
//!   [`ToySchnorr`] fixes `p = 23, q = 11, g = 2`, which is the group used
//!   throughout the unit tests.
//!
//! Group operations are written multiplicatively (`op`, `exp`) to match the
//! protocol algebra, even though the curve backend is additive underneath.

use num_bigint::BigUint;
use rand_core::{CryptoRng, RngCore};
use sha3::digest::{ExtendableOutput, Update, XofReader};
use sha3::Shake256;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GroupError {
    /// Inversion of the zero scalar.
    #[error("cannot invert the zero scalar")]
    ZeroInverse,
    /// Byte string is not a canonical encoding of a scalar or element.
    #[error("invalid {0} encoding")]
    InvalidEncoding(&'static str),
    /// `hash_to_group` landed on the identity element.
    #[error("hash-to-group produced the identity element")]
    IdentityOutput,
    /// A seed for generator derivation must be nonempty.
    #[error("generator seed must not be empty")]
    EmptySeed,
}

/// A prime-order group together with its scalar field `Z_q`.
///
/// All operations are pure; scalars and elements are immutable values that
/// can move freely between threads.
pub trait Group: Clone + Copy + std::fmt::Debug + PartialEq + Eq + Send + Sync + 'static {
    type Scalar: Clone + PartialEq + std::fmt::Debug + Send + Sync + 'static;
    type Element: Clone + PartialEq + std::fmt::Debug + Send + Sync + 'static;

    /// Stable identifier recorded in public parameters.
    const ID: &'static str;
    /// Which hash-to-group suite this instantiation uses; recorded in the
    /// public parameters alongside the group id.
    const HASH_SUITE: &'static str;
    /// Length of the canonical scalar encoding (big-endian).
    const SCALAR_LEN: usize;
    /// Length of the canonical element encoding.
    const ELEMENT_LEN: usize;
    /// Domain-separation tag for hashing DPRF inputs to the group.
    const DST_INPUT: &'static [u8];
    /// Domain-separation tag for deriving the second Pedersen generator.
    const DST_GEN: &'static [u8];

    /// The prime group order `q`.
    fn order() -> BigUint;

    fn scalar_from_u64(v: u64) -> Self::Scalar;
    fn scalar_zero() -> Self::Scalar {
        Self::scalar_from_u64(0)
    }
    fn scalar_one() -> Self::Scalar {
        Self::scalar_from_u64(1)
    }
    fn scalar_is_zero(a: &Self::Scalar) -> bool;
    fn scalar_add(a: &Self::Scalar, b: &Self::Scalar) -> Self::Scalar;
    fn scalar_sub(a: &Self::Scalar, b: &Self::Scalar) -> Self::Scalar;
    fn scalar_mul(a: &Self::Scalar, b: &Self::Scalar) -> Self::Scalar;
    fn scalar_inv(a: &Self::Scalar) -> Result<Self::Scalar, GroupError>;
    fn scalar_encode(a: &Self::Scalar) -> Vec<u8>;
    fn scalar_decode(bytes: &[u8]) -> Result<Self::Scalar, GroupError>;
    /// Interprets `bytes` as a big-endian integer and reduces it mod `q`.
    fn scalar_reduce_wide(bytes: &[u8]) -> Self::Scalar;

    fn generator() -> Self::Element;
    fn identity() -> Self::Element;
    /// The group operation (written multiplicatively).
    fn op(a: &Self::Element, b: &Self::Element) -> Self::Element;
    /// `base^e`.
    fn exp(base: &Self::Element, e: &Self::Scalar) -> Self::Element;
    fn element_encode(p: &Self::Element) -> Vec<u8>;
    /// Decodes and validates: rejects off-curve bytes and elements outside
    /// the order-`q` subgroup. The identity is representable.
    fn element_decode(bytes: &[u8]) -> Result<Self::Element, GroupError>;
    /// Hashes an arbitrary byte string to a group element with no known
    /// discrete logarithm. Deterministic per `(msg, dst)`.
    fn hash_to_group(msg: &[u8], dst: &[u8]) -> Self::Element;
}

/// Samples a scalar uniformly from `[0, q)`.
///
/// The RNG output is oversampled to twice the scalar width and reduced, so
/// the bias is at most `2^-(8 * SCALAR_LEN)`.
pub fn random_scalar<G: Group, R: RngCore + CryptoRng>(rng: &mut R) -> G::Scalar {
    let mut buf = vec![0u8; 2 * G::SCALAR_LEN];
    rng.fill_bytes(&mut buf);
    G::scalar_reduce_wide(&buf)
}

/// Hashes a public seed to a generator for the Pedersen scheme.
///
/// Any non-identity element of a prime-order group generates it; the
/// astronomically unlikely identity output is reported so the caller can
/// retry with `seed || counter`.
pub fn derive_second_generator<G: Group>(seed: &[u8]) -> Result<G::Element, GroupError> {
    if seed.is_empty() {
        return Err(GroupError::EmptySeed);
    }
    let h = G::hash_to_group(seed, G::DST_GEN);
    if h == G::identity() {
        return Err(GroupError::IdentityOutput);
    }
    Ok(h)
}

/// Public group parameters: the base generator `g` (fixed per group) and the
/// independently derived second generator `h` used by Pedersen commitments.
///
/// `h` is obtained by hashing a published seed, so no party learns
/// `log_g(h)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupParams<G: Group> {
    /// The published seed `h` was derived from. Empty when the params were
    /// assembled from a raw element (test fixtures, storage round-trips).
    pub h_seed: Vec<u8>,
    /// Second generator for Pedersen commitments.
    pub h: G::Element,
}

impl<G: Group> GroupParams<G> {
    /// Derives `h` from a public seed, deterministically retrying with an
    /// appended counter in the identity corner case.
    pub fn derive(seed: &[u8]) -> Self {
        let mut attempt = seed.to_vec();
        let mut counter: u32 = 0;
        loop {
            match derive_second_generator::<G>(&attempt) {
                Ok(h) => {
                    return Self {
                        h_seed: seed.to_vec(),
                        h,
                    }
                }
                Err(_) => {
                    counter += 1;
                    attempt = seed.to_vec();
                    attempt.extend_from_slice(&counter.to_be_bytes());
                }
            }
        }
    }

    /// Builds params around an explicit second generator.
    pub fn from_h(h: G::Element) -> Self {
        Self {
            h_seed: Vec::new(),
            h,
        }
    }

    pub fn g(&self) -> G::Element {
        G::generator()
    }
}

// ---------------------------------------------------------------------------
// secp256k1
// ---------------------------------------------------------------------------

/// The production group: secp256k1 with the IETF random-oracle
/// hash-to-curve suite (`secp256k1_XMD:SHA-256_SSWU_RO_`).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Secp256k1;

const SECP256K1_ORDER_HEX: &str =
    "fffffffffffffffffffffffffffffffebaaedce6af48a03bbfd25e8cd0364141";

impl Group for Secp256k1 {
    type Scalar = k256::Scalar;
    type Element = k256::ProjectivePoint;

    const ID: &'static str = "secp256k1";
    const HASH_SUITE: &'static str = "secp256k1_XMD:SHA-256_SSWU_RO_";
    const SCALAR_LEN: usize = 32;
    const ELEMENT_LEN: usize = 33;
    const DST_INPUT: &'static [u8] = b"TSE-V01-secp256k1_XMD:SHA-256_SSWU_RO_-dprf-input";
    const DST_GEN: &'static [u8] = b"TSE-V01-secp256k1_XMD:SHA-256_SSWU_RO_-pedersen-h";

    fn order() -> BigUint {
        BigUint::parse_bytes(SECP256K1_ORDER_HEX.as_bytes(), 16).expect("static constant")
    }

    fn scalar_from_u64(v: u64) -> Self::Scalar {
        k256::Scalar::from(v)
    }

    fn scalar_is_zero(a: &Self::Scalar) -> bool {
        a == &k256::Scalar::ZERO
    }

    fn scalar_add(a: &Self::Scalar, b: &Self::Scalar) -> Self::Scalar {
        a + b
    }

    fn scalar_sub(a: &Self::Scalar, b: &Self::Scalar) -> Self::Scalar {
        a - b
    }

    fn scalar_mul(a: &Self::Scalar, b: &Self::Scalar) -> Self::Scalar {
        a * b
    }

    fn scalar_inv(a: &Self::Scalar) -> Result<Self::Scalar, GroupError> {
        Option::<k256::Scalar>::from(a.invert()).ok_or(GroupError::ZeroInverse)
    }

    fn scalar_encode(a: &Self::Scalar) -> Vec<u8> {
        a.to_bytes().to_vec()
    }

    fn scalar_decode(bytes: &[u8]) -> Result<Self::Scalar, GroupError> {
        use k256::elliptic_curve::PrimeField;
        if bytes.len() != Self::SCALAR_LEN {
            return Err(GroupError::InvalidEncoding("scalar"));
        }
        let repr = k256::FieldBytes::clone_from_slice(bytes);
        Option::<k256::Scalar>::from(k256::Scalar::from_repr(repr))
            .ok_or(GroupError::InvalidEncoding("scalar"))
    }

    fn scalar_reduce_wide(bytes: &[u8]) -> Self::Scalar {
        let reduced = BigUint::from_bytes_be(bytes) % Self::order();
        let mut repr = [0u8; 32];
        let be = reduced.to_bytes_be();
        repr[32 - be.len()..].copy_from_slice(&be);
        Self::scalar_decode(&repr).expect("value below the order is canonical")
    }

    fn generator() -> Self::Element {
        k256::ProjectivePoint::GENERATOR
    }

    fn identity() -> Self::Element {
        k256::ProjectivePoint::IDENTITY
    }

    fn op(a: &Self::Element, b: &Self::Element) -> Self::Element {
        a + b
    }

    fn exp(base: &Self::Element, e: &Self::Scalar) -> Self::Element {
        base * e
    }

    fn element_encode(p: &Self::Element) -> Vec<u8> {
        use k256::elliptic_curve::group::GroupEncoding;
        if p == &k256::ProjectivePoint::IDENTITY {
            return vec![0u8; Self::ELEMENT_LEN];
        }
        p.to_bytes().to_vec()
    }

    fn element_decode(bytes: &[u8]) -> Result<Self::Element, GroupError> {
        use k256::elliptic_curve::group::GroupEncoding;
        if bytes.len() != Self::ELEMENT_LEN {
            return Err(GroupError::InvalidEncoding("element"));
        }
        if bytes.iter().all(|&b| b == 0) {
            return Ok(k256::ProjectivePoint::IDENTITY);
        }
        let repr = k256::CompressedPoint::clone_from_slice(bytes);
        Option::<k256::ProjectivePoint>::from(k256::ProjectivePoint::from_bytes(&repr))
            .ok_or(GroupError::InvalidEncoding("element"))
    }

    fn hash_to_group(msg: &[u8], dst: &[u8]) -> Self::Element {
        use k256::elliptic_curve::hash2curve::{ExpandMsgXmd, GroupDigest};
        k256::Secp256k1::hash_from_bytes::<ExpandMsgXmd<sha2::Sha256>>(&[msg], &[dst])
            .expect("fixed-length expansion with a nonempty tag cannot fail")
    }
}

// ---------------------------------------------------------------------------
// toy Schnorr group
// ---------------------------------------------------------------------------

/// Scalar of a [`ToyGroup`]: an integer reduced mod `Q` at construction.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct ToyScalar<const Q: u64>(u64);

impl<const Q: u64> ToyScalar<Q> {
    pub fn new(v: u64) -> Self {
        Self(v % Q)
    }

    pub fn value(self) -> u64 {
        self.0
    }
}

/// Element of a [`ToyGroup`]: a member of the order-`q` subgroup of `Z_p^*`.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct ToyElement<const P: u64>(u64);

impl<const P: u64> ToyElement<P> {
    pub fn value(self) -> u64 {
        self.0
    }
}

/// Schnorr group inside `Z_P^*`: the subgroup of prime order `Q` generated
/// by `GEN`. Small parameters keep every protocol value hand-checkable.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ToyGroup<const P: u64, const Q: u64, const GEN: u64>;

/// The hand-checkable instance used throughout the tests: `p = 23`,
/// `q = 11`, `g = 2`.
pub type ToySchnorr = ToyGroup<23, 11, 2>;

fn modpow(mut base: u64, mut exp: u64, modulus: u64) -> u64 {
    let mut acc: u64 = 1;
    base %= modulus;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = ((acc as u128 * base as u128) % modulus as u128) as u64;
        }
        base = ((base as u128 * base as u128) % modulus as u128) as u64;
        exp >>= 1;
    }
    acc
}

impl<const P: u64, const Q: u64, const GEN: u64> ToyGroup<P, Q, GEN> {
    fn in_subgroup(v: u64) -> bool {
        v >= 1 && v < P && modpow(v, Q, P) == 1
    }

    /// Builds an element, checking subgroup membership.
    pub fn element(v: u64) -> Result<ToyElement<P>, GroupError> {
        if Self::in_subgroup(v) {
            Ok(ToyElement(v))
        } else {
            Err(GroupError::InvalidEncoding("element"))
        }
    }
}

impl<const P: u64, const Q: u64, const GEN: u64> Group for ToyGroup<P, Q, GEN> {
    type Scalar = ToyScalar<Q>;
    type Element = ToyElement<P>;

    const ID: &'static str = "toy-schnorr";
    const HASH_SUITE: &'static str = "toy_SHAKE256_cofactor_RO_";
    const SCALAR_LEN: usize = 32;
    const ELEMENT_LEN: usize = 1;
    const DST_INPUT: &'static [u8] = b"TSE-V01-toy-schnorr-dprf-input";
    const DST_GEN: &'static [u8] = b"TSE-V01-toy-schnorr-pedersen-h";

    fn order() -> BigUint {
        BigUint::from(Q)
    }

    fn scalar_from_u64(v: u64) -> Self::Scalar {
        ToyScalar::new(v)
    }

    fn scalar_is_zero(a: &Self::Scalar) -> bool {
        a.0 == 0
    }

    fn scalar_add(a: &Self::Scalar, b: &Self::Scalar) -> Self::Scalar {
        ToyScalar::new(a.0 + b.0)
    }

    fn scalar_sub(a: &Self::Scalar, b: &Self::Scalar) -> Self::Scalar {
        ToyScalar::new(a.0 + Q - b.0)
    }

    fn scalar_mul(a: &Self::Scalar, b: &Self::Scalar) -> Self::Scalar {
        ToyScalar(((a.0 as u128 * b.0 as u128) % Q as u128) as u64)
    }

    fn scalar_inv(a: &Self::Scalar) -> Result<Self::Scalar, GroupError> {
        if a.0 == 0 {
            return Err(GroupError::ZeroInverse);
        }
        // Q is prime, so a^(Q-2) is the inverse.
        Ok(ToyScalar(modpow(a.0, Q - 2, Q)))
    }

    fn scalar_encode(a: &Self::Scalar) -> Vec<u8> {
        let mut out = vec![0u8; Self::SCALAR_LEN];
        out[Self::SCALAR_LEN - 8..].copy_from_slice(&a.0.to_be_bytes());
        out
    }

    fn scalar_decode(bytes: &[u8]) -> Result<Self::Scalar, GroupError> {
        if bytes.len() != Self::SCALAR_LEN || bytes[..Self::SCALAR_LEN - 8].iter().any(|&b| b != 0)
        {
            return Err(GroupError::InvalidEncoding("scalar"));
        }
        let v = u64::from_be_bytes(bytes[Self::SCALAR_LEN - 8..].try_into().unwrap());
        if v >= Q {
            return Err(GroupError::InvalidEncoding("scalar"));
        }
        Ok(ToyScalar(v))
    }

    fn scalar_reduce_wide(bytes: &[u8]) -> Self::Scalar {
        let mut acc: u64 = 0;
        for &b in bytes {
            acc = ((acc as u128 * 256 + b as u128) % Q as u128) as u64;
        }
        ToyScalar(acc)
    }

    fn generator() -> Self::Element {
        ToyElement(GEN)
    }

    fn identity() -> Self::Element {
        ToyElement(1)
    }

    fn op(a: &Self::Element, b: &Self::Element) -> Self::Element {
        ToyElement(((a.0 as u128 * b.0 as u128) % P as u128) as u64)
    }

    fn exp(base: &Self::Element, e: &Self::Scalar) -> Self::Element {
        ToyElement(modpow(base.0, e.0, P))
    }

    fn element_encode(p: &Self::Element) -> Vec<u8> {
        debug_assert!(P < 256);
        vec![p.0 as u8]
    }

    fn element_decode(bytes: &[u8]) -> Result<Self::Element, GroupError> {
        if bytes.len() != Self::ELEMENT_LEN {
            return Err(GroupError::InvalidEncoding("element"));
        }
        Self::element(bytes[0] as u64)
    }

    fn hash_to_group(msg: &[u8], dst: &[u8]) -> Self::Element {
        // Mirror of the curve suite: expand to two independent field values,
        // map each into the subgroup by cofactor exponentiation, multiply.
        let mut xof = Shake256::default();
        xof.update(&(dst.len() as u16).to_be_bytes());
        xof.update(dst);
        xof.update(msg);
        let mut wide = [0u8; 32];
        xof.finalize_xof().read(&mut wide);

        let cofactor = (P - 1) / Q;
        let map = |chunk: &[u8]| -> u64 {
            let mut acc: u64 = 0;
            for &b in chunk {
                acc = ((acc as u128 * 256 + b as u128) % (P - 1) as u128) as u64;
            }
            // acc + 1 lies in [1, p-1]; raise to the cofactor to land in the
            // order-q subgroup.
            modpow(acc + 1, cofactor, P)
        };
        let p0 = map(&wide[..16]);
        let p1 = map(&wide[16..]);
        ToyElement(((p0 as u128 * p1 as u128) % P as u128) as u64)
    }
}
