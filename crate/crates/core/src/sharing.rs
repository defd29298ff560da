//! Shamir secret sharing over the scalar field, with Lagrange
//! reconstruction, zero-secret sharings for proactive refresh, and the share
//! summation that the dealer-free setup relies on.
//!
//! Evaluation points are fixed to the participant index `j` (as a scalar),
//! which is canonical and collision-free whenever `n < q`.

use std::collections::BTreeMap;

use num_bigint::BigUint;
use rand_core::{CryptoRng, RngCore};
use thiserror::Error;

use crate::group::{random_scalar, Group};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SharingError {
    #[error("threshold must satisfy 1 <= k <= n, got k={k}, n={n}")]
    BadThreshold { k: u16, n: u16 },
    #[error("evaluation points must be distinct and nonzero modulo the group order")]
    DuplicatePoint,
    #[error("coinciding x-coordinates produce a zero denominator")]
    ZeroDenominator,
    #[error("at least one share is required")]
    EmptySubset,
}

/// A polynomial over `Z_q`; `coeffs[0]` is the shared secret.
#[derive(Clone, Debug)]
pub struct Polynomial<G: Group> {
    coeffs: Vec<G::Scalar>,
}

impl<G: Group> Polynomial<G> {
    /// Constant term `secret` plus `degree` uniformly random coefficients.
    pub fn random<R: RngCore + CryptoRng>(secret: G::Scalar, degree: usize, rng: &mut R) -> Self {
        let mut coeffs = Vec::with_capacity(degree + 1);
        coeffs.push(secret);
        for _ in 0..degree {
            coeffs.push(random_scalar::<G, _>(rng));
        }
        Self { coeffs }
    }

    pub fn from_coefficients(coeffs: Vec<G::Scalar>) -> Self {
        assert!(!coeffs.is_empty(), "a polynomial needs a constant term");
        Self { coeffs }
    }

    pub fn degree_bound(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn secret(&self) -> &G::Scalar {
        &self.coeffs[0]
    }

    /// Horner evaluation at `x`.
    pub fn evaluate(&self, x: &G::Scalar) -> G::Scalar {
        let mut acc = self.coeffs.last().expect("nonempty").clone();
        for c in self.coeffs.iter().rev().skip(1) {
            acc = G::scalar_add(&G::scalar_mul(&acc, x), c);
        }
        acc
    }
}

/// Shares of one polynomial at the points `x_j = j` for `j in 1..=n`.
#[derive(Clone, Debug)]
pub struct ShareSet<G: Group> {
    pub k: u16,
    pub n: u16,
    pub shares: BTreeMap<u16, G::Scalar>,
}

impl<G: Group> ShareSet<G> {
    pub fn share_for(&self, index: u16) -> Option<&G::Scalar> {
        self.shares.get(&index)
    }
}

/// A participant's aggregated key share, tagged with the refresh epoch.
#[derive(Clone, Debug, PartialEq)]
pub struct SecretShare<G: Group> {
    /// Evaluation point (the participant index, nonzero).
    pub index: u16,
    pub value: G::Scalar,
    /// 0 after setup, incremented by each completed refresh.
    pub epoch: u32,
}

fn validate_params<G: Group>(k: u16, n: u16) -> Result<(), SharingError> {
    if k < 1 || k > n {
        return Err(SharingError::BadThreshold { k, n });
    }
    // Indices 1..=n stay distinct and nonzero mod q only while n < q.
    if BigUint::from(n) >= G::order() {
        return Err(SharingError::DuplicatePoint);
    }
    Ok(())
}

/// Shares `secret` with a fresh degree-(k-1) polynomial.
pub fn generate_shares<G: Group, R: RngCore + CryptoRng>(
    k: u16,
    n: u16,
    secret: &G::Scalar,
    rng: &mut R,
) -> Result<ShareSet<G>, SharingError> {
    validate_params::<G>(k, n)?;
    let poly = Polynomial::<G>::random(secret.clone(), (k - 1) as usize, rng);
    shares_from_polynomial(k, n, &poly)
}

/// Shares zero; summing such a sharing onto an existing one re-randomizes
/// the shares without changing the shared secret.
pub fn generate_zero_shares<G: Group, R: RngCore + CryptoRng>(
    k: u16,
    n: u16,
    rng: &mut R,
) -> Result<ShareSet<G>, SharingError> {
    generate_shares(k, n, &G::scalar_zero(), rng)
}

/// Evaluates an explicit polynomial at the canonical points. The polynomial
/// degree is not forced to `k - 1`; the DKG test phase is what detects a
/// dealer using the wrong degree.
pub fn shares_from_polynomial<G: Group>(
    k: u16,
    n: u16,
    poly: &Polynomial<G>,
) -> Result<ShareSet<G>, SharingError> {
    validate_params::<G>(k, n)?;
    let mut shares = BTreeMap::new();
    for j in 1..=n {
        shares.insert(j, poly.evaluate(&G::scalar_from_u64(j as u64)));
    }
    Ok(ShareSet { k, n, shares })
}

/// The Lagrange coefficient at zero for member `j` of the point set `k_set`:
/// `λ_j = Π_{i != j} x_i / (x_i - x_j)`.
pub fn lagrange_coefficient<G: Group>(k_set: &[u16], j: u16) -> Result<G::Scalar, SharingError> {
    if k_set.is_empty() {
        return Err(SharingError::EmptySubset);
    }
    if !k_set.contains(&j) {
        return Err(SharingError::DuplicatePoint);
    }
    let x_j = G::scalar_from_u64(j as u64);
    if G::scalar_is_zero(&x_j) {
        return Err(SharingError::DuplicatePoint);
    }
    let mut num = G::scalar_one();
    let mut den = G::scalar_one();
    for &i in k_set {
        if i == j {
            continue;
        }
        let x_i = G::scalar_from_u64(i as u64);
        if G::scalar_is_zero(&x_i) {
            return Err(SharingError::DuplicatePoint);
        }
        num = G::scalar_mul(&num, &x_i);
        den = G::scalar_mul(&den, &G::scalar_sub(&x_i, &x_j));
    }
    let den_inv = G::scalar_inv(&den).map_err(|_| SharingError::ZeroDenominator)?;
    Ok(G::scalar_mul(&num, &den_inv))
}

/// Interpolates the constant term from a subset of shares:
/// `Σ λ_j · value_j`. Equal to the secret whenever the subset holds at
/// least `k` points of a degree-(k-1) sharing.
pub fn combine_shares<G: Group>(
    subset: &BTreeMap<u16, G::Scalar>,
) -> Result<G::Scalar, SharingError> {
    if subset.is_empty() {
        return Err(SharingError::EmptySubset);
    }
    let indices: Vec<u16> = subset.keys().copied().collect();
    let mut acc = G::scalar_zero();
    for (&j, value) in subset {
        let lambda = lagrange_coefficient::<G>(&indices, j)?;
        acc = G::scalar_add(&acc, &G::scalar_mul(&lambda, value));
    }
    Ok(acc)
}

/// Modular sum of per-dealer share values; by linearity the summed shares
/// form a sharing of the sum of the dealt secrets.
pub fn sum_share_values<G: Group>(values: &[G::Scalar]) -> G::Scalar {
    debug_assert!(!values.is_empty());
    let mut acc = G::scalar_zero();
    for v in values {
        acc = G::scalar_add(&acc, v);
    }
    acc
}
