//! Independent oracle for the secp256k1 random-oracle hash-to-curve suite
//! (`secp256k1_XMD:SHA-256_SSWU_RO_`).
//!
//! Implemented from the suite definition over big-integer field arithmetic:
//! `expand_message_xmd` with SHA-256, two field elements, the simplified
//! SWU map onto the 3-isogenous curve E' (y² = x³ + A'x + B'), the
//! 3-isogeny back to secp256k1, and affine point addition. Deliberately
//! shares no code with the implementation under test.

use num_bigint::BigUint;
use sha2::{Digest, Sha256};

fn hexu(s: &str) -> BigUint {
    BigUint::parse_bytes(s.as_bytes(), 16).expect("static hex")
}

pub struct Fp {
    pub p: BigUint,
}

impl Fp {
    fn new() -> Self {
        Self {
            // 2^256 - 2^32 - 977
            p: hexu("fffffffffffffffffffffffffffffffffffffffffffffffffffffffefffffc2f"),
        }
    }

    fn add(&self, a: &BigUint, b: &BigUint) -> BigUint {
        (a + b) % &self.p
    }

    fn sub(&self, a: &BigUint, b: &BigUint) -> BigUint {
        ((a + &self.p) - (b % &self.p)) % &self.p
    }

    fn mul(&self, a: &BigUint, b: &BigUint) -> BigUint {
        (a * b) % &self.p
    }

    fn pow(&self, a: &BigUint, e: &BigUint) -> BigUint {
        a.modpow(e, &self.p)
    }

    fn inv(&self, a: &BigUint) -> BigUint {
        // p is prime: a^(p-2).
        self.pow(a, &(&self.p - 2u32))
    }

    fn is_square(&self, a: &BigUint) -> bool {
        if a == &BigUint::ZERO {
            return true;
        }
        self.pow(a, &((&self.p - 1u32) >> 1)) == BigUint::from(1u32)
    }

    fn sqrt(&self, a: &BigUint) -> BigUint {
        // p = 3 mod 4.
        self.pow(a, &((&self.p + 1u32) >> 2))
    }

    fn sgn0(&self, a: &BigUint) -> u8 {
        (a % 2u32 == BigUint::from(1u32)) as u8
    }
}

/// A point on secp256k1 in affine coordinates, None = infinity.
pub type Point = Option<(BigUint, BigUint)>;

fn curve_add(f: &Fp, a: &Point, b: &Point) -> Point {
    match (a, b) {
        (None, _) => b.clone(),
        (_, None) => a.clone(),
        (Some((x1, y1)), Some((x2, y2))) => {
            if x1 == x2 {
                if f.add(y1, y2) == BigUint::ZERO {
                    return None;
                }
                // Doubling: lambda = 3x^2 / 2y (a = 0 on secp256k1).
                let num = f.mul(&BigUint::from(3u32), &f.mul(x1, x1));
                let den = f.inv(&f.mul(&BigUint::from(2u32), y1));
                let lambda = f.mul(&num, &den);
                let x3 = f.sub(&f.mul(&lambda, &lambda), &f.add(x1, x2));
                let y3 = f.sub(&f.mul(&lambda, &f.sub(x1, &x3)), y1);
                Some((x3, y3))
            } else {
                let lambda = f.mul(&f.sub(y2, y1), &f.inv(&f.sub(x2, x1)));
                let x3 = f.sub(&f.mul(&lambda, &lambda), &f.add(x1, x2));
                let y3 = f.sub(&f.mul(&lambda, &f.sub(x1, &x3)), y1);
                Some((x3, y3))
            }
        }
    }
}

/// expand_message_xmd with SHA-256.
fn expand_message_xmd(msg: &[u8], dst: &[u8], len: usize) -> Vec<u8> {
    assert!(dst.len() <= 255, "oracle only handles short tags");
    const B_IN_BYTES: usize = 32;
    const R_IN_BYTES: usize = 64;
    let ell = len.div_ceil(B_IN_BYTES);
    assert!(ell <= 255);

    let mut dst_prime = dst.to_vec();
    dst_prime.push(dst.len() as u8);

    let mut h = Sha256::new();
    h.update([0u8; R_IN_BYTES]);
    h.update(msg);
    h.update((len as u16).to_be_bytes());
    h.update([0u8]);
    h.update(&dst_prime);
    let b0: [u8; 32] = h.finalize().into();

    let mut out = Vec::with_capacity(ell * B_IN_BYTES);
    let mut prev: [u8; 32] = {
        let mut h = Sha256::new();
        h.update(b0);
        h.update([1u8]);
        h.update(&dst_prime);
        h.finalize().into()
    };
    out.extend_from_slice(&prev);
    for i in 2..=ell {
        let mut xored = [0u8; 32];
        for (j, x) in xored.iter_mut().enumerate() {
            *x = b0[j] ^ prev[j];
        }
        let mut h = Sha256::new();
        h.update(xored);
        h.update([i as u8]);
        h.update(&dst_prime);
        prev = h.finalize().into();
        out.extend_from_slice(&prev);
    }
    out.truncate(len);
    out
}

fn hash_to_field(f: &Fp, msg: &[u8], dst: &[u8]) -> (BigUint, BigUint) {
    let uniform = expand_message_xmd(msg, dst, 96);
    let u0 = BigUint::from_bytes_be(&uniform[..48]) % &f.p;
    let u1 = BigUint::from_bytes_be(&uniform[48..]) % &f.p;
    (u0, u1)
}

struct IsoCurve {
    a: BigUint,
    b: BigUint,
    z: BigUint,
}

impl IsoCurve {
    fn new() -> Self {
        Self {
            a: hexu("3f8731abdd661adca08a5558f0f5d272e953d363cb6f0e5d405447c01a444533"),
            b: BigUint::from(1771u32),
            // Z = -11 mod p
            z: hexu("fffffffffffffffffffffffffffffffffffffffffffffffffffffffefffffc24"),
        }
    }

    /// Simplified SWU onto E'. Textbook branch version.
    fn map_to_curve(&self, f: &Fp, u: &BigUint) -> (BigUint, BigUint) {
        let u2 = f.mul(u, u);
        let tv1 = f.mul(&self.z, &u2);
        let tv2 = f.add(&f.mul(&tv1, &tv1), &tv1);
        let x1 = if tv2 == BigUint::ZERO {
            // Exceptional case: x1 = B / (Z * A).
            f.mul(&self.b, &f.inv(&f.mul(&self.z, &self.a)))
        } else {
            // x1 = (-B / A) * (1 + 1 / tv2)
            let inv_tv2 = f.inv(&tv2);
            let factor = f.add(&BigUint::from(1u32), &inv_tv2);
            let neg_b_over_a = f.mul(&f.sub(&f.p.clone(), &self.b), &f.inv(&self.a));
            f.mul(&neg_b_over_a, &factor)
        };
        let g = |x: &BigUint| f.add(&f.add(&f.mul(&f.mul(x, x), x), &f.mul(&self.a, x)), &self.b);
        let gx1 = g(&x1);
        let (x, y2) = if f.is_square(&gx1) {
            (x1, gx1)
        } else {
            let x2 = f.mul(&tv1, &x1);
            let gx2 = g(&x2);
            (x2, gx2)
        };
        let mut y = f.sqrt(&y2);
        debug_assert_eq!(f.mul(&y, &y), y2);
        if f.sgn0(u) != f.sgn0(&y) {
            y = f.sub(&f.p.clone(), &y);
        }
        (x, y)
    }
}

struct Isogeny {
    x_num: [BigUint; 4],
    x_den: [BigUint; 3],
    y_num: [BigUint; 4],
    y_den: [BigUint; 4],
}

impl Isogeny {
    fn new() -> Self {
        Self {
            x_num: [
                hexu("8e38e38e38e38e38e38e38e38e38e38e38e38e38e38e38e38e38e38daaaaa8c7"),
                hexu("07d3d4c80bc321d5b9f315cea7fd44c5d595d2fc0bf63b92dfff1044f17c6581"),
                hexu("534c328d23f234e6e2a413deca25caece4506144037c40314ecbd0b53d9dd262"),
                hexu("8e38e38e38e38e38e38e38e38e38e38e38e38e38e38e38e38e38e38daaaaa88c"),
            ],
            x_den: [
                hexu("d35771193d94918a9ca34ccbb7b640dd86cd409542f8487d9fe6b745781eb49b"),
                hexu("edadc6f64383dc1df7c4b2d51b54225406d36b641f5e41bbc52a56612a8c6d14"),
                BigUint::from(1u32),
            ],
            y_num: [
                hexu("4bda12f684bda12f684bda12f684bda12f684bda12f684bda12f684b8e38e23c"),
                hexu("c75e0c32d5cb7c0fa9d0a54b12a0a6d5647ab046d686da6fdffc90fc201d71a3"),
                hexu("29a6194691f91a73715209ef6512e576722830a201be2018a765e85a9ecee931"),
                hexu("2f684bda12f684bda12f684bda12f684bda12f684bda12f684bda12f38e38d84"),
            ],
            y_den: [
                hexu("fffffffffffffffffffffffffffffffffffffffffffffffffffffffefffff93b"),
                hexu("7a06534bb8bdb49fd5e9e6632722c2989467c1bfc8e8d978dfb425d2685c2573"),
                hexu("6484aa716545ca2cf3a70c3fa8fe337e0a3d21162f0d6299a7bf8192bfd2a76f"),
                BigUint::from(1u32),
            ],
        }
    }

    fn horner(f: &Fp, coeffs: &[BigUint], x: &BigUint) -> BigUint {
        let mut acc = coeffs.last().expect("nonempty").clone();
        for c in coeffs.iter().rev().skip(1) {
            acc = f.add(&f.mul(&acc, x), c);
        }
        acc
    }

    fn map(&self, f: &Fp, x: &BigUint, y: &BigUint) -> (BigUint, BigUint) {
        let xn = Self::horner(f, &self.x_num, x);
        let xd = Self::horner(f, &self.x_den, x);
        let yn = Self::horner(f, &self.y_num, x);
        let yd = Self::horner(f, &self.y_den, x);
        let x_out = f.mul(&xn, &f.inv(&xd));
        let y_out = f.mul(y, &f.mul(&yn, &f.inv(&yd)));
        (x_out, y_out)
    }
}

/// The full random-oracle suite: returns the affine point.
pub fn hash_to_curve(msg: &[u8], dst: &[u8]) -> Point {
    let f = Fp::new();
    let iso_curve = IsoCurve::new();
    let isogeny = Isogeny::new();
    let (u0, u1) = hash_to_field(&f, msg, dst);
    let (x0p, y0p) = iso_curve.map_to_curve(&f, &u0);
    let (x1p, y1p) = iso_curve.map_to_curve(&f, &u1);
    let q0 = isogeny.map(&f, &x0p, &y0p);
    let q1 = isogeny.map(&f, &x1p, &y1p);
    curve_add(&f, &Some(q0), &Some(q1))
}

/// Compressed SEC1 encoding of an oracle point, for comparison with the
/// implementation's canonical element encoding. Infinity is all zeros.
pub fn encode_compressed(point: &Point) -> [u8; 33] {
    let mut out = [0u8; 33];
    if let Some((x, y)) = point {
        out[0] = if y % 2u32 == BigUint::ZERO {
            0x02
        } else {
            0x03
        };
        let be = x.to_bytes_be();
        out[33 - be.len()..].copy_from_slice(&be);
    }
    out
}
