//! Reference backend: the same modular arithmetic, levels, and rescaling as
//! the RLWE backend, but on bare encoded integers with no keys and no noise.
//! Deterministic, so transcripts replay byte-exact.

use num_bigint::{BigInt, BigUint};
use num_traits::Signed;

use crate::encoding::{mu_residue, rem_euclid_big};

pub(crate) fn ref_encode(m: &BigInt, modulus: &BigUint) -> BigUint {
    rem_euclid_big(m, modulus)
}

pub(crate) fn ref_decode(v: &BigUint, modulus: &BigUint) -> BigInt {
    mu_residue(v, modulus)
}

pub(crate) fn ref_add(x: &BigUint, y: &BigUint, modulus: &BigUint) -> BigUint {
    (x + y) % modulus
}

pub(crate) fn ref_sub(x: &BigUint, y: &BigUint, modulus: &BigUint) -> BigUint {
    ((x + modulus) - y) % modulus
}

pub(crate) fn ref_mul(x: &BigUint, y: &BigUint, modulus: &BigUint) -> BigUint {
    (x * y) % modulus
}

pub(crate) fn ref_mul_signed(x: &BigUint, w: &BigInt, modulus: &BigUint) -> BigUint {
    rem_euclid_big(&(BigInt::from(x.clone()) * w), modulus)
}

/// Round to nearest, ties away from zero.
fn div_round(n: &BigInt, d: u64) -> BigInt {
    let d = BigInt::from(d);
    let two_n_abs = n.abs() << 1;
    let q: BigInt = (two_n_abs + &d) / (&d << 1);
    if n.is_negative() {
        -q
    } else {
        q
    }
}

/// Divide the centered value by the dropped top prime, then reduce into the
/// shrunk modulus.
pub(crate) fn ref_rescale(
    v: &BigUint,
    modulus_from: &BigUint,
    q_top: u64,
    modulus_to: &BigUint,
) -> BigUint {
    let centered = mu_residue(v, modulus_from);
    rem_euclid_big(&div_round(&centered, q_top), modulus_to)
}

/// Exact modulus reduction (the represented value must fit the new modulus).
pub(crate) fn ref_reduce_level(
    v: &BigUint,
    modulus_from: &BigUint,
    modulus_to: &BigUint,
) -> BigUint {
    rem_euclid_big(&mu_residue(v, modulus_from), modulus_to)
}
