//! Ring-LWE backend: symmetric approximate arithmetic over
//! `Z_Q[X]/(X^n + 1)` with `Q` an RNS product of chain primes.
//!
//! Scalars occupy the constant coefficient. Ciphertexts are pairs `(b, a)`
//! with `b = -a*s + m + e`, stored residue-wise per active prime.
//! Ciphertext-ciphertext products are relinearized with an RNS-digit
//! key-switching key (one table per pre-rescale level); rescaling drops the
//! top chain prime and divides the embedded scale by it.

use std::sync::Arc;

use num_bigint::{BigInt, BigUint};
use num_traits::Zero;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::poly::{
    add_mod, center, inv_mod, mul_mod, reduce_signed, reduce_signed_wide, sub_mod, PrimeCtx,
};
use super::HeError;

/// Shared per-prime NTT contexts for one parameter set.
#[derive(Debug)]
pub(crate) struct RingCtx {
    pub n: usize,
    pub primes: Vec<u64>,
    pub ctxs: Vec<PrimeCtx>,
}

impl RingCtx {
    pub fn new(n: usize, primes: &[u64]) -> Result<Arc<Self>, HeError> {
        let ctxs = primes
            .iter()
            .map(|&q| PrimeCtx::new(q, n))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| HeError::InvalidParams(e.to_string()))?;
        Ok(Arc::new(Self {
            n,
            primes: primes.to_vec(),
            ctxs,
        }))
    }
}

/// Residue-wise polynomial: `rows[i][k]` is coefficient `k` mod prime `i`.
pub(crate) type ResPoly = Vec<Vec<u64>>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct RlweCt {
    pub b: ResPoly,
    pub a: ResPoly,
}

impl RlweCt {
    pub fn active_primes(&self) -> usize {
        self.b.len()
    }
}

#[derive(Debug)]
pub(crate) struct RlweSecret {
    pub ring: Arc<RingCtx>,
    /// Ternary secret, kept in signed form and residue form.
    pub s: Vec<i64>,
    pub s_res: ResPoly,
}

/// One key-switching key: encrypts `s^2 * e_j` (CRT idempotent of digit `j`).
#[derive(Debug, Clone)]
pub(crate) struct KsKey {
    pub b: ResPoly,
    pub a: ResPoly,
}

/// Relinearization tables. `relin[l][j]` switches digit `j` of a product at
/// pre-rescale level `l`; entries exist for `l >= 1`.
#[derive(Debug)]
pub(crate) struct RlweEvalKey {
    pub ring: Arc<RingCtx>,
    pub relin: Vec<Vec<KsKey>>,
}

fn sample_uniform_row<R: Rng + ?Sized>(n: usize, q: u64, rng: &mut R) -> Vec<u64> {
    (0..n).map(|_| rng.random_range(0..q)).collect()
}

fn sample_noise<R: Rng + ?Sized>(n: usize, std: f64, rng: &mut R) -> Vec<i64> {
    let normal = Normal::new(0.0, std).expect("std > 0");
    (0..n).map(|_| normal.sample(rng).round() as i64).collect()
}

fn signed_to_res(v: &[i64], primes: &[u64]) -> ResPoly {
    primes
        .iter()
        .map(|&q| v.iter().map(|&x| reduce_signed(x, q)).collect())
        .collect()
}

fn row_add(a: &[u64], b: &[u64], q: u64) -> Vec<u64> {
    a.iter().zip(b).map(|(&x, &y)| add_mod(x, y, q)).collect()
}

fn row_sub(a: &[u64], b: &[u64], q: u64) -> Vec<u64> {
    a.iter().zip(b).map(|(&x, &y)| sub_mod(x, y, q)).collect()
}

pub(crate) fn keygen_rlwe<R: Rng + ?Sized>(
    ring: Arc<RingCtx>,
    error_std: f64,
    rng: &mut R,
) -> (RlweSecret, RlweEvalKey) {
    let n = ring.n;
    let s: Vec<i64> = (0..n).map(|_| rng.random_range(-1i64..=1)).collect();
    let s_res = signed_to_res(&s, &ring.primes);

    // s^2 residues, for embedding into the key-switching keys
    let s2_res: ResPoly = ring
        .ctxs
        .iter()
        .zip(&s_res)
        .map(|(ctx, row)| ctx.mul_poly(row, row))
        .collect();

    let top = ring.primes.len() - 1;
    let mut relin: Vec<Vec<KsKey>> = Vec::with_capacity(top + 1);
    for level in 0..=top {
        let mut keys = Vec::new();
        if level >= 1 {
            for j in 0..=level {
                let mut b_rows = Vec::with_capacity(level + 1);
                let mut a_rows = Vec::with_capacity(level + 1);
                let e = sample_noise(n, error_std, rng);
                let a_int: Vec<Vec<u64>> = (0..=level)
                    .map(|i| sample_uniform_row(n, ring.primes[i], rng))
                    .collect();
                for i in 0..=level {
                    let q = ring.primes[i];
                    let a_s = ring.ctxs[i].mul_poly(&a_int[i], &s_res[i]);
                    let mut b: Vec<u64> = (0..n)
                        .map(|k| {
                            let e_k = reduce_signed(e[k], q);
                            sub_mod(e_k, a_s[k], q)
                        })
                        .collect();
                    if i == j {
                        for k in 0..n {
                            b[k] = add_mod(b[k], s2_res[i][k], q);
                        }
                    }
                    b_rows.push(b);
                    a_rows.push(a_int[i].clone());
                }
                keys.push(KsKey {
                    b: b_rows,
                    a: a_rows,
                });
            }
        }
        relin.push(keys);
    }

    (
        RlweSecret {
            ring: ring.clone(),
            s,
            s_res,
        },
        RlweEvalKey { ring, relin },
    )
}

/// Reassemble secret and evaluation keys from their serialized parts.
pub(crate) fn rebuild_from_parts(
    ring: Arc<RingCtx>,
    s: Vec<i64>,
    relin_rows: Vec<Vec<(Vec<Vec<u64>>, Vec<Vec<u64>>)>>,
) -> Result<(RlweSecret, RlweEvalKey), HeError> {
    if s.len() != ring.n {
        return Err(HeError::Serialization(
            "secret length differs from ring dimension".into(),
        ));
    }
    let s_res = signed_to_res(&s, &ring.primes);
    let top = ring.primes.len() - 1;
    if relin_rows.len() != top + 1 {
        return Err(HeError::Serialization("relin table count mismatch".into()));
    }
    let mut relin = Vec::with_capacity(top + 1);
    for (level, keys) in relin_rows.into_iter().enumerate() {
        if level >= 1 && keys.len() != level + 1 {
            return Err(HeError::Serialization("relin digit count mismatch".into()));
        }
        relin.push(
            keys.into_iter()
                .map(|(b, a)| KsKey { b, a })
                .collect::<Vec<_>>(),
        );
    }
    Ok((
        RlweSecret {
            ring: ring.clone(),
            s,
            s_res,
        },
        RlweEvalKey { ring, relin },
    ))
}

/// Fresh encryption of the already-scaled integer message `m` (constant
/// coefficient), over the primes `0..=level`.
pub(crate) fn enc_rlwe<R: Rng + ?Sized>(
    m: i128,
    level: usize,
    sk: &RlweSecret,
    error_std: f64,
    rng: &mut R,
) -> RlweCt {
    let ring = &sk.ring;
    let n = ring.n;
    let e = sample_noise(n, error_std, rng);
    let mut b_rows = Vec::with_capacity(level + 1);
    let mut a_rows = Vec::with_capacity(level + 1);
    for i in 0..=level {
        let q = ring.primes[i];
        let a = sample_uniform_row(n, q, rng);
        let a_s = ring.ctxs[i].mul_poly(&a, &sk.s_res[i]);
        let m_q = reduce_signed_wide(m, q);
        let b: Vec<u64> = (0..n)
            .map(|k| {
                let mut v = sub_mod(reduce_signed(e[k], q), a_s[k], q);
                if k == 0 {
                    v = add_mod(v, m_q, q);
                }
                v
            })
            .collect();
        b_rows.push(b);
        a_rows.push(a);
    }
    RlweCt {
        b: b_rows,
        a: a_rows,
    }
}

/// Decrypts to the centered integer message carried by the constant
/// coefficient (scale division is the caller's concern).
pub(crate) fn dec_rlwe(ct: &RlweCt, sk: &RlweSecret) -> BigInt {
    let ring = &sk.ring;
    let active = ct.active_primes();
    let mut residues = Vec::with_capacity(active);
    for i in 0..active {
        let a_s = ring.ctxs[i].mul_poly(&ct.a[i], &sk.s_res[i]);
        residues.push(add_mod(ct.b[i][0], a_s[0], ring.primes[i]));
    }
    let primes = &ring.primes[..active];
    let q: BigUint = primes.iter().map(|&p| BigUint::from(p)).product();
    let mut acc = BigUint::zero();
    for (i, (&r, &p)) in residues.iter().zip(primes).enumerate() {
        let _ = i;
        let m_i = &q / p;
        let m_i_mod_p = (&m_i % p).try_into().unwrap_or(0u64);
        let coeff = mul_mod(r, inv_mod(m_i_mod_p, p), p);
        acc += m_i * coeff;
    }
    acc %= &q;
    crate::encoding::mu_residue(&acc, &q)
}

pub(crate) fn add_rlwe(x: &RlweCt, y: &RlweCt, primes: &[u64]) -> RlweCt {
    let rows = x.active_primes();
    RlweCt {
        b: (0..rows)
            .map(|i| row_add(&x.b[i], &y.b[i], primes[i]))
            .collect(),
        a: (0..rows)
            .map(|i| row_add(&x.a[i], &y.a[i], primes[i]))
            .collect(),
    }
}

pub(crate) fn sub_rlwe(x: &RlweCt, y: &RlweCt, primes: &[u64]) -> RlweCt {
    let rows = x.active_primes();
    RlweCt {
        b: (0..rows)
            .map(|i| row_sub(&x.b[i], &y.b[i], primes[i]))
            .collect(),
        a: (0..rows)
            .map(|i| row_sub(&x.a[i], &y.a[i], primes[i]))
            .collect(),
    }
}

/// Ciphertext-ciphertext product with relinearization (no rescale).
pub(crate) fn mult_rlwe(x: &RlweCt, y: &RlweCt, evk: &RlweEvalKey) -> RlweCt {
    let ring = &evk.ring;
    let level = x.active_primes() - 1;
    let n = ring.n;

    let mut d0: ResPoly = Vec::with_capacity(level + 1);
    let mut d1: ResPoly = Vec::with_capacity(level + 1);
    let mut d2: ResPoly = Vec::with_capacity(level + 1);
    for i in 0..=level {
        let ctx = &ring.ctxs[i];
        let q = ring.primes[i];
        d0.push(ctx.mul_poly(&x.b[i], &y.b[i]));
        let cross1 = ctx.mul_poly(&x.b[i], &y.a[i]);
        let cross2 = ctx.mul_poly(&x.a[i], &y.b[i]);
        d1.push(row_add(&cross1, &cross2, q));
        d2.push(ctx.mul_poly(&x.a[i], &y.a[i]));
    }

    // Relinearize d2*s^2 down onto (b, a) using the RNS digits of d2.
    let table = &evk.relin[level];
    for j in 0..=level {
        let qj = ring.primes[j];
        let digit_signed: Vec<i64> = d2[j].iter().map(|&v| center(v, qj)).collect();
        let key = &table[j];
        for i in 0..=level {
            let q = ring.primes[i];
            let digit_row: Vec<u64> = digit_signed.iter().map(|&v| reduce_signed(v, q)).collect();
            let kb = ring.ctxs[i].mul_poly(&digit_row, &key.b[i]);
            let ka = ring.ctxs[i].mul_poly(&digit_row, &key.a[i]);
            for k in 0..n {
                d0[i][k] = add_mod(d0[i][k], kb[k], q);
                d1[i][k] = add_mod(d1[i][k], ka[k], q);
            }
        }
    }

    RlweCt { b: d0, a: d1 }
}

/// Multiply both components by the signed scalar `w` (no rescale).
pub(crate) fn mult_plain_rlwe(x: &RlweCt, w: i128, primes: &[u64]) -> RlweCt {
    let rows = x.active_primes();
    let scale_row = |row: &[u64], q: u64| -> Vec<u64> {
        let w_q = reduce_signed_wide(w, q);
        row.iter().map(|&v| mul_mod(v, w_q, q)).collect()
    };
    RlweCt {
        b: (0..rows).map(|i| scale_row(&x.b[i], primes[i])).collect(),
        a: (0..rows).map(|i| scale_row(&x.a[i], primes[i])).collect(),
    }
}

/// Drop the top prime: `c' = (c - [c]_{q_top}) / q_top` on remaining rows.
pub(crate) fn rescale_rlwe(x: &RlweCt, primes: &[u64]) -> RlweCt {
    let top = x.active_primes() - 1;
    let q_top = primes[top];
    let scale_component = |rows: &ResPoly| -> ResPoly {
        let top_centered: Vec<i64> = rows[top].iter().map(|&v| center(v, q_top)).collect();
        (0..top)
            .map(|i| {
                let q = primes[i];
                let inv_top = inv_mod(q_top % q, q);
                rows[i]
                    .iter()
                    .zip(&top_centered)
                    .map(|(&v, &r)| {
                        let shifted = sub_mod(v, reduce_signed(r, q), q);
                        mul_mod(shifted, inv_top, q)
                    })
                    .collect()
            })
            .collect()
    };
    RlweCt {
        b: scale_component(&x.b),
        a: scale_component(&x.a),
    }
}

/// Exact modulus reduction: forget the top rows down to `target_level`.
pub(crate) fn reduce_level_rlwe(x: &RlweCt, target_level: usize) -> RlweCt {
    RlweCt {
        b: x.b[..=target_level].to_vec(),
        a: x.a[..=target_level].to_vec(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn setup(n: usize, nprimes: usize) -> (Arc<RingCtx>, RlweSecret, RlweEvalKey) {
        let primes = &super::super::primes::CHAIN_PRIMES[..nprimes];
        let ring = RingCtx::new(n, primes).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let (sk, evk) = keygen_rlwe(ring.clone(), 3.2, &mut rng);
        (ring, sk, evk)
    }

    #[test]
    fn enc_dec_roundtrip_integer_domain() {
        let (ring, sk, _) = setup(1024, 3);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let m: i128 = 123_456_789_012;
        let ct = enc_rlwe(m, ring.primes.len() - 1, &sk, 3.2, &mut rng);
        let got = dec_rlwe(&ct, &sk);
        let err = (got - BigInt::from(m)).magnitude().clone();
        assert!(err < BigUint::from(64u32), "noise too large: {err}");
    }

    #[test]
    fn homomorphic_product_integer_domain() {
        let (ring, sk, evk) = setup(1024, 3);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let scale = 1i128 << 30;
        let (x, y) = (3i128, -7i128);
        let ct_x = enc_rlwe(x * scale, ring.primes.len() - 1, &sk, 3.2, &mut rng);
        let ct_y = enc_rlwe(y * scale, ring.primes.len() - 1, &sk, 3.2, &mut rng);
        let prod = mult_rlwe(&ct_x, &ct_y, &evk);
        let got = dec_rlwe(&prod, &sk);
        let want = BigInt::from(x * y * scale * scale);
        let err = (got - want).magnitude().clone();
        // relin noise stays far below the scale^2 payload
        assert!(err < BigUint::from(1u128 << 52), "err {err}");
    }

    #[test]
    fn rescale_divides_message_by_top_prime() {
        let (ring, sk, _) = setup(1024, 3);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let top = ring.primes.len() - 1;
        let m = (ring.primes[top] as i128) * 9_000_000;
        let ct = enc_rlwe(m, top, &sk, 3.2, &mut rng);
        let dropped = rescale_rlwe(&ct, &ring.primes);
        let got = dec_rlwe(&dropped, &sk);
        let err = (got - BigInt::from(9_000_000i64)).magnitude().clone();
        assert!(err < BigUint::from(2048u32), "err {err}");
    }
}
