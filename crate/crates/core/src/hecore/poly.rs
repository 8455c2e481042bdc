//! Negacyclic polynomial arithmetic in `Z_q[X]/(X^n + 1)` for one prime `q`.
//!
//! Products use a number-theoretic transform when `2n | q - 1` (true for all
//! chain primes, which are chosen `≡ 1 mod 4096`); a schoolbook fallback
//! exists as the test oracle.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PolyError {
    #[error("ring dimension {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("prime {q} does not support an NTT of size {n} (2n must divide q - 1)")]
    NoNttSupport { q: u64, n: usize },
}

#[inline]
pub(crate) fn add_mod(a: u64, b: u64, q: u64) -> u64 {
    let s = a + b;
    if s >= q {
        s - q
    } else {
        s
    }
}

#[inline]
pub(crate) fn sub_mod(a: u64, b: u64, q: u64) -> u64 {
    if a >= b {
        a - b
    } else {
        a + q - b
    }
}

#[inline]
pub(crate) fn mul_mod(a: u64, b: u64, q: u64) -> u64 {
    ((a as u128 * b as u128) % q as u128) as u64
}

pub(crate) fn pow_mod(mut base: u64, mut exp: u64, q: u64) -> u64 {
    let mut acc = 1u64;
    base %= q;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, q);
        }
        base = mul_mod(base, base, q);
        exp >>= 1;
    }
    acc
}

/// Inverse by Fermat; `q` must be prime.
pub(crate) fn inv_mod(a: u64, q: u64) -> u64 {
    pow_mod(a, q - 2, q)
}

/// Centered representative in `[-q/2, q/2)`.
#[inline]
pub(crate) fn center(v: u64, q: u64) -> i64 {
    if v >= q.div_ceil(2) {
        v as i64 - q as i64
    } else {
        v as i64
    }
}

/// Reduce a signed value into `[0, q)`.
#[inline]
pub(crate) fn reduce_signed(v: i64, q: u64) -> u64 {
    let r = v % q as i64;
    if r < 0 {
        (r + q as i64) as u64
    } else {
        r as u64
    }
}

#[inline]
pub(crate) fn reduce_signed_wide(v: i128, q: u64) -> u64 {
    let r = v % q as i128;
    if r < 0 {
        (r + q as i128) as u64
    } else {
        r as u64
    }
}

/// Per-prime NTT context: twiddle factors for the negacyclic transform of
/// size `n`, with `psi` a primitive `2n`-th root of unity mod `q`.
#[derive(Debug, Clone)]
pub(crate) struct PrimeCtx {
    pub q: u64,
    pub n: usize,
    psi_rev: Vec<u64>,
    psi_inv_rev: Vec<u64>,
    n_inv: u64,
}

impl PrimeCtx {
    pub fn new(q: u64, n: usize) -> Result<Self, PolyError> {
        if !n.is_power_of_two() {
            return Err(PolyError::NotPowerOfTwo(n));
        }
        let order = 2 * n as u64;
        if (q - 1) % order != 0 {
            return Err(PolyError::NoNttSupport { q, n });
        }
        let psi = find_root_of_unity(order, q);
        let psi_inv = inv_mod(psi, q);
        let log_n = n.trailing_zeros();
        let mut psi_rev = vec![0u64; n];
        let mut psi_inv_rev = vec![0u64; n];
        let mut p = 1u64;
        let mut pi = 1u64;
        let mut pow_psi = vec![0u64; n];
        let mut pow_psi_inv = vec![0u64; n];
        for i in 0..n {
            pow_psi[i] = p;
            pow_psi_inv[i] = pi;
            p = mul_mod(p, psi, q);
            pi = mul_mod(pi, psi_inv, q);
        }
        for i in 0..n {
            let r = bit_reverse(i, log_n);
            psi_rev[i] = pow_psi[r];
            psi_inv_rev[i] = pow_psi_inv[r];
        }
        Ok(Self {
            q,
            n,
            psi_rev,
            psi_inv_rev,
            n_inv: inv_mod(n as u64, q),
        })
    }

    pub fn forward(&self, a: &mut [u64]) {
        let q = self.q;
        let n = self.n;
        let mut t = n;
        let mut m = 1;
        while m < n {
            t /= 2;
            for i in 0..m {
                let j1 = 2 * i * t;
                let s = self.psi_rev[m + i];
                for j in j1..j1 + t {
                    let u = a[j];
                    let v = mul_mod(a[j + t], s, q);
                    a[j] = add_mod(u, v, q);
                    a[j + t] = sub_mod(u, v, q);
                }
            }
            m *= 2;
        }
    }

    pub fn inverse(&self, a: &mut [u64]) {
        let q = self.q;
        let n = self.n;
        let mut t = 1;
        let mut m = n;
        while m > 1 {
            let h = m / 2;
            let mut j1 = 0;
            for i in 0..h {
                let s = self.psi_inv_rev[h + i];
                for j in j1..j1 + t {
                    let u = a[j];
                    let v = a[j + t];
                    a[j] = add_mod(u, v, q);
                    a[j + t] = mul_mod(sub_mod(u, v, q), s, q);
                }
                j1 += 2 * t;
            }
            t *= 2;
            m = h;
        }
        for x in a.iter_mut() {
            *x = mul_mod(*x, self.n_inv, q);
        }
    }

    /// Negacyclic product `a * b mod (X^n + 1, q)`.
    pub fn mul_poly(&self, a: &[u64], b: &[u64]) -> Vec<u64> {
        let mut fa = a.to_vec();
        let mut fb = b.to_vec();
        self.forward(&mut fa);
        self.forward(&mut fb);
        for i in 0..self.n {
            fa[i] = mul_mod(fa[i], fb[i], self.q);
        }
        self.inverse(&mut fa);
        fa
    }
}

fn bit_reverse(mut x: usize, bits: u32) -> usize {
    let mut r = 0;
    for _ in 0..bits {
        r = (r << 1) | (x & 1);
        x >>= 1;
    }
    r
}

/// Any element of order exactly `order` (a power of two dividing `q - 1`).
fn find_root_of_unity(order: u64, q: u64) -> u64 {
    let cofactor = (q - 1) / order;
    for base in 2u64.. {
        let cand = pow_mod(base, cofactor, q);
        if pow_mod(cand, order / 2, q) != 1 {
            return cand;
        }
    }
    unreachable!("a prime field contains generators")
}

/// O(n^2) negacyclic product, kept as the independent oracle for the NTT path.
#[cfg_attr(not(test), allow(dead_code))]
pub(crate) fn mul_poly_schoolbook(a: &[u64], b: &[u64], q: u64) -> Vec<u64> {
    let n = a.len();
    let mut out = vec![0u64; n];
    for (i, &ai) in a.iter().enumerate() {
        if ai == 0 {
            continue;
        }
        for (j, &bj) in b.iter().enumerate() {
            let prod = mul_mod(ai, bj, q);
            let k = i + j;
            if k < n {
                out[k] = add_mod(out[k], prod, q);
            } else {
                out[k - n] = sub_mod(out[k - n], prod, q);
            }
        }
    }
    out
}
