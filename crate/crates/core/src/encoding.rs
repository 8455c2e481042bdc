//! Fixed-point encoding of reals into the modular plaintext space `Z_q`.
//!
//! A real `x` is stored as `round(c * x) mod q` for a scaling factor `c >= 1`
//! and modulus `q`. Reconstruction lifts the residue to a signed
//! representative and divides by the scale. Sums must share the same scale;
//! products add the scale exponents, so every value carries its exponent
//! (`scale_power`) as explicit metadata rather than inferring it.

use num_bigint::{BigInt, BigUint};
use num_traits::{FromPrimitive, One, Signed, ToPrimitive};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EncodingError {
    #[error("scaling factor must be >= 1 (got {0})")]
    InvalidScale(String),
    #[error("modulus must be >= 2")]
    InvalidModulus,
    #[error("value not representable: |c*x| >= q/2, reconstruction would wrap")]
    OutOfRange,
    #[error("value is not a finite real")]
    NonFinite,
}

/// Scaling factor `c` and modulus `q` of the fixed-point map.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointParams {
    scale_c: f64,
    modulus_q: BigUint,
}

impl FixedPointParams {
    pub fn new(scale_c: f64, modulus_q: BigUint) -> Result<Self, EncodingError> {
        if !(scale_c >= 1.0) || !scale_c.is_finite() {
            return Err(EncodingError::InvalidScale(format!("{scale_c}")));
        }
        if modulus_q < BigUint::from(2u8) {
            return Err(EncodingError::InvalidModulus);
        }
        Ok(Self { scale_c, modulus_q })
    }

    /// `c = 2^40`, `q = 2^160`.
    pub fn paper() -> Self {
        Self {
            scale_c: (1u64 << 40) as f64,
            modulus_q: BigUint::one() << 160,
        }
    }

    pub fn scale_c(&self) -> f64 {
        self.scale_c
    }

    pub fn modulus_q(&self) -> &BigUint {
        &self.modulus_q
    }

    fn half_q(&self) -> BigUint {
        &self.modulus_q >> 1
    }
}

/// A residue in `[0, q)` together with the scale exponent `e`, so the
/// represented real is `mu(value) / c^e`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedInt {
    pub value: BigUint,
    pub scale_power: u32,
}

/// `round(c * x) mod q`, rounding ties away from zero. Wraps silently when
/// `|c*x|` exceeds `q/2`; use [`encode_checked`] to reject that case.
pub fn encode(x: f64, p: &FixedPointParams) -> EncodedInt {
    let scaled = (p.scale_c * x).round();
    let r = BigInt::from_f64(scaled).expect("finite scaled value");
    EncodedInt {
        value: rem_euclid_big(&r, &p.modulus_q),
        scale_power: 1,
    }
}

/// Like [`encode`] but reports the range violation `|c*x| >= q/2`, past
/// which reconstruction is no longer faithful.
pub fn encode_checked(x: f64, p: &FixedPointParams) -> Result<EncodedInt, EncodingError> {
    if !x.is_finite() {
        return Err(EncodingError::NonFinite);
    }
    let scaled = (p.scale_c * x).round();
    let r = BigInt::from_f64(scaled).ok_or(EncodingError::NonFinite)?;
    if r.abs().to_biguint().expect("abs") >= p.half_q() {
        return Err(EncodingError::OutOfRange);
    }
    Ok(EncodedInt {
        value: rem_euclid_big(&r, &p.modulus_q),
        scale_power: 1,
    })
}

/// Signed representative: `value - q` when `value >= q/2`, else `value`.
pub fn mu(v: &EncodedInt, p: &FixedPointParams) -> BigInt {
    mu_residue(&v.value, &p.modulus_q)
}

pub(crate) fn mu_residue(value: &BigUint, q: &BigUint) -> BigInt {
    debug_assert!(value < q);
    if value >= &(q >> 1) {
        BigInt::from(value.clone()) - BigInt::from(q.clone())
    } else {
        BigInt::from(value.clone())
    }
}

/// `mu(value) / c^scale_power`.
pub fn decode(v: &EncodedInt, p: &FixedPointParams) -> f64 {
    let signed = mu(v, p);
    signed.to_f64().unwrap_or(f64::NAN) / p.scale_c.powi(v.scale_power as i32)
}

pub(crate) fn rem_euclid_big(r: &BigInt, q: &BigUint) -> BigUint {
    let q_signed = BigInt::from(q.clone());
    let mut m = r % &q_signed;
    if m.is_negative() {
        m += &q_signed;
    }
    m.to_biguint().expect("non-negative after reduction")
}
