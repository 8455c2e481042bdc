//! Leveled homomorphic arithmetic over encrypted scalars.
//!
//! One contract, two backends. The reference backend performs the exact
//! modular arithmetic on bare encoded integers (no keys, no noise,
//! deterministic); the RLWE backend is a symmetric approximate-arithmetic
//! scheme over a negacyclic polynomial ring with an RNS modulus chain.
//! Every ciphertext-ciphertext or ciphertext-plaintext multiplication folds
//! in the mandated rescale, so one multiplication costs exactly one level.

mod poly;
mod primes;
mod reference;
mod rlwe;
pub mod serial;

use std::sync::Arc;

use num_bigint::{BigInt, BigUint};
use num_traits::{FromPrimitive, Signed, ToPrimitive};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use primes::CHAIN_PRIMES;
use reference as rb;
use rlwe::{RingCtx, RlweCt, RlweEvalKey, RlweSecret};

#[derive(Debug, Error)]
pub enum HeError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("operands come from different backends")]
    BackendMismatch,
    #[error("key material does not match the ciphertext backend")]
    KeyMismatch,
    #[error("level mismatch: {left} vs {right}")]
    LevelMismatch { left: usize, right: usize },
    #[error("scale mismatch: operands carry different scales")]
    ScaleMismatch,
    #[error("level exhausted: no modulus left to rescale into")]
    LevelExhausted,
    #[error("value out of range for the configured modulus chain")]
    RangeViolation,
    #[error("cannot raise a ciphertext from level {from} to {to}")]
    LevelRaise { from: usize, to: usize },
    #[error("serialization: {0}")]
    Serialization(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Reference,
    Rlwe,
}

impl std::fmt::Display for BackendKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BackendKind::Reference => write!(f, "reference"),
            BackendKind::Rlwe => write!(f, "rlwe"),
        }
    }
}

impl std::str::FromStr for BackendKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "reference" => Ok(BackendKind::Reference),
            "rlwe" => Ok(BackendKind::Rlwe),
            other => Err(format!("unknown backend '{other}'")),
        }
    }
}

/// Ring dimension, modulus chain, shared scaling factor, and noise width.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct HeParams {
    pub ring_dimension: usize,
    pub modulus_chain: Vec<u64>,
    pub scale_c: f64,
    pub error_std: f64,
    pub levels: usize,
}

impl HeParams {
    /// Mirrors the benchmark configuration: ring dimension 2048, five
    /// ~40-bit primes (product > 2^160), scale 2^40, 4 levels. No security
    /// claim is made here; the preset only reproduces the parameter scale.
    pub fn paper() -> Self {
        Self {
            ring_dimension: 2048,
            modulus_chain: CHAIN_PRIMES[..5].to_vec(),
            scale_c: (1u64 << 40) as f64,
            error_std: 3.2,
            levels: 4,
        }
    }

    /// Smaller ring for fast tests; same chain and scale.
    pub fn rlwe_test() -> Self {
        Self {
            ring_dimension: 1024,
            ..Self::paper()
        }
    }

    /// Truncate the chain to `levels + 1` primes.
    pub fn with_levels(mut self, levels: usize) -> Self {
        self.modulus_chain.truncate(levels + 1);
        self.levels = levels;
        self
    }

    pub fn validate(&self) -> Result<(), HeError> {
        if !self.ring_dimension.is_power_of_two() || self.ring_dimension < 1024 {
            return Err(HeError::InvalidParams(format!(
                "ring dimension {} must be a power of two >= 1024",
                self.ring_dimension
            )));
        }
        if self.modulus_chain.len() < 2 {
            return Err(HeError::InvalidParams(
                "modulus chain needs at least 2 primes".into(),
            ));
        }
        if self.levels != self.modulus_chain.len() - 1 {
            return Err(HeError::InvalidParams(format!(
                "levels {} != chain length {} - 1",
                self.levels,
                self.modulus_chain.len()
            )));
        }
        let mut seen = std::collections::HashSet::new();
        if !self.modulus_chain.iter().all(|q| seen.insert(q)) {
            return Err(HeError::InvalidParams("chain primes must be distinct".into()));
        }
        if !(self.scale_c >= 1.0) {
            return Err(HeError::InvalidParams("scale_c must be >= 1".into()));
        }
        if !(self.error_std > 0.0) {
            return Err(HeError::InvalidParams("error_std must be > 0".into()));
        }
        Ok(())
    }

    /// Product of the active primes at `level` (indices `0..=level`).
    pub fn modulus_at(&self, level: usize) -> BigUint {
        self.modulus_chain[..=level]
            .iter()
            .map(|&q| BigUint::from(q))
            .product()
    }

    pub fn chain_product(&self) -> BigUint {
        self.modulus_at(self.levels)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Payload {
    Reference(BigUint),
    Rlwe(RlweCt),
}

/// An encrypted scalar carrying its chain position (`level`), the formal
/// scale exponent (`scale_power`), and the exact embedded scale.
#[derive(Debug, Clone, PartialEq)]
pub struct Ciphertext {
    pub(crate) payload: Payload,
    level: usize,
    scale_power: u32,
    scale: f64,
}

impl Ciphertext {
    pub fn backend(&self) -> BackendKind {
        match self.payload {
            Payload::Reference(_) => BackendKind::Reference,
            Payload::Rlwe(_) => BackendKind::Rlwe,
        }
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn scale_power(&self) -> u32 {
        self.scale_power
    }

    /// The exact scale the payload is embedded at (`~ c^scale_power`,
    /// adjusted by the primes dropped so far).
    pub fn scale(&self) -> f64 {
        self.scale
    }
}

/// Stored level of a ciphertext.
pub fn level_of(ct: &Ciphertext) -> usize {
    ct.level()
}

/// Public evaluation material: enough to compute on ciphertexts, never
/// enough to decrypt. This is what the evaluating party receives.
#[derive(Clone)]
pub struct EvalKey {
    backend: BackendKind,
    rlwe: Option<Arc<RlweEvalKey>>,
}

impl EvalKey {
    pub fn backend(&self) -> BackendKind {
        self.backend
    }

    pub fn reference() -> Self {
        Self {
            backend: BackendKind::Reference,
            rlwe: None,
        }
    }

    pub(crate) fn rlwe_eval(&self) -> Option<&RlweEvalKey> {
        self.rlwe.as_deref()
    }
}

impl std::fmt::Debug for EvalKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EvalKey")
            .field("backend", &self.backend)
            .finish_non_exhaustive()
    }
}

/// Secret key plus the evaluation key it was generated with. Stays with the
/// client role; hand [`SecretKeyMaterial::eval_key`] to the evaluator.
pub struct SecretKeyMaterial {
    backend: BackendKind,
    rlwe: Option<RlweSecret>,
    eval: EvalKey,
}

impl SecretKeyMaterial {
    pub fn backend(&self) -> BackendKind {
        self.backend
    }

    pub fn eval_key(&self) -> EvalKey {
        self.eval.clone()
    }

    pub(crate) fn rlwe_secret(&self) -> Option<&RlweSecret> {
        self.rlwe.as_ref()
    }

    pub(crate) fn reference() -> Self {
        Self {
            backend: BackendKind::Reference,
            rlwe: None,
            eval: EvalKey::reference(),
        }
    }

    /// Rebuild RLWE key material from its stored parts (key-file loading).
    pub(crate) fn rlwe_from_parts(
        params: &HeParams,
        s: Vec<i64>,
        relin: Vec<Vec<(Vec<Vec<u64>>, Vec<Vec<u64>>)>>,
    ) -> Result<Self, HeError> {
        let ring = RingCtx::new(params.ring_dimension, &params.modulus_chain)?;
        let (sk, evk) = rlwe::rebuild_from_parts(ring, s, relin)?;
        Ok(Self {
            backend: BackendKind::Rlwe,
            rlwe: Some(sk),
            eval: EvalKey {
                backend: BackendKind::Rlwe,
                rlwe: Some(Arc::new(evk)),
            },
        })
    }
}

impl std::fmt::Debug for SecretKeyMaterial {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SecretKeyMaterial")
            .field("backend", &self.backend)
            .finish_non_exhaustive()
    }
}

pub fn keygen<R: Rng + ?Sized>(
    backend: BackendKind,
    params: &HeParams,
    rng: &mut R,
) -> Result<SecretKeyMaterial, HeError> {
    params.validate()?;
    match backend {
        BackendKind::Reference => Ok(SecretKeyMaterial {
            backend,
            rlwe: None,
            eval: EvalKey::reference(),
        }),
        BackendKind::Rlwe => {
            let ring = RingCtx::new(params.ring_dimension, &params.modulus_chain)?;
            let (sk, evk) = rlwe::keygen_rlwe(ring, params.error_std, rng);
            Ok(SecretKeyMaterial {
                backend,
                rlwe: Some(sk),
                eval: EvalKey {
                    backend,
                    rlwe: Some(Arc::new(evk)),
                },
            })
        }
    }
}

/// Fresh encryption at full level and the default scale `c`.
pub fn enc<R: Rng + ?Sized>(
    x: f64,
    keys: &SecretKeyMaterial,
    params: &HeParams,
    rng: &mut R,
) -> Result<Ciphertext, HeError> {
    enc_at(x, params.scale_c, params.levels, keys, params, rng)
}

/// Encryption with an explicit embedded scale and level. The evaluator's
/// circuits use this to produce constants whose scales match the ciphertexts
/// they will later combine with.
pub fn enc_at<R: Rng + ?Sized>(
    x: f64,
    scale: f64,
    level: usize,
    keys: &SecretKeyMaterial,
    params: &HeParams,
    rng: &mut R,
) -> Result<Ciphertext, HeError> {
    if !x.is_finite() || !scale.is_finite() || scale < 1.0 {
        return Err(HeError::RangeViolation);
    }
    let scaled = (x * scale).round();
    let m = BigInt::from_f64(scaled).ok_or(HeError::RangeViolation)?;
    let half = params.modulus_at(level) >> 1;
    if m.abs().to_biguint().expect("abs") >= half {
        return Err(HeError::RangeViolation);
    }
    let payload = match keys.backend {
        BackendKind::Reference => Payload::Reference(rb::ref_encode(&m, &params.modulus_at(level))),
        BackendKind::Rlwe => {
            let sk = keys.rlwe.as_ref().ok_or(HeError::KeyMismatch)?;
            let m_i = m.to_i128().ok_or(HeError::RangeViolation)?;
            Payload::Rlwe(rlwe::enc_rlwe(m_i, level, sk, params.error_std, rng))
        }
    };
    Ok(Ciphertext {
        payload,
        level,
        scale_power: 1,
        scale,
    })
}

pub fn dec(ct: &Ciphertext, keys: &SecretKeyMaterial, params: &HeParams) -> Result<f64, HeError> {
    if ct.backend() != keys.backend {
        return Err(HeError::KeyMismatch);
    }
    let centered: BigInt = match &ct.payload {
        Payload::Reference(v) => rb::ref_decode(v, &params.modulus_at(ct.level)),
        Payload::Rlwe(c) => {
            let sk = keys.rlwe.as_ref().ok_or(HeError::KeyMismatch)?;
            rlwe::dec_rlwe(c, sk)
        }
    };
    Ok(centered.to_f64().unwrap_or(f64::NAN) / ct.scale)
}

/// Homomorphic operations over one parameter set. Holds only public
/// evaluation material.
pub struct HeEvaluator {
    params: HeParams,
    eval_key: EvalKey,
}

impl HeEvaluator {
    pub fn new(params: HeParams, eval_key: EvalKey) -> Result<Self, HeError> {
        params.validate()?;
        Ok(Self { params, eval_key })
    }

    pub fn params(&self) -> &HeParams {
        &self.params
    }

    pub fn backend(&self) -> BackendKind {
        self.eval_key.backend
    }

    /// The exact scale a product of scales `a * b` carries after the folded
    /// rescale at `level`. Exposed so circuit builders can encrypt constants
    /// at bit-identical scales.
    pub fn mult_scale(&self, a: f64, b: f64, level: usize) -> f64 {
        a * b / self.params.modulus_chain[level] as f64
    }

    fn check_pair(&self, a: &Ciphertext, b: &Ciphertext) -> Result<(), HeError> {
        if a.backend() != b.backend() || a.backend() != self.eval_key.backend {
            return Err(HeError::BackendMismatch);
        }
        if a.level != b.level {
            return Err(HeError::LevelMismatch {
                left: a.level,
                right: b.level,
            });
        }
        Ok(())
    }

    fn check_additive(&self, a: &Ciphertext, b: &Ciphertext) -> Result<(), HeError> {
        self.check_pair(a, b)?;
        if a.scale_power != b.scale_power {
            return Err(HeError::ScaleMismatch);
        }
        if (a.scale - b.scale).abs() > 1e-9 * a.scale.abs() {
            return Err(HeError::ScaleMismatch);
        }
        Ok(())
    }

    pub fn add(&self, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext, HeError> {
        self.check_additive(a, b)?;
        let payload = match (&a.payload, &b.payload) {
            (Payload::Reference(x), Payload::Reference(y)) => {
                Payload::Reference(rb::ref_add(x, y, &self.params.modulus_at(a.level)))
            }
            (Payload::Rlwe(x), Payload::Rlwe(y)) => {
                Payload::Rlwe(rlwe::add_rlwe(x, y, &self.params.modulus_chain))
            }
            _ => return Err(HeError::BackendMismatch),
        };
        Ok(Ciphertext { payload, ..a.clone() })
    }

    pub fn sub(&self, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext, HeError> {
        self.check_additive(a, b)?;
        let payload = match (&a.payload, &b.payload) {
            (Payload::Reference(x), Payload::Reference(y)) => {
                Payload::Reference(rb::ref_sub(x, y, &self.params.modulus_at(a.level)))
            }
            (Payload::Rlwe(x), Payload::Rlwe(y)) => {
                Payload::Rlwe(rlwe::sub_rlwe(x, y, &self.params.modulus_chain))
            }
            _ => return Err(HeError::BackendMismatch),
        };
        Ok(Ciphertext { payload, ..a.clone() })
    }

    /// Relinearized product without the trailing rescale; scale exponents add.
    pub fn mult_raw(&self, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext, HeError> {
        self.check_pair(a, b)?;
        let payload = match (&a.payload, &b.payload) {
            (Payload::Reference(x), Payload::Reference(y)) => {
                Payload::Reference(rb::ref_mul(x, y, &self.params.modulus_at(a.level)))
            }
            (Payload::Rlwe(x), Payload::Rlwe(y)) => {
                let evk = self.eval_key.rlwe.as_ref().ok_or(HeError::KeyMismatch)?;
                Payload::Rlwe(rlwe::mult_rlwe(x, y, evk))
            }
            _ => return Err(HeError::BackendMismatch),
        };
        Ok(Ciphertext {
            payload,
            level: a.level,
            scale_power: a.scale_power + b.scale_power,
            scale: a.scale * b.scale,
        })
    }

    /// Product with the mandated rescale folded in: one level consumed, the
    /// scale exponent of the inputs restored.
    pub fn mult(&self, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext, HeError> {
        if a.scale_power != b.scale_power {
            return Err(HeError::ScaleMismatch);
        }
        if a.level == 0 {
            return Err(HeError::LevelExhausted);
        }
        let raw = self.mult_raw(a, b)?;
        self.rescale(&raw)
    }

    /// Product with a public scalar, rescale folded in. The factor is
    /// embedded at exactly the dropped prime, so the ciphertext scale is
    /// preserved bit-for-bit.
    pub fn mult_plain(&self, a: &Ciphertext, s: f64) -> Result<Ciphertext, HeError> {
        if a.backend() != self.eval_key.backend {
            return Err(HeError::BackendMismatch);
        }
        if a.level == 0 {
            return Err(HeError::LevelExhausted);
        }
        if !s.is_finite() {
            return Err(HeError::RangeViolation);
        }
        let q_top = self.params.modulus_chain[a.level];
        let w = (s * q_top as f64).round();
        if w.abs() >= i128::MAX as f64 {
            return Err(HeError::RangeViolation);
        }
        let w = w as i128;
        let payload = match &a.payload {
            Payload::Reference(x) => {
                let modulus = self.params.modulus_at(a.level);
                let scaled = rb::ref_mul_signed(x, &BigInt::from(w), &modulus);
                Payload::Reference(rb::ref_rescale(
                    &scaled,
                    &modulus,
                    q_top,
                    &self.params.modulus_at(a.level - 1),
                ))
            }
            Payload::Rlwe(x) => {
                let scaled = rlwe::mult_plain_rlwe(x, w, &self.params.modulus_chain);
                Payload::Rlwe(rlwe::rescale_rlwe(&scaled, &self.params.modulus_chain))
            }
        };
        Ok(Ciphertext {
            payload,
            level: a.level - 1,
            scale_power: a.scale_power,
            scale: a.scale,
        })
    }

    /// Drop one scale exponent and one modulus; the represented value is
    /// preserved up to the backend's rounding/noise.
    pub fn rescale(&self, a: &Ciphertext) -> Result<Ciphertext, HeError> {
        if a.level == 0 {
            return Err(HeError::LevelExhausted);
        }
        if a.scale_power < 2 {
            return Err(HeError::ScaleMismatch);
        }
        let q_top = self.params.modulus_chain[a.level];
        let payload = match &a.payload {
            Payload::Reference(x) => Payload::Reference(rb::ref_rescale(
                x,
                &self.params.modulus_at(a.level),
                q_top,
                &self.params.modulus_at(a.level - 1),
            )),
            Payload::Rlwe(x) => Payload::Rlwe(rlwe::rescale_rlwe(x, &self.params.modulus_chain)),
        };
        Ok(Ciphertext {
            payload,
            level: a.level - 1,
            scale_power: a.scale_power - 1,
            scale: a.scale / q_top as f64,
        })
    }

    /// Exact modulus reduction to a lower level. No rescaling: value, scale,
    /// and scale exponent are untouched. Used to align operands for
    /// addition; costs no multiplicative depth.
    pub fn reduce_level(&self, a: &Ciphertext, target: usize) -> Result<Ciphertext, HeError> {
        if target > a.level {
            return Err(HeError::LevelRaise {
                from: a.level,
                to: target,
            });
        }
        if target == a.level {
            return Ok(a.clone());
        }
        let payload = match &a.payload {
            Payload::Reference(x) => Payload::Reference(rb::ref_reduce_level(
                x,
                &self.params.modulus_at(a.level),
                &self.params.modulus_at(target),
            )),
            Payload::Rlwe(x) => Payload::Rlwe(rlwe::reduce_level_rlwe(x, target)),
        };
        Ok(Ciphertext {
            payload,
            level: target,
            scale_power: a.scale_power,
            scale: a.scale,
        })
    }
}
