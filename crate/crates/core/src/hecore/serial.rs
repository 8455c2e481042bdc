//! Ciphertext wire format.
//!
//! 16-byte header: backend tag (1 byte), format version (1 byte), level
//! (u16 LE), scale_power (u32 LE), ring dimension (u32 LE, 0 for the
//! reference backend), polynomial count (u32 LE). The body starts with the
//! embedded scale (f64 LE) followed by each polynomial as a length-prefixed
//! little-endian u64 limb array.

use num_bigint::BigUint;

use super::rlwe::RlweCt;
use super::{Ciphertext, HeError, Payload};

const VERSION: u8 = 1;
const TAG_REFERENCE: u8 = 1;
const TAG_RLWE: u8 = 2;

pub fn to_bytes(ct: &Ciphertext) -> Vec<u8> {
    let (tag, ring_dim, polys): (u8, u32, Vec<&[u64]>) = match &ct.payload {
        Payload::Reference(v) => {
            let limbs = v.to_u64_digits();
            return assemble(
                TAG_REFERENCE,
                ct,
                0,
                std::iter::once(limbs.as_slice()),
                1,
            );
        }
        Payload::Rlwe(c) => {
            let rows: Vec<&[u64]> = c
                .b
                .iter()
                .chain(c.a.iter())
                .map(|row| row.as_slice())
                .collect();
            (TAG_RLWE, c.b[0].len() as u32, rows)
        }
    };
    let count = polys.len() as u32;
    assemble(tag, ct, ring_dim, polys.into_iter(), count)
}

fn assemble<'a>(
    tag: u8,
    ct: &Ciphertext,
    ring_dim: u32,
    polys: impl Iterator<Item = &'a [u64]>,
    count: u32,
) -> Vec<u8> {
    let mut out = Vec::new();
    out.push(tag);
    out.push(VERSION);
    out.extend_from_slice(&(ct.level as u16).to_le_bytes());
    out.extend_from_slice(&ct.scale_power.to_le_bytes());
    out.extend_from_slice(&ring_dim.to_le_bytes());
    out.extend_from_slice(&count.to_le_bytes());
    out.extend_from_slice(&ct.scale.to_le_bytes());
    for poly in polys {
        out.extend_from_slice(&(poly.len() as u32).to_le_bytes());
        for &limb in poly {
            out.extend_from_slice(&limb.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], HeError> {
        if self.pos + n > self.buf.len() {
            return Err(HeError::Serialization("truncated ciphertext".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16, HeError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, HeError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, HeError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn limbs(&mut self) -> Result<Vec<u64>, HeError> {
        let n = self.u32()? as usize;
        let raw = self.take(n * 8)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

pub fn from_bytes(bytes: &[u8]) -> Result<Ciphertext, HeError> {
    let mut r = Reader { buf: bytes, pos: 0 };
    let tag = r.take(1)?[0];
    let version = r.take(1)?[0];
    if version != VERSION {
        return Err(HeError::Serialization(format!(
            "unsupported format version {version}"
        )));
    }
    let level = r.u16()? as usize;
    let scale_power = r.u32()?;
    let ring_dim = r.u32()? as usize;
    let count = r.u32()? as usize;
    let scale = r.f64()?;
    if !scale.is_finite() || scale < 1.0 {
        return Err(HeError::Serialization("invalid embedded scale".into()));
    }
    let payload = match tag {
        TAG_REFERENCE => {
            if count != 1 {
                return Err(HeError::Serialization(
                    "reference ciphertext must hold one limb array".into(),
                ));
            }
            Payload::Reference(BigUint::new(
                r.limbs()?.iter().flat_map(|&l| [(l & 0xFFFF_FFFF) as u32, (l >> 32) as u32]).collect(),
            ))
        }
        TAG_RLWE => {
            if count != 2 * (level + 1) {
                return Err(HeError::Serialization(format!(
                    "rlwe ciphertext at level {level} must hold {} polynomials, found {count}",
                    2 * (level + 1)
                )));
            }
            let mut rows = Vec::with_capacity(count);
            for _ in 0..count {
                let row = r.limbs()?;
                if row.len() != ring_dim {
                    return Err(HeError::Serialization(
                        "polynomial length differs from ring dimension".into(),
                    ));
                }
                rows.push(row);
            }
            let a = rows.split_off(level + 1);
            Payload::Rlwe(RlweCt { b: rows, a })
        }
        other => {
            return Err(HeError::Serialization(format!("unknown backend tag {other}")));
        }
    };
    if r.pos != bytes.len() {
        return Err(HeError::Serialization("trailing bytes".into()));
    }
    Ok(Ciphertext {
        payload,
        level,
        scale_power,
        scale,
    })
}

const KEY_MAGIC: &[u8; 4] = b"ESKY";

/// Key-file format: magic, version, backend tag, JSON-encoded parameters
/// (length-prefixed), then for the RLWE backend the ternary secret (one
/// byte per coefficient) and the relinearization tables.
pub fn keys_to_bytes(keys: &super::SecretKeyMaterial, params: &super::HeParams) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(KEY_MAGIC);
    out.push(VERSION);
    out.push(match keys.backend() {
        super::BackendKind::Reference => TAG_REFERENCE,
        super::BackendKind::Rlwe => TAG_RLWE,
    });
    let params_json = serde_json::to_vec(params).expect("params serialize");
    out.extend_from_slice(&(params_json.len() as u32).to_le_bytes());
    out.extend_from_slice(&params_json);
    if let Some(sk) = keys.rlwe_secret() {
        for &c in &sk.s {
            out.push(c as i8 as u8);
        }
        let evk = keys.eval_key();
        let evk = evk.rlwe_eval().expect("rlwe eval key");
        for level in 1..=params.levels {
            for key in &evk.relin[level] {
                for rows in [&key.b, &key.a] {
                    for row in rows.iter() {
                        for &limb in row {
                            out.extend_from_slice(&limb.to_le_bytes());
                        }
                    }
                }
            }
        }
    }
    out
}

pub fn keys_from_bytes(bytes: &[u8]) -> Result<(super::SecretKeyMaterial, super::HeParams), HeError> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(4)? != KEY_MAGIC {
        return Err(HeError::Serialization("not a key file".into()));
    }
    if r.take(1)?[0] != VERSION {
        return Err(HeError::Serialization("unsupported key-file version".into()));
    }
    let tag = r.take(1)?[0];
    let params_len = r.u32()? as usize;
    let params: super::HeParams = serde_json::from_slice(r.take(params_len)?)
        .map_err(|e| HeError::Serialization(format!("bad params block: {e}")))?;
    params.validate()?;
    match tag {
        TAG_REFERENCE => {
            if r.pos != bytes.len() {
                return Err(HeError::Serialization("trailing bytes".into()));
            }
            Ok((super::SecretKeyMaterial::reference(), params))
        }
        TAG_RLWE => {
            let n = params.ring_dimension;
            let s: Vec<i64> = r.take(n)?.iter().map(|&b| b as i8 as i64).collect();
            if s.iter().any(|&v| !(-1..=1).contains(&v)) {
                return Err(HeError::Serialization("secret is not ternary".into()));
            }
            let mut read_rows = |count: usize| -> Result<Vec<Vec<u64>>, HeError> {
                (0..count)
                    .map(|_| {
                        let raw = r.take(n * 8)?;
                        Ok(raw
                            .chunks_exact(8)
                            .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
                            .collect())
                    })
                    .collect()
            };
            let mut relin: Vec<Vec<(Vec<Vec<u64>>, Vec<Vec<u64>>)>> = vec![Vec::new()];
            for level in 1..=params.levels {
                let mut keys = Vec::new();
                for _ in 0..=level {
                    let b = read_rows(level + 1)?;
                    let a = read_rows(level + 1)?;
                    keys.push((b, a));
                }
                relin.push(keys);
            }
            if r.pos != bytes.len() {
                return Err(HeError::Serialization("trailing bytes".into()));
            }
            let keys = super::SecretKeyMaterial::rlwe_from_parts(&params, s, relin)?;
            Ok((keys, params))
        }
        other => Err(HeError::Serialization(format!("unknown backend tag {other}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hecore::{dec, enc, keygen, BackendKind, HeParams};
    use rand::SeedableRng;

    #[test]
    fn roundtrip_both_backends() {
        let p = HeParams::rlwe_test();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        for backend in [BackendKind::Reference, BackendKind::Rlwe] {
            let keys = keygen(backend, &p, &mut rng).unwrap();
            let ct = enc(-3.75, &keys, &p, &mut rng).unwrap();
            let bytes = to_bytes(&ct);
            assert_eq!(bytes[0], if backend == BackendKind::Reference { 1 } else { 2 });
            let back = from_bytes(&bytes).unwrap();
            assert_eq!(back.level(), ct.level());
            assert_eq!(back.scale_power(), ct.scale_power());
            assert_eq!(back, ct);
            assert!((dec(&back, &keys, &p).unwrap() + 3.75).abs() < 1e-6);
        }
    }

    #[test]
    fn serialization_is_deterministic_bytes() {
        let p = HeParams::rlwe_test();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(32);
        let keys = keygen(BackendKind::Reference, &p, &mut rng).unwrap();
        let ct = enc(1.25, &keys, &p, &mut rng).unwrap();
        assert_eq!(to_bytes(&ct), to_bytes(&ct.clone()));
    }

    #[test]
    fn rejects_garbage() {
        assert!(from_bytes(&[]).is_err());
        assert!(from_bytes(&[9; 40]).is_err());
    }

    #[test]
    fn key_files_roundtrip_and_decrypt() {
        let p = HeParams::rlwe_test();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(33);
        for backend in [BackendKind::Reference, BackendKind::Rlwe] {
            let keys = keygen(backend, &p, &mut rng).unwrap();
            let ct = enc(2.5, &keys, &p, &mut rng).unwrap();
            let bytes = keys_to_bytes(&keys, &p);
            let (loaded, loaded_params) = keys_from_bytes(&bytes).unwrap();
            assert_eq!(loaded_params, p);
            assert_eq!(loaded.backend(), backend);
            let got = dec(&ct, &loaded, &p).unwrap();
            assert!((got - 2.5).abs() < 1e-6, "{backend}: {got}");
            // the reloaded evaluation key must relinearize correctly
            let eval = crate::hecore::HeEvaluator::new(p.clone(), loaded.eval_key()).unwrap();
            let prod = eval.mult(&ct, &ct).unwrap();
            let got = dec(&prod, &loaded, &p).unwrap();
            assert!((got - 6.25).abs() < 1e-3, "{backend} mult: {got}");
        }
        assert!(keys_from_bytes(b"ESKYxx").is_err());
    }
}
