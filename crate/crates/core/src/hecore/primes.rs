//! The modulus-chain primes.
//!
//! All are congruent to 1 mod 4096, so negacyclic NTTs up to ring dimension
//! 2048 are available, and all sit within 2.6e-7 relative distance of 2^40 so
//! that one rescale divides the embedded scale by almost exactly the scaling
//! factor c = 2^40.

/// 40-bit primes `≡ 1 (mod 4096)`, ordered by distance from `2^40`.
pub const CHAIN_PRIMES: &[u64] = &[
    1_099_511_590_913, // 2^40 - 36863
    1_099_511_549_953, // 2^40 - 77823
    1_099_511_795_713, // 2^40 + 167937
    1_099_511_525_377, // 2^40 - 102399
    1_099_511_799_809, // 2^40 + 172033
    1_099_511_492_609, // 2^40 - 135167
    1_099_511_836_673, // 2^40 + 208897
    1_099_511_480_321, // 2^40 - 147455
];
