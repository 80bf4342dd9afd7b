//! Stable configuration fingerprints (FNV-1a 64).
//!
//! Fingerprints only need to be deterministic across platforms and runs so a
//! segmentation file can be traced back to the parameters that produced it;
//! they are not security hashes.

use alloc::string::String;
use core::fmt::Write;

const FNV_OFFSET: u64 = 0xcbf29ce484222325;
const FNV_PRIME: u64 = 0x100000001b3;

pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = FNV_OFFSET;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

/// 16-hex-char fingerprint of a canonical parameter string.
pub fn fingerprint(canonical: &str) -> String {
    let mut out = String::with_capacity(16);
    write!(out, "{:016x}", fnv1a(canonical.as_bytes())).expect("writing to String cannot fail");
    out
}
