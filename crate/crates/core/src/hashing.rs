//! Stable hashes shared by the embedder, the feature hasher and the cache.

use std::hash::Hasher;

use fnv::FnvHasher;
use sha2::{Digest, Sha256};

/// Name of the 64-bit hash used for bag-of-words bins and feature hashing.
pub const STABLE_HASH_ID: &str = "fnv1a-64";

/// Name of the digest used for cache keys, checksums and run digests.
pub const DIGEST_ID: &str = "sha256";

/// FNV-1a over the raw bytes. Identical on every platform and process.
pub fn stable_hash64(bytes: &[u8]) -> u64 {
    let mut hasher = FnvHasher::default();
    hasher.write(bytes);
    hasher.finish()
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
