//! Token hashing.
//!
//! Every token is mapped to a 64-bit integer with XXH3-64 (seed 0). The same
//! function is used for training and matching, so a model only stores hashes
//! and template texts, never a token dictionary. The value `0` is reserved for
//! the wildcard `*`; a real token whose raw hash is `0` is remapped to
//! [`ZERO_REMAP`].

use xxhash_rust::xxh3::xxh3_64;

use crate::error::{Error, Result};

/// Identifier written into model headers. Models hashed with a different
/// function are rejected on load.
pub const HASH_FUNCTION_ID: &str = "xxh3-64";

/// The wildcard token.
pub const WILDCARD: &str = "*";

/// Hash reserved for [`WILDCARD`].
pub const WILDCARD_HASH: u64 = 0;

/// Substitute for a real token whose raw hash happens to be zero.
pub const ZERO_REMAP: u64 = 0x9e37_79b9_7f4a_7c15;

/// Hash of a real (non-wildcard, non-empty) token.
pub fn token_hash(token: &str) -> Result<u64> {
    if token.is_empty() {
        return Err(Error::InvalidInput("cannot hash an empty token".into()));
    }
    if token == WILDCARD {
        return Err(Error::InvalidInput(
            "\"*\" is the reserved wildcard and has no token hash".into(),
        ));
    }
    Ok(raw_token_hash(token))
}

/// Hash used by the encoder: the wildcard maps to [`WILDCARD_HASH`], anything
/// else to [`token_hash`]. Callers guarantee `token` is non-empty.
#[inline]
pub fn encode_token(token: &str) -> u64 {
    if token == WILDCARD {
        WILDCARD_HASH
    } else {
        raw_token_hash(token)
    }
}

#[inline]
fn raw_token_hash(token: &str) -> u64 {
    match xxh3_64(token.as_bytes()) {
        0 => ZERO_REMAP,
        h => h,
    }
}

/// Stable 64-bit digest of arbitrary bytes (used for config fingerprints and
/// per-group RNG derivation).
pub fn digest(bytes: &[u8]) -> u64 {
    xxh3_64(bytes)
}
