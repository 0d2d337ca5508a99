//! Cryptographic building blocks.
//!
//! Content is sealed with AES-256-CBC/PKCS7 under a fresh per-file key,
//! integrity is an HMAC-SHA-256 tag over the plaintext content, file names
//! are encrypted deterministically with an HMAC-derived synthetic IV, and
//! file keys can be split into XOR shares so that every share is needed to
//! rebuild the key.

mod envelope;
mod keys;
mod mac;
mod names;
mod password;
pub mod raw;
mod split;

pub use envelope::{decrypt_blob, encrypt_blob, CipherBlob, MAX_HEADER_NAME_LEN};
pub use keys::{generate_key, MacKey, NameKeyPair, SymmetricKey, KEY_LEN};
pub use mac::{compute_mac, verify_mac, MacTag};
pub use names::{decrypt_name, encrypt_name, MAX_NAME_LEN, MIN_TOKEN_LEN};
pub use password::{derive_provider_password, DerivedPassword, DERIVED_PASSWORD_LEN};
pub use split::{combine_key, split_key, KeyShare};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CryptoError {
    #[error("malformed input: {0}")]
    Format(String),
    #[error("name is {0} bytes, limit is {1}")]
    NameTooLong(usize, usize),
    #[error("{0} must not be empty")]
    Empty(&'static str),
    #[error("expected {expected} bytes, got {actual}")]
    Length { expected: usize, actual: usize },
    #[error("invalid key shares: {0}")]
    Shares(String),
    #[error("randomness source failed: {0}")]
    Randomness(String),
}

pub type Result<T> = std::result::Result<T, CryptoError>;

pub(crate) fn fill_random(buf: &mut [u8]) -> Result<()> {
    use rand::RngCore;
    rand::rngs::OsRng
        .try_fill_bytes(buf)
        .map_err(|e| CryptoError::Randomness(e.to_string()))
}
