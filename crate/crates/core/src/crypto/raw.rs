//! AES-256-CBC without padding, and HMAC-SHA-256 with a key of any length.
//!
//! Exposed for conformance checks against published vectors and for
//! decrypting selected block ranges of a stored blob.

use aes::cipher::block_padding::{NoPadding, Pkcs7};
use aes::cipher::{BlockDecryptMut, BlockEncryptMut, KeyIvInit};
use aes::Aes256;

pub use super::mac::hmac_sha256;
use super::{CryptoError, Result};

pub const BLOCK_LEN: usize = 16;
pub const IV_LEN: usize = 16;

type Enc = cbc::Encryptor<Aes256>;
type Dec = cbc::Decryptor<Aes256>;

fn check_aligned(data: &[u8]) -> Result<()> {
    if !data.len().is_multiple_of(BLOCK_LEN) {
        return Err(CryptoError::Format(format!(
            "length {} is not a multiple of {BLOCK_LEN}",
            data.len()
        )));
    }
    Ok(())
}

/// Encrypts block-aligned `data` in CBC mode.
pub fn cbc_encrypt(key: &[u8; 32], iv: &[u8; IV_LEN], data: &[u8]) -> Result<Vec<u8>> {
    check_aligned(data)?;
    Ok(Enc::new(key.into(), iv.into()).encrypt_padded_vec_mut::<NoPadding>(data))
}

/// Decrypts block-aligned `data` in CBC mode, leaving any padding in place.
pub fn cbc_decrypt(key: &[u8; 32], iv: &[u8; IV_LEN], data: &[u8]) -> Result<Vec<u8>> {
    check_aligned(data)?;
    Dec::new(key.into(), iv.into())
        .decrypt_padded_vec_mut::<NoPadding>(data)
        .map_err(|_| CryptoError::Format("cbc decryption failed".into()))
}

pub(crate) fn pkcs7_encrypt(key: &[u8; 32], iv: &[u8; IV_LEN], plain: &[u8]) -> Vec<u8> {
    Enc::new(key.into(), iv.into()).encrypt_padded_vec_mut::<Pkcs7>(plain)
}

pub(crate) fn pkcs7_decrypt(key: &[u8; 32], iv: &[u8; IV_LEN], data: &[u8]) -> Result<Vec<u8>> {
    if data.is_empty() {
        return Err(CryptoError::Format("empty ciphertext".into()));
    }
    check_aligned(data)?;
    Dec::new(key.into(), iv.into())
        .decrypt_padded_vec_mut::<Pkcs7>(data)
        .map_err(|_| CryptoError::Format("invalid PKCS7 padding".into()))
}

/// Length of the PKCS7-padded form of a `len`-byte plaintext.
pub fn padded_len(len: usize) -> usize {
    (len / BLOCK_LEN + 1) * BLOCK_LEN
}
