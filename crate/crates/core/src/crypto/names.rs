use base64::engine::general_purpose::URL_SAFE_NO_PAD;
use base64::Engine;
use subtle::ConstantTimeEq;

use super::keys::NameKeyPair;
use super::mac::hmac_sha256;
use super::raw::{self, BLOCK_LEN, IV_LEN};
use super::{CryptoError, Result};

/// Longest file name accepted for encryption, in bytes.
pub const MAX_NAME_LEN: usize = 255;
/// Shortest possible token: one IV plus one block, base64url without padding.
pub const MIN_TOKEN_LEN: usize = 43;

fn synthetic_iv(nk: &NameKeyPair, name: &[u8]) -> [u8; IV_LEN] {
    let mut iv = [0u8; IV_LEN];
    iv.copy_from_slice(&hmac_sha256(nk.mac_part(), name)[..IV_LEN]);
    iv
}

/// Deterministically encrypts a file name into a path-safe token.
///
/// The IV is the truncated HMAC of the name, so equal names map to equal
/// tokens and the owner can recompute remote paths without an index.
pub fn encrypt_name(nk: &NameKeyPair, logical_name: &str) -> Result<String> {
    let name = logical_name.as_bytes();
    if name.is_empty() {
        return Err(CryptoError::Empty("file name"));
    }
    if name.len() > MAX_NAME_LEN {
        return Err(CryptoError::NameTooLong(name.len(), MAX_NAME_LEN));
    }
    let iv = synthetic_iv(nk, name);
    let mut out = Vec::with_capacity(IV_LEN + raw::padded_len(name.len()));
    out.extend_from_slice(&iv);
    out.extend_from_slice(&raw::pkcs7_encrypt(nk.enc_part(), &iv, name));
    Ok(URL_SAFE_NO_PAD.encode(out))
}

pub fn decrypt_name(nk: &NameKeyPair, token: &str) -> Result<String> {
    if token.len() < MIN_TOKEN_LEN {
        return Err(CryptoError::Format(format!(
            "token too short: {}",
            token.len()
        )));
    }
    let bytes = URL_SAFE_NO_PAD
        .decode(token)
        .map_err(|e| CryptoError::Format(format!("bad token encoding: {e}")))?;
    if bytes.len() < IV_LEN + BLOCK_LEN {
        return Err(CryptoError::Format("token too short".into()));
    }
    let (iv, ct) = bytes.split_at(IV_LEN);
    let iv: [u8; IV_LEN] = iv.try_into().expect("split at IV_LEN");
    let name = raw::pkcs7_decrypt(nk.enc_part(), &iv, ct)?;
    if !bool::from(synthetic_iv(nk, &name).ct_eq(&iv)) {
        return Err(CryptoError::Format(
            "name token failed authentication".into(),
        ));
    }
    String::from_utf8(name).map_err(|_| CryptoError::Format("name is not UTF-8".into()))
}
