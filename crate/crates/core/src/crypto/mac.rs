use hmac::{Hmac, Mac};
use sha2::Sha256;
use subtle::ConstantTimeEq;

use super::keys::MacKey;
use super::{CryptoError, Result};

type HmacSha256 = Hmac<Sha256>;

pub const TAG_LEN: usize = 32;

/// HMAC-SHA-256 output over a file's plaintext content.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct MacTag([u8; TAG_LEN]);

impl MacTag {
    pub fn as_bytes(&self) -> &[u8; TAG_LEN] {
        &self.0
    }

    pub fn from_slice(bytes: &[u8]) -> Result<Self> {
        bytes.try_into().map(Self).map_err(|_| CryptoError::Length {
            expected: TAG_LEN,
            actual: bytes.len(),
        })
    }
}

pub fn hmac_sha256(key: &[u8], data: &[u8]) -> [u8; TAG_LEN] {
    let mut mac = HmacSha256::new_from_slice(key).expect("hmac accepts any key length");
    mac.update(data);
    mac.finalize().into_bytes().into()
}

pub fn compute_mac(key: &MacKey, content: &[u8]) -> MacTag {
    MacTag(hmac_sha256(key.as_bytes(), content))
}

/// Constant-time check of `tag` against the recomputed tag.
pub fn verify_mac(key: &MacKey, content: &[u8], tag: &MacTag) -> bool {
    compute_mac(key, content).0.ct_eq(&tag.0).into()
}
