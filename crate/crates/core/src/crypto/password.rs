use std::fmt;

use base64::engine::general_purpose::URL_SAFE_NO_PAD;
use base64::Engine;
use sha2::{Digest, Sha256};

use super::{CryptoError, Result};

pub const DERIVED_PASSWORD_LEN: usize = 24;

/// Per-provider password derived from the user's master password.
#[derive(Clone, PartialEq, Eq)]
pub struct DerivedPassword(String);

impl DerivedPassword {
    /// Wraps a password string already held by a provider (e.g. read back
    /// from an account table). No length policy is applied here.
    pub fn from_stored(text: impl Into<String>) -> Self {
        Self(text.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for DerivedPassword {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("DerivedPassword(..)")
    }
}

/// `base64url(SHA-256(password || username || url))`, truncated to 24 chars.
pub fn derive_provider_password(
    username: &str,
    password: &str,
    provider_url: &str,
) -> Result<DerivedPassword> {
    for (field, value) in [
        ("username", username),
        ("password", password),
        ("provider url", provider_url),
    ] {
        if value.is_empty() {
            return Err(CryptoError::Empty(field));
        }
    }
    let digest = Sha256::new()
        .chain_update(password.as_bytes())
        .chain_update(username.as_bytes())
        .chain_update(provider_url.as_bytes())
        .finalize();
    let mut text = URL_SAFE_NO_PAD.encode(digest);
    text.truncate(DERIVED_PASSWORD_LEN);
    Ok(DerivedPassword(text))
}
