use std::fmt;

use zeroize::{Zeroize, ZeroizeOnDrop};

use super::{fill_random, CryptoError, Result};

pub const KEY_LEN: usize = 32;

macro_rules! secret_bytes {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Clone, PartialEq, Eq, Zeroize, ZeroizeOnDrop)]
        pub struct $name([u8; KEY_LEN]);

        impl $name {
            pub fn from_bytes(bytes: [u8; KEY_LEN]) -> Self {
                Self(bytes)
            }

            pub fn from_slice(bytes: &[u8]) -> Result<Self> {
                let arr: [u8; KEY_LEN] = bytes.try_into().map_err(|_| CryptoError::Length {
                    expected: KEY_LEN,
                    actual: bytes.len(),
                })?;
                Ok(Self(arr))
            }

            pub fn as_bytes(&self) -> &[u8; KEY_LEN] {
                &self.0
            }
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(concat!(stringify!($name), "(..)"))
            }
        }
    };
}

secret_bytes!(
    /// 256-bit content-encryption key for a single file.
    SymmetricKey
);
secret_bytes!(
    /// Key for the HMAC-SHA-256 integrity tag of a file.
    MacKey
);

impl MacKey {
    pub fn generate() -> Result<Self> {
        let mut bytes = [0u8; KEY_LEN];
        fill_random(&mut bytes)?;
        Ok(Self(bytes))
    }
}

/// Fresh random content key.
pub fn generate_key() -> Result<SymmetricKey> {
    let mut bytes = [0u8; KEY_LEN];
    fill_random(&mut bytes)?;
    Ok(SymmetricKey(bytes))
}

/// Key material for deterministic filename encryption on one provider.
///
/// Serialized as 64 raw bytes: the AES part followed by the HMAC part.
#[derive(Clone, PartialEq, Eq, Zeroize, ZeroizeOnDrop)]
pub struct NameKeyPair {
    enc_part: [u8; KEY_LEN],
    mac_part: [u8; KEY_LEN],
}

impl NameKeyPair {
    pub const SERIALIZED_LEN: usize = 2 * KEY_LEN;

    pub fn new(enc_part: [u8; KEY_LEN], mac_part: [u8; KEY_LEN]) -> Self {
        Self { enc_part, mac_part }
    }

    pub fn generate() -> Result<Self> {
        let mut pair = Self::new([0; KEY_LEN], [0; KEY_LEN]);
        fill_random(&mut pair.enc_part)?;
        fill_random(&mut pair.mac_part)?;
        Ok(pair)
    }

    pub fn enc_part(&self) -> &[u8; KEY_LEN] {
        &self.enc_part
    }

    pub fn mac_part(&self) -> &[u8; KEY_LEN] {
        &self.mac_part
    }

    pub fn to_bytes(&self) -> [u8; Self::SERIALIZED_LEN] {
        let mut out = [0u8; Self::SERIALIZED_LEN];
        out[..KEY_LEN].copy_from_slice(&self.enc_part);
        out[KEY_LEN..].copy_from_slice(&self.mac_part);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() != Self::SERIALIZED_LEN {
            return Err(CryptoError::Length {
                expected: Self::SERIALIZED_LEN,
                actual: bytes.len(),
            });
        }
        let mut pair = Self::new([0; KEY_LEN], [0; KEY_LEN]);
        pair.enc_part.copy_from_slice(&bytes[..KEY_LEN]);
        pair.mac_part.copy_from_slice(&bytes[KEY_LEN..]);
        Ok(pair)
    }
}

impl fmt::Debug for NameKeyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("NameKeyPair(..)")
    }
}
