use crate::crypto::KEY_LEN;

use super::{GatewayError, Result};

pub const RECORD_MAGIC: [u8; 4] = *b"TWC1";
pub const RECORD_VERSION: u8 = 0x01;
const HEADER_LEN: usize = 4 + 1 + KEY_LEN + 2;

/// The `.key` file kept on a key provider.
///
/// ```text
/// "TWC1" | 0x01 | key share (32) | name len (u16 BE) | data object name
/// ```
#[derive(Clone, PartialEq, Eq)]
pub struct KeyFileRecord {
    pub key_share: [u8; KEY_LEN],
    /// Encrypted name of the ciphertext object on the data provider.
    pub data_name: String,
}

impl std::fmt::Debug for KeyFileRecord {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KeyFileRecord")
            .field("data_name", &self.data_name)
            .finish_non_exhaustive()
    }
}

impl Drop for KeyFileRecord {
    fn drop(&mut self) {
        zeroize::Zeroize::zeroize(&mut self.key_share);
    }
}

impl KeyFileRecord {
    pub fn encoded_len(&self) -> usize {
        HEADER_LEN + self.data_name.len()
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        let name = self.data_name.as_bytes();
        if !self.data_name.is_ascii() || name.len() > u16::MAX as usize {
            return Err(GatewayError::Format("data name must be short ASCII".into()));
        }
        let mut out = Vec::with_capacity(self.encoded_len());
        out.extend_from_slice(&RECORD_MAGIC);
        out.push(RECORD_VERSION);
        out.extend_from_slice(&self.key_share);
        out.extend_from_slice(&(name.len() as u16).to_be_bytes());
        out.extend_from_slice(name);
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(GatewayError::Format(format!(
                "key record is {} bytes, shorter than its header",
                bytes.len()
            )));
        }
        if bytes[..4] != RECORD_MAGIC {
            return Err(GatewayError::Format("key record has bad magic".into()));
        }
        if bytes[4] != RECORD_VERSION {
            return Err(GatewayError::Format(format!(
                "unsupported key record version {}",
                bytes[4]
            )));
        }
        let mut key_share = [0u8; KEY_LEN];
        key_share.copy_from_slice(&bytes[5..5 + KEY_LEN]);
        let name_len = u16::from_be_bytes([bytes[HEADER_LEN - 2], bytes[HEADER_LEN - 1]]) as usize;
        let name = &bytes[HEADER_LEN..];
        if name.len() != name_len {
            return Err(GatewayError::Format(format!(
                "key record names {name_len} bytes but carries {}",
                name.len()
            )));
        }
        if !name.is_ascii() {
            return Err(GatewayError::Format("data name is not ASCII".into()));
        }
        Ok(Self {
            key_share,
            data_name: String::from_utf8(name.to_vec()).expect("ascii"),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> KeyFileRecord {
        KeyFileRecord {
            key_share: [0xab; 32],
            data_name: "H2jHGozT0nzr7j-tn12-ZO155WwR1RHDKGKong8I64o".into(),
        }
    }

    #[test]
    fn layout_is_exact() {
        let bytes = sample().encode().unwrap();
        assert_eq!(bytes.len(), 39 + 43);
        assert_eq!(&bytes[..5], &[0x54, 0x57, 0x43, 0x31, 0x01]);
        assert_eq!(&bytes[5..37], &[0xab; 32]);
        assert_eq!(&bytes[37..39], &[0, 43]);
        assert_eq!(KeyFileRecord::decode(&bytes).unwrap(), sample());
    }

    #[test]
    fn rejects_corruption() {
        let good = sample().encode().unwrap();
        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(KeyFileRecord::decode(&bad).is_err());
        let mut bad = good.clone();
        bad[4] = 2;
        assert!(KeyFileRecord::decode(&bad).is_err());
        assert!(KeyFileRecord::decode(&good[..good.len() - 1]).is_err());
        assert!(KeyFileRecord::decode(&good[..20]).is_err());
        let mut bad = good;
        bad.push(b'x');
        assert!(KeyFileRecord::decode(&bad).is_err());
    }
}
