use super::keys::{SymmetricKey, KEY_LEN};
use super::{fill_random, CryptoError, Result};

/// One XOR share of a content key.
#[derive(Clone, PartialEq, Eq)]
pub struct KeyShare {
    pub index: usize,
    pub bytes: [u8; KEY_LEN],
}

impl std::fmt::Debug for KeyShare {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "KeyShare({}, ..)", self.index)
    }
}

impl Drop for KeyShare {
    fn drop(&mut self) {
        zeroize::Zeroize::zeroize(&mut self.bytes);
    }
}

/// Splits `key` into `n` shares that must all be present to rebuild it.
///
/// Shares `0..n-1` are random; the last is the key XORed with all of them.
pub fn split_key(key: &SymmetricKey, n: usize) -> Result<Vec<KeyShare>> {
    if n < 1 {
        return Err(CryptoError::Shares("need at least one share".into()));
    }
    let mut last = *key.as_bytes();
    let mut shares = Vec::with_capacity(n);
    for index in 0..n - 1 {
        let mut bytes = [0u8; KEY_LEN];
        fill_random(&mut bytes)?;
        xor_into(&mut last, &bytes);
        shares.push(KeyShare { index, bytes });
    }
    shares.push(KeyShare {
        index: n - 1,
        bytes: last,
    });
    Ok(shares)
}

pub fn combine_key(shares: &[KeyShare]) -> Result<SymmetricKey> {
    if shares.is_empty() {
        return Err(CryptoError::Shares("no shares".into()));
    }
    let mut seen = vec![false; shares.len()];
    let mut key = [0u8; KEY_LEN];
    for share in shares {
        match seen.get_mut(share.index) {
            None => {
                return Err(CryptoError::Shares(format!(
                    "index {} out of range for {} shares",
                    share.index,
                    shares.len()
                )))
            }
            Some(true) => {
                return Err(CryptoError::Shares(format!(
                    "duplicate index {}",
                    share.index
                )))
            }
            Some(slot) => *slot = true,
        }
        xor_into(&mut key, &share.bytes);
    }
    Ok(SymmetricKey::from_bytes(key))
}

fn xor_into(acc: &mut [u8; KEY_LEN], other: &[u8; KEY_LEN]) {
    acc.iter_mut().zip(other).for_each(|(a, b)| *a ^= b);
}
