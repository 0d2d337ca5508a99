use super::keys::SymmetricKey;
use super::raw::{self, BLOCK_LEN, IV_LEN};
use super::{fill_random, CryptoError, Result};

/// Longest logical name the 2-byte length header can carry.
pub const MAX_HEADER_NAME_LEN: usize = u16::MAX as usize;

/// IV-prefixed AES-256-CBC ciphertext of `[name len][name][content]`.
#[derive(Clone, PartialEq, Eq)]
pub struct CipherBlob {
    iv: [u8; IV_LEN],
    ciphertext: Vec<u8>,
}

impl CipherBlob {
    pub fn iv(&self) -> &[u8; IV_LEN] {
        &self.iv
    }

    pub fn ciphertext(&self) -> &[u8] {
        &self.ciphertext
    }

    /// Serialized length for a given name and content length.
    pub fn serialized_len(name_len: usize, content_len: usize) -> usize {
        IV_LEN + raw::padded_len(2 + name_len + content_len)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(IV_LEN + self.ciphertext.len());
        out.extend_from_slice(&self.iv);
        out.extend_from_slice(&self.ciphertext);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < IV_LEN + BLOCK_LEN || !(bytes.len() - IV_LEN).is_multiple_of(BLOCK_LEN) {
            return Err(CryptoError::Format(format!(
                "blob length {} is not IV plus whole blocks",
                bytes.len()
            )));
        }
        let mut iv = [0u8; IV_LEN];
        iv.copy_from_slice(&bytes[..IV_LEN]);
        Ok(Self {
            iv,
            ciphertext: bytes[IV_LEN..].to_vec(),
        })
    }
}

impl std::fmt::Debug for CipherBlob {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CipherBlob")
            .field("ciphertext_len", &self.ciphertext.len())
            .finish()
    }
}

/// Encrypts `content` together with its logical name under a fresh IV.
pub fn encrypt_blob(key: &SymmetricKey, logical_name: &str, content: &[u8]) -> Result<CipherBlob> {
    let name = logical_name.as_bytes();
    if name.len() > MAX_HEADER_NAME_LEN {
        return Err(CryptoError::NameTooLong(name.len(), MAX_HEADER_NAME_LEN));
    }
    let mut plain = Vec::with_capacity(2 + name.len() + content.len());
    plain.extend_from_slice(&(name.len() as u16).to_be_bytes());
    plain.extend_from_slice(name);
    plain.extend_from_slice(content);

    let mut iv = [0u8; IV_LEN];
    fill_random(&mut iv)?;
    let ciphertext = raw::pkcs7_encrypt(key.as_bytes(), &iv, &plain);
    zeroize::Zeroize::zeroize(&mut plain);
    Ok(CipherBlob { iv, ciphertext })
}

/// Inverse of [`encrypt_blob`]: returns the embedded name and the content.
pub fn decrypt_blob(key: &SymmetricKey, blob: &CipherBlob) -> Result<(String, Vec<u8>)> {
    let mut plain = raw::pkcs7_decrypt(key.as_bytes(), &blob.iv, &blob.ciphertext)?;
    let result = parse_header(&plain).map(|(name, body)| (name, body.to_vec()));
    zeroize::Zeroize::zeroize(&mut plain);
    result
}

/// Parses `[len][name]` from the front of a decrypted payload.
pub(crate) fn parse_header(plain: &[u8]) -> Result<(String, &[u8])> {
    if plain.len() < 2 {
        return Err(CryptoError::Format("missing name header".into()));
    }
    let name_len = u16::from_be_bytes([plain[0], plain[1]]) as usize;
    let rest = &plain[2..];
    if name_len > rest.len() {
        return Err(CryptoError::Format(format!(
            "name length {name_len} exceeds payload"
        )));
    }
    let name = std::str::from_utf8(&rest[..name_len])
        .map_err(|_| CryptoError::Format("name is not UTF-8".into()))?;
    Ok((name.to_owned(), &rest[name_len..]))
}
