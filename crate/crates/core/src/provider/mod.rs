//! Cloud provider interface and the mock providers used in place of real
//! storage services.
//!
//! The gateway only talks to [`CloudProvider`]. [`MockProvider`] implements
//! it either fully in memory or mirrored to a directory tree, and adds the
//! admin hooks tests rely on: store snapshots, call counters, and fault
//! injection.

mod disk;
mod mock;
mod path;
mod store;
mod types;

pub use mock::{MockProvider, Op, AUTH_CODE_LIFETIME, MIN_PASSWORD_LEN};
pub use path::RemotePath;
pub use store::{ProviderStore, StoreKey, TrashItem};
pub use types::{AccessToken, Account, AuthCode, EntryKind, EntryMeta, Permission, ProviderConfig};

use thiserror::Error;

use crate::crypto::DerivedPassword;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProviderError {
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("access denied: {0}")]
    AccessDenied(String),
    #[error("already exists: {0}")]
    Conflict(String),
    #[error("password policy: {0}")]
    Policy(String),
    #[error("unsupported by provider: {0}")]
    Capability(String),
    #[error("invalid path: {0}")]
    InvalidPath(String),
    #[error("invalid request: {0}")]
    Invalid(String),
    #[error("invalid provider config: {0}")]
    InvalidConfig(String),
    #[error("provider unavailable: {0}")]
    Unavailable(String),
    #[error("storage error: {0}")]
    Io(String),
}

impl From<std::io::Error> for ProviderError {
    fn from(e: std::io::Error) -> Self {
        ProviderError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, ProviderError>;

/// Operations a storage provider must offer to take part in a placement.
///
/// Paths without a namespace refer to the caller's own account; a
/// namespace-qualified path reaches into another account and is checked
/// against that account's grants.
pub trait CloudProvider: Send + Sync {
    fn config(&self) -> &ProviderConfig;

    fn id(&self) -> &str {
        &self.config().id
    }

    fn create_account(&self, username: &str, password: &DerivedPassword) -> Result<Account>;
    /// Closes the token holder's account and erases everything it owns.
    fn delete_account(&self, token: &AccessToken) -> Result<()>;

    fn authenticate(&self, username: &str, password: &DerivedPassword) -> Result<AuthCode>;
    fn exchange_code(&self, code: &AuthCode) -> Result<AccessToken>;
    /// Username bound to `token`, or `Auth` if the token is not live.
    fn whoami(&self, token: &AccessToken) -> Result<String>;

    fn upload_object(
        &self,
        token: &AccessToken,
        path: &RemotePath,
        bytes: &[u8],
        overwrite: bool,
    ) -> Result<EntryMeta>;
    fn download_object(&self, token: &AccessToken, path: &RemotePath) -> Result<Vec<u8>>;
    /// Up to `len` bytes starting at `offset`; short or empty past the end.
    fn read_range(
        &self,
        token: &AccessToken,
        path: &RemotePath,
        offset: u64,
        len: u64,
    ) -> Result<Vec<u8>>;
    fn stat(&self, token: &AccessToken, path: &RemotePath) -> Result<EntryMeta>;
    fn create_folder(&self, token: &AccessToken, path: &RemotePath) -> Result<EntryMeta>;
    /// Removes the entry (recursively for folders) and purges it from trash.
    fn delete_path(&self, token: &AccessToken, path: &RemotePath) -> Result<()>;

    fn share_path(
        &self,
        token: &AccessToken,
        path: &RemotePath,
        grantee: &str,
        perm: Permission,
    ) -> Result<()>;
    fn unshare_path(&self, token: &AccessToken, path: &RemotePath, grantee: &str) -> Result<()>;
    /// Grants recorded directly on `path` (owner only).
    fn list_grants(
        &self,
        token: &AccessToken,
        path: &RemotePath,
    ) -> Result<Vec<(String, Permission)>>;
    fn list_entries(&self, token: &AccessToken) -> Result<Vec<EntryMeta>>;
}
