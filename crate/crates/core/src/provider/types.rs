use std::fmt;
use std::path::PathBuf;
use std::time::Instant;

use super::path::RemotePath;
use super::{ProviderError, Result};
use crate::crypto::DerivedPassword;

/// Static description of one provider instance.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProviderConfig {
    pub id: String,
    pub url: String,
    pub supports_file_sharing: bool,
    /// `None` keeps everything in memory.
    pub persistence_root: Option<PathBuf>,
}

impl ProviderConfig {
    pub fn new(id: impl Into<String>, url: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            url: url.into(),
            supports_file_sharing: true,
            persistence_root: None,
        }
    }

    pub fn file_sharing(mut self, enabled: bool) -> Self {
        self.supports_file_sharing = enabled;
        self
    }

    pub fn persist_at(mut self, root: impl Into<PathBuf>) -> Self {
        self.persistence_root = Some(root.into());
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.id.trim().is_empty() {
            return Err(ProviderError::InvalidConfig("provider id is empty".into()));
        }
        if self.url.trim().is_empty() {
            return Err(ProviderError::InvalidConfig(format!(
                "provider {} has an empty url",
                self.id
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Account {
    pub username: String,
    pub password: DerivedPassword,
}

/// Single-use authorization code returned by `authenticate`.
#[derive(Clone, PartialEq, Eq)]
pub struct AuthCode {
    pub opaque: String,
    pub username: String,
    pub expiry: Instant,
}

impl fmt::Debug for AuthCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AuthCode")
            .field("username", &self.username)
            .finish_non_exhaustive()
    }
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct AccessToken {
    pub opaque: String,
    pub username: String,
}

impl fmt::Debug for AccessToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AccessToken")
            .field("username", &self.username)
            .finish_non_exhaustive()
    }
}

/// Access level of a grant. `Edit` implies `Read`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Permission {
    Read,
    Edit,
}

impl Permission {
    pub fn allows(self, required: Permission) -> bool {
        self >= required
    }

    pub fn code(self) -> &'static str {
        match self {
            Permission::Read => "R",
            Permission::Edit => "E",
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        match code {
            "R" => Some(Permission::Read),
            "E" => Some(Permission::Edit),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EntryKind {
    File,
    Folder,
}

/// One row of a provider listing.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EntryMeta {
    /// Namespace-qualified for entries reached through a grant.
    pub path: RemotePath,
    pub kind: EntryKind,
    pub owner: String,
    pub size: u64,
    pub shared_from: Option<String>,
}
