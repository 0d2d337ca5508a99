use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::types::Permission;
use crate::crypto::DerivedPassword;

/// An entry location: the owning account plus path segments.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StoreKey {
    pub owner: String,
    pub segments: Vec<String>,
}

impl StoreKey {
    pub fn new(owner: impl Into<String>, segments: Vec<String>) -> Self {
        Self {
            owner: owner.into(),
            segments,
        }
    }

    pub fn is_within(&self, ancestor: &StoreKey) -> bool {
        self.owner == ancestor.owner && self.segments.starts_with(&ancestor.segments)
    }

    pub fn parent(&self) -> Option<StoreKey> {
        match self.segments.len() {
            0 | 1 => None,
            n => Some(StoreKey::new(
                self.owner.clone(),
                self.segments[..n - 1].to_vec(),
            )),
        }
    }

    pub fn path_string(&self) -> String {
        let mut s = String::new();
        for seg in &self.segments {
            s.push('/');
            s.push_str(seg);
        }
        s
    }
}

impl fmt::Display for StoreKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.owner, self.path_string())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TrashItem {
    Folder,
    File(Vec<u8>),
}

/// Complete logical state of one provider.
///
/// `dump_store` hands out deep copies of this for audits; mutating a copy
/// never touches the live provider.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ProviderStore {
    pub accounts: BTreeMap<String, DerivedPassword>,
    pub objects: BTreeMap<StoreKey, Vec<u8>>,
    pub folders: BTreeSet<StoreKey>,
    pub acl: BTreeMap<StoreKey, BTreeMap<String, Permission>>,
    pub trash: BTreeMap<StoreKey, TrashItem>,
}

impl ProviderStore {
    pub fn exists(&self, key: &StoreKey) -> bool {
        self.objects.contains_key(key) || self.folders.contains(key)
    }

    /// Strongest grant `grantee` holds on `key` or any ancestor folder.
    pub fn effective_grant(&self, key: &StoreKey, grantee: &str) -> Option<Permission> {
        (1..=key.segments.len())
            .filter_map(|n| {
                let prefix = StoreKey::new(key.owner.clone(), key.segments[..n].to_vec());
                self.acl.get(&prefix)?.get(grantee).copied()
            })
            .max()
    }

    pub fn live_keys_within(&self, root: &StoreKey) -> Vec<StoreKey> {
        self.objects
            .keys()
            .chain(self.folders.iter())
            .filter(|k| k.is_within(root))
            .cloned()
            .collect()
    }

    /// Every byte region the provider holds, labelled by origin: object and
    /// trash contents, plus all path, account, and ACL text.
    pub fn byte_regions(&self) -> Vec<(String, &[u8])> {
        let mut out: Vec<(String, &[u8])> = Vec::new();
        for (k, v) in &self.objects {
            out.push((format!("object {k}"), v));
        }
        for (k, item) in &self.trash {
            if let TrashItem::File(v) = item {
                out.push((format!("trash {k}"), v));
            }
        }
        for (name, pw) in &self.accounts {
            out.push((format!("account {name}"), name.as_bytes()));
            out.push((format!("account {name} password"), pw.as_str().as_bytes()));
        }
        out
    }

    /// Every path string held in live, trash, and ACL tables.
    pub fn path_strings(&self) -> Vec<String> {
        let mut out = BTreeSet::new();
        for k in self
            .objects
            .keys()
            .chain(self.folders.iter())
            .chain(self.trash.keys())
            .chain(self.acl.keys())
        {
            out.insert(k.to_string());
        }
        out.into_iter().collect()
    }

    /// True if `needle` occurs in any held byte region or path string.
    pub fn contains_bytes(&self, needle: &[u8]) -> bool {
        if needle.is_empty() {
            return true;
        }
        let finder = memchr::memmem::Finder::new(needle);
        self.byte_regions()
            .iter()
            .any(|(_, bytes)| finder.find(bytes).is_some())
            || self
                .path_strings()
                .iter()
                .any(|p| finder.find(p.as_bytes()).is_some())
    }

    pub fn total_object_bytes(&self) -> usize {
        self.objects.values().map(Vec::len).sum()
    }
}
