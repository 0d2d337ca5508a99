use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Mutex, MutexGuard};
use std::time::{Duration, Instant};

use base64::engine::general_purpose::URL_SAFE_NO_PAD;
use base64::Engine;
use subtle::ConstantTimeEq;

use super::disk::{DiskStore, TokenTable};
use super::path::{check_segment, RemotePath};
use super::store::{ProviderStore, StoreKey, TrashItem};
use super::types::{
    AccessToken, Account, AuthCode, EntryKind, EntryMeta, Permission, ProviderConfig,
};
use super::{CloudProvider, ProviderError, Result};
use crate::crypto::DerivedPassword;

pub const MIN_PASSWORD_LEN: usize = 8;
pub const AUTH_CODE_LIFETIME: Duration = Duration::from_secs(60);

/// Provider calls, for counters and targeted fault injection.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Op {
    CreateAccount,
    DeleteAccount,
    Authenticate,
    ExchangeCode,
    WhoAmI,
    Upload,
    Download,
    ReadRange,
    Stat,
    CreateFolder,
    Delete,
    Share,
    Unshare,
    ListGrants,
    List,
}

impl Op {
    pub const ALL: [Op; 15] = [
        Op::CreateAccount,
        Op::DeleteAccount,
        Op::Authenticate,
        Op::ExchangeCode,
        Op::WhoAmI,
        Op::Upload,
        Op::Download,
        Op::ReadRange,
        Op::Stat,
        Op::CreateFolder,
        Op::Delete,
        Op::Share,
        Op::Unshare,
        Op::ListGrants,
        Op::List,
    ];

    fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug)]
struct Fault {
    /// Matching calls still to let through before failing.
    remaining: usize,
    only: Option<Op>,
}

struct Inner {
    store: ProviderStore,
    codes: HashMap<String, (String, Instant)>,
    tokens: TokenTable,
    clock_skew: Duration,
}

impl Inner {
    fn now(&self) -> Instant {
        Instant::now() + self.clock_skew
    }

    fn caller(&self, token: &AccessToken) -> Result<String> {
        match self.tokens.get(&token.opaque) {
            Some(user) if *user == token.username && self.store.accounts.contains_key(user) => {
                Ok(user.clone())
            }
            _ => Err(ProviderError::Auth("invalid access token".into())),
        }
    }

    fn require(&self, caller: &str, key: &StoreKey, need: Permission) -> Result<()> {
        if key.owner == caller {
            return Ok(());
        }
        match self.store.effective_grant(key, caller) {
            Some(p) if p.allows(need) => Ok(()),
            _ => Err(ProviderError::AccessDenied(format!(
                "{caller} may not access {key}"
            ))),
        }
    }

    fn require_owner(&self, caller: &str, key: &StoreKey) -> Result<()> {
        if key.owner == caller {
            Ok(())
        } else {
            Err(ProviderError::AccessDenied(format!(
                "{caller} does not own {key}"
            )))
        }
    }

    fn require_parent(&self, key: &StoreKey) -> Result<()> {
        match key.parent() {
            Some(parent) if !self.store.folders.contains(&parent) => {
                Err(ProviderError::NotFound(format!("parent folder {parent}")))
            }
            _ => Ok(()),
        }
    }

    fn meta(&self, caller: &str, key: &StoreKey) -> Option<EntryMeta> {
        let (kind, size) = if let Some(bytes) = self.store.objects.get(key) {
            (EntryKind::File, bytes.len() as u64)
        } else if self.store.folders.contains(key) {
            (EntryKind::Folder, 0)
        } else {
            return None;
        };
        let path = RemotePath::from_segments(key.segments.clone()).expect("stored paths are valid");
        let (path, shared_from) = if key.owner == caller {
            (path, None)
        } else {
            (
                path.in_namespace(key.owner.clone()),
                Some(key.owner.clone()),
            )
        };
        Some(EntryMeta {
            path,
            kind,
            owner: key.owner.clone(),
            size,
            shared_from,
        })
    }
}

/// In-memory or directory-backed stand-in for a cloud storage provider.
///
/// Every operation runs under one lock, so each call is atomic with respect
/// to the store. When a persistence root is configured, every mutation is
/// written to disk before it is committed in memory.
pub struct MockProvider {
    config: ProviderConfig,
    inner: Mutex<Inner>,
    disk: Option<DiskStore>,
    calls: [AtomicU64; Op::ALL.len()],
    fault: Mutex<Option<Fault>>,
}

fn random_opaque() -> String {
    let mut bytes = [0u8; 24];
    crate::crypto::fill_random(&mut bytes).expect("os randomness");
    URL_SAFE_NO_PAD.encode(bytes)
}

fn key_for(caller: &str, path: &RemotePath) -> StoreKey {
    StoreKey::new(
        path.namespace().unwrap_or(caller).to_owned(),
        path.segments().to_vec(),
    )
}

impl MockProvider {
    /// Opens the provider described by `config`, loading persisted state
    /// when a persistence root is set.
    pub fn open(config: ProviderConfig) -> Result<Self> {
        config.validate()?;
        let (disk, store, tokens) = match &config.persistence_root {
            Some(root) => {
                let (disk, store, tokens) = DiskStore::open(root)?;
                (Some(disk), store, tokens)
            }
            None => (None, ProviderStore::default(), TokenTable::new()),
        };
        Ok(Self {
            config,
            inner: Mutex::new(Inner {
                store,
                codes: HashMap::new(),
                tokens,
                clock_skew: Duration::ZERO,
            }),
            disk,
            calls: Default::default(),
            fault: Mutex::new(None),
        })
    }

    pub fn in_memory(id: &str, url: &str, supports_file_sharing: bool) -> Self {
        Self::open(ProviderConfig::new(id, url).file_sharing(supports_file_sharing))
            .expect("in-memory config is valid")
    }

    fn lock(&self) -> MutexGuard<'_, Inner> {
        self.inner.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn enter(&self, op: Op) -> Result<MutexGuard<'_, Inner>> {
        self.calls[op.index()].fetch_add(1, Ordering::Relaxed);
        {
            let mut fault = self.fault.lock().unwrap_or_else(|e| e.into_inner());
            if let Some(f) = fault.as_mut() {
                if f.only.is_none_or(|o| o == op) {
                    if f.remaining == 0 {
                        *fault = None;
                        return Err(ProviderError::Unavailable(format!(
                            "injected failure in {op:?} on {}",
                            self.config.id
                        )));
                    }
                    f.remaining -= 1;
                }
            }
        }
        Ok(self.lock())
    }

    fn persist(&self, f: impl FnOnce(&DiskStore) -> std::io::Result<()>) -> Result<()> {
        match &self.disk {
            Some(disk) => f(disk).map_err(Into::into),
            None => Ok(()),
        }
    }

    // ---- admin hooks (not part of the provider interface) ----

    /// Deep copy of everything the provider holds, including trash and ACLs.
    pub fn dump_store(&self) -> ProviderStore {
        self.lock().store.clone()
    }

    pub fn call_count(&self, op: Op) -> u64 {
        self.calls[op.index()].load(Ordering::Relaxed)
    }

    pub fn call_counts(&self) -> BTreeMap<Op, u64> {
        Op::ALL
            .iter()
            .map(|&op| (op, self.call_count(op)))
            .collect()
    }

    pub fn total_calls(&self) -> u64 {
        Op::ALL.iter().map(|&op| self.call_count(op)).sum()
    }

    pub fn reset_counters(&self) {
        for c in &self.calls {
            c.store(0, Ordering::Relaxed);
        }
    }

    /// Lets `n` further calls through, then fails the next one with
    /// `Unavailable`. The fault fires once.
    pub fn fail_after(&self, n: usize) {
        *self.fault.lock().unwrap_or_else(|e| e.into_inner()) = Some(Fault {
            remaining: n,
            only: None,
        });
    }

    /// Like [`fail_after`](Self::fail_after) but counting only calls of `op`.
    pub fn fail_after_op(&self, op: Op, n: usize) {
        *self.fault.lock().unwrap_or_else(|e| e.into_inner()) = Some(Fault {
            remaining: n,
            only: Some(op),
        });
    }

    pub fn clear_fault(&self) {
        *self.fault.lock().unwrap_or_else(|e| e.into_inner()) = None;
    }

    pub fn fault_pending(&self) -> bool {
        self.fault
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .is_some()
    }

    /// Invalidates every issued access token and pending code.
    pub fn revoke_all_tokens(&self) -> Result<()> {
        let mut inner = self.lock();
        self.persist(|d| d.write_tokens(&TokenTable::new()))?;
        inner.tokens.clear();
        inner.codes.clear();
        Ok(())
    }

    /// Moves the provider's notion of "now" forward (for code expiry).
    pub fn advance_clock(&self, by: Duration) {
        self.lock().clock_skew += by;
    }

    /// Rewrites a stored object in place, bypassing access control.
    pub fn patch_object(&self, key: &StoreKey, patch: impl FnOnce(&mut Vec<u8>)) -> Result<()> {
        let mut inner = self.lock();
        let mut bytes = inner
            .store
            .objects
            .get(key)
            .cloned()
            .ok_or_else(|| ProviderError::NotFound(key.to_string()))?;
        patch(&mut bytes);
        self.persist(|d| d.put_object(key, &bytes))?;
        inner.store.objects.insert(key.clone(), bytes);
        Ok(())
    }

    /// Moves an entry to trash the way a user deleting it through the
    /// provider's own interface would. Grants on the entry are dropped.
    pub fn trash_path(&self, token: &AccessToken, path: &RemotePath) -> Result<()> {
        let mut inner = self.lock();
        let caller = inner.caller(token)?;
        let key = key_for(&caller, path);
        inner.require_owner(&caller, &key)?;
        if !inner.store.exists(&key) {
            return Err(ProviderError::NotFound(key.to_string()));
        }
        let mut acl = inner.store.acl.clone();
        acl.retain(|k, _| !k.is_within(&key));
        self.persist(|d| {
            d.move_to_trash(&key)?;
            d.write_acl(&acl)
        })?;

        let store = &mut inner.store;
        store.acl = acl;
        store.trash.retain(|k, _| !k.is_within(&key));
        let mut ancestor = key.parent();
        while let Some(a) = ancestor {
            store.trash.entry(a.clone()).or_insert(TrashItem::Folder);
            ancestor = a.parent();
        }
        for k in store.live_keys_within(&key) {
            let item = match store.objects.remove(&k) {
                Some(bytes) => TrashItem::File(bytes),
                None => {
                    store.folders.remove(&k);
                    TrashItem::Folder
                }
            };
            store.trash.insert(k, item);
        }
        Ok(())
    }
}

impl CloudProvider for MockProvider {
    fn config(&self) -> &ProviderConfig {
        &self.config
    }

    fn create_account(&self, username: &str, password: &DerivedPassword) -> Result<Account> {
        let mut inner = self.enter(Op::CreateAccount)?;
        check_segment(username)
            .map_err(|_| ProviderError::Invalid(format!("unusable username {username:?}")))?;
        if password.as_str().chars().count() < MIN_PASSWORD_LEN {
            return Err(ProviderError::Policy(format!(
                "password must be at least {MIN_PASSWORD_LEN} characters"
            )));
        }
        if password.as_str().chars().any(|c| c.is_control()) {
            return Err(ProviderError::Policy(
                "password contains control characters".into(),
            ));
        }
        if inner.store.accounts.contains_key(username) {
            return Err(ProviderError::Conflict(format!("username {username}")));
        }
        let mut accounts = inner.store.accounts.clone();
        accounts.insert(username.to_owned(), password.clone());
        self.persist(|d| {
            d.make_owner(username)?;
            d.write_accounts(&accounts)
        })?;
        inner.store.accounts = accounts;
        Ok(Account {
            username: username.to_owned(),
            password: password.clone(),
        })
    }

    fn delete_account(&self, token: &AccessToken) -> Result<()> {
        let mut inner = self.enter(Op::DeleteAccount)?;
        let user = inner.caller(token)?;
        let mut accounts = inner.store.accounts.clone();
        accounts.remove(&user);
        let mut acl = inner.store.acl.clone();
        acl.retain(|k, _| k.owner != user);
        for grants in acl.values_mut() {
            grants.remove(&user);
        }
        acl.retain(|_, g| !g.is_empty());
        let mut tokens = inner.tokens.clone();
        tokens.retain(|_, u| *u != user);
        self.persist(|d| {
            d.write_acl(&acl)?;
            d.write_tokens(&tokens)?;
            d.write_accounts(&accounts)?;
            d.remove_owner(&user)
        })?;
        let store = &mut inner.store;
        store.accounts = accounts;
        store.acl = acl;
        store.objects.retain(|k, _| k.owner != user);
        store.folders.retain(|k| k.owner != user);
        store.trash.retain(|k, _| k.owner != user);
        inner.tokens = tokens;
        inner.codes.retain(|_, (u, _)| *u != user);
        Ok(())
    }

    fn authenticate(&self, username: &str, password: &DerivedPassword) -> Result<AuthCode> {
        let mut inner = self.enter(Op::Authenticate)?;
        let ok = inner.store.accounts.get(username).is_some_and(|stored| {
            bool::from(
                stored
                    .as_str()
                    .as_bytes()
                    .ct_eq(password.as_str().as_bytes()),
            )
        });
        if !ok {
            return Err(ProviderError::Auth("unknown user or wrong password".into()));
        }
        let opaque = random_opaque();
        let expiry = inner.now() + AUTH_CODE_LIFETIME;
        inner
            .codes
            .insert(opaque.clone(), (username.to_owned(), expiry));
        Ok(AuthCode {
            opaque,
            username: username.to_owned(),
            expiry,
        })
    }

    fn exchange_code(&self, code: &AuthCode) -> Result<AccessToken> {
        let mut inner = self.enter(Op::ExchangeCode)?;
        let Some((user, expiry)) = inner.codes.remove(&code.opaque) else {
            return Err(ProviderError::Auth(
                "unknown or used authorization code".into(),
            ));
        };
        if user != code.username {
            return Err(ProviderError::Auth(
                "authorization code bound to another user".into(),
            ));
        }
        if inner.now() > expiry {
            return Err(ProviderError::Auth("authorization code expired".into()));
        }
        let opaque = random_opaque();
        let mut tokens = inner.tokens.clone();
        tokens.insert(opaque.clone(), user.clone());
        self.persist(|d| d.write_tokens(&tokens))?;
        inner.tokens = tokens;
        Ok(AccessToken {
            opaque,
            username: user,
        })
    }

    fn whoami(&self, token: &AccessToken) -> Result<String> {
        self.enter(Op::WhoAmI)?.caller(token)
    }

    fn upload_object(
        &self,
        token: &AccessToken,
        path: &RemotePath,
        bytes: &[u8],
        overwrite: bool,
    ) -> Result<EntryMeta> {
        let mut inner = self.enter(Op::Upload)?;
        let caller = inner.caller(token)?;
        let key = key_for(&caller, path);
        inner.require(&caller, &key, Permission::Edit)?;
        inner.require_parent(&key)?;
        if inner.store.folders.contains(&key) {
            return Err(ProviderError::Conflict(format!("{key} is a folder")));
        }
        if !overwrite && inner.store.objects.contains_key(&key) {
            return Err(ProviderError::Conflict(key.to_string()));
        }
        self.persist(|d| d.put_object(&key, bytes))?;
        inner.store.objects.insert(key.clone(), bytes.to_vec());
        Ok(inner.meta(&caller, &key).expect("just stored"))
    }

    fn download_object(&self, token: &AccessToken, path: &RemotePath) -> Result<Vec<u8>> {
        let inner = self.enter(Op::Download)?;
        let caller = inner.caller(token)?;
        let key = key_for(&caller, path);
        inner.require(&caller, &key, Permission::Read)?;
        match inner.store.objects.get(&key) {
            Some(bytes) => Ok(bytes.clone()),
            None if inner.store.folders.contains(&key) => {
                Err(ProviderError::InvalidPath(format!("{key} is a folder")))
            }
            None => Err(ProviderError::NotFound(key.to_string())),
        }
    }

    fn read_range(
        &self,
        token: &AccessToken,
        path: &RemotePath,
        offset: u64,
        len: u64,
    ) -> Result<Vec<u8>> {
        let inner = self.enter(Op::ReadRange)?;
        let caller = inner.caller(token)?;
        let key = key_for(&caller, path);
        inner.require(&caller, &key, Permission::Read)?;
        let bytes = inner
            .store
            .objects
            .get(&key)
            .ok_or_else(|| ProviderError::NotFound(key.to_string()))?;
        let start = usize::try_from(offset)
            .unwrap_or(usize::MAX)
            .min(bytes.len());
        let end = start
            .saturating_add(usize::try_from(len).unwrap_or(usize::MAX))
            .min(bytes.len());
        Ok(bytes[start..end].to_vec())
    }

    fn stat(&self, token: &AccessToken, path: &RemotePath) -> Result<EntryMeta> {
        let inner = self.enter(Op::Stat)?;
        let caller = inner.caller(token)?;
        let key = key_for(&caller, path);
        inner.require(&caller, &key, Permission::Read)?;
        inner
            .meta(&caller, &key)
            .ok_or_else(|| ProviderError::NotFound(key.to_string()))
    }

    fn create_folder(&self, token: &AccessToken, path: &RemotePath) -> Result<EntryMeta> {
        let mut inner = self.enter(Op::CreateFolder)?;
        let caller = inner.caller(token)?;
        let key = key_for(&caller, path);
        inner.require(&caller, &key, Permission::Edit)?;
        inner.require_parent(&key)?;
        if inner.store.exists(&key) {
            return Err(ProviderError::Conflict(key.to_string()));
        }
        self.persist(|d| d.make_folder(&key))?;
        inner.store.folders.insert(key.clone());
        Ok(inner.meta(&caller, &key).expect("just created"))
    }

    fn delete_path(&self, token: &AccessToken, path: &RemotePath) -> Result<()> {
        let mut inner = self.enter(Op::Delete)?;
        let caller = inner.caller(token)?;
        let key = key_for(&caller, path);
        inner.require_owner(&caller, &key)?;
        if !inner.store.exists(&key) {
            return Err(ProviderError::NotFound(key.to_string()));
        }
        // move-to-trash followed by purge, done as one step under the lock
        let mut acl = inner.store.acl.clone();
        acl.retain(|k, _| !k.is_within(&key));
        self.persist(|d| {
            d.write_acl(&acl)?;
            d.purge(&key)
        })?;
        let store = &mut inner.store;
        store.acl = acl;
        store.objects.retain(|k, _| !k.is_within(&key));
        store.folders.retain(|k| !k.is_within(&key));
        store.trash.retain(|k, _| !k.is_within(&key));
        Ok(())
    }

    fn share_path(
        &self,
        token: &AccessToken,
        path: &RemotePath,
        grantee: &str,
        perm: Permission,
    ) -> Result<()> {
        let mut inner = self.enter(Op::Share)?;
        let caller = inner.caller(token)?;
        let key = key_for(&caller, path);
        inner.require_owner(&caller, &key)?;
        let is_file = inner.store.objects.contains_key(&key);
        if !is_file && !inner.store.folders.contains(&key) {
            return Err(ProviderError::NotFound(key.to_string()));
        }
        if !inner.store.accounts.contains_key(grantee) {
            return Err(ProviderError::NotFound(format!("user {grantee}")));
        }
        if grantee == caller {
            return Err(ProviderError::Invalid("cannot share with yourself".into()));
        }
        if is_file && !self.config.supports_file_sharing {
            return Err(ProviderError::Capability(format!(
                "{} shares folders only",
                self.config.id
            )));
        }
        let mut acl = inner.store.acl.clone();
        acl.entry(key).or_default().insert(grantee.to_owned(), perm);
        self.persist(|d| d.write_acl(&acl))?;
        inner.store.acl = acl;
        Ok(())
    }

    fn unshare_path(&self, token: &AccessToken, path: &RemotePath, grantee: &str) -> Result<()> {
        let mut inner = self.enter(Op::Unshare)?;
        let caller = inner.caller(token)?;
        let key = key_for(&caller, path);
        inner.require_owner(&caller, &key)?;
        let mut acl = inner.store.acl.clone();
        let removed = acl
            .get_mut(&key)
            .and_then(|grants| grants.remove(grantee))
            .is_some();
        if !removed {
            return Err(ProviderError::NotFound(format!(
                "grant on {key} to {grantee}"
            )));
        }
        acl.retain(|_, g| !g.is_empty());
        self.persist(|d| d.write_acl(&acl))?;
        inner.store.acl = acl;
        Ok(())
    }

    fn list_grants(
        &self,
        token: &AccessToken,
        path: &RemotePath,
    ) -> Result<Vec<(String, Permission)>> {
        let inner = self.enter(Op::ListGrants)?;
        let caller = inner.caller(token)?;
        let key = key_for(&caller, path);
        inner.require_owner(&caller, &key)?;
        if !inner.store.exists(&key) {
            return Err(ProviderError::NotFound(key.to_string()));
        }
        Ok(inner
            .store
            .acl
            .get(&key)
            .map(|g| g.iter().map(|(u, p)| (u.clone(), *p)).collect())
            .unwrap_or_default())
    }

    fn list_entries(&self, token: &AccessToken) -> Result<Vec<EntryMeta>> {
        let inner = self.enter(Op::List)?;
        let caller = inner.caller(token)?;
        let store = &inner.store;

        let mut owned: Vec<&StoreKey> = store
            .objects
            .keys()
            .chain(store.folders.iter())
            .filter(|k| k.owner == caller)
            .collect();
        owned.sort_by_key(|k| k.path_string());

        let mut shared: BTreeSet<(String, String, StoreKey)> = BTreeSet::new();
        for (root, grants) in &store.acl {
            if root.owner == caller || !grants.contains_key(&caller) {
                continue;
            }
            for k in store.live_keys_within(root) {
                shared.insert((k.path_string(), k.owner.clone(), k));
            }
        }

        Ok(owned
            .into_iter()
            .chain(shared.iter().map(|(_, _, k)| k))
            .filter_map(|k| inner.meta(&caller, k))
            .collect())
    }
}
