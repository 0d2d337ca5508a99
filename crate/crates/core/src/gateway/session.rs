use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::thread;

use super::layout;
use super::placement::PlacementPolicy;
use super::record::KeyFileRecord;
use super::staging::Staging;
use super::undo::{Undo, UndoLog};
use super::{GatewayError, Remote, Result};
use crate::crypto::raw::{self, BLOCK_LEN, IV_LEN};
use crate::crypto::{
    combine_key, compute_mac, decrypt_blob, decrypt_name, encrypt_blob, encrypt_name, generate_key,
    split_key, verify_mac, CipherBlob, KeyShare, MacKey, MacTag, NameKeyPair, SymmetricKey,
    MAX_NAME_LEN,
};
use crate::provider::{AccessToken, EntryKind, EntryMeta, Permission, ProviderError, RemotePath};

/// A file as the user sees it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LogicalEntry {
    pub logical_name: String,
    /// Plaintext content length in bytes.
    pub size: u64,
    pub owned: bool,
    pub shared_from: Option<String>,
    /// Set when the remote artifacts could not be read; `logical_name` is
    /// then a placeholder.
    pub problem: Option<String>,
}

/// Outcome of [`Session::sync_all`].
#[derive(Debug, Default)]
pub struct SyncReport {
    pub written: Vec<String>,
    pub failed: Vec<(String, GatewayError)>,
}

impl SyncReport {
    pub fn count(&self) -> usize {
        self.written.len()
    }
}

/// Where the artifacts of one logical file live.
#[derive(Clone, Debug)]
struct Locator {
    /// `None` for the session user's own files.
    owner: Option<String>,
    key_files: Vec<RemotePath>,
    mac_tag: RemotePath,
    data: RemotePath,
    mac_key: RemotePath,
    data_name: String,
}

/// A logged-in user with a token on every provider of the placement.
pub struct Session {
    username: String,
    providers: Vec<Remote>,
    placement: PlacementPolicy,
    tokens: Vec<AccessToken>,
    name_keys: Vec<NameKeyPair>,
    staging: Staging,
    /// Shared files seen during this session, so that a revoked grant is
    /// reported as such rather than as a missing file.
    seen_shared: Mutex<BTreeMap<String, Locator>>,
}

impl std::fmt::Debug for Session {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Session")
            .field("username", &self.username)
            .field("placement", &self.placement)
            .field("staging", &self.staging.dir())
            .finish_non_exhaustive()
    }
}

/// One provider's share of a multi-provider operation.
type Leg<'a> = Box<dyn FnOnce(&mut UndoLog) -> Result<()> + Send + 'a>;

fn join<T>(handle: thread::ScopedJoinHandle<'_, T>) -> T {
    handle
        .join()
        .unwrap_or_else(|panic| std::panic::resume_unwind(panic))
}

fn check_logical_name(name: &str) -> Result<()> {
    if name.is_empty() || name.len() > MAX_NAME_LEN {
        return Err(GatewayError::Invalid(format!(
            "file names must be 1..={MAX_NAME_LEN} bytes"
        )));
    }
    if name == "."
        || name == ".."
        || name
            .chars()
            .any(|c| c == '/' || c == '\\' || c.is_control())
    {
        return Err(GatewayError::Invalid(format!(
            "unusable file name {name:?}"
        )));
    }
    Ok(())
}

fn placeholder(token: &str) -> String {
    let short: String = token.chars().take(12).collect();
    format!("<unreadable {short}>")
}

impl Session {
    pub(super) fn new(
        username: String,
        providers: Vec<Remote>,
        placement: PlacementPolicy,
        tokens: Vec<AccessToken>,
        name_keys: Vec<NameKeyPair>,
        staging: Staging,
    ) -> Self {
        Self {
            username,
            providers,
            placement,
            tokens,
            name_keys,
            staging,
            seen_shared: Mutex::default(),
        }
    }

    pub fn username(&self) -> &str {
        &self.username
    }

    pub fn placement(&self) -> &PlacementPolicy {
        &self.placement
    }

    pub fn staging_dir(&self) -> &Path {
        self.staging.dir()
    }

    pub fn staging_is_empty(&self) -> Result<bool> {
        Ok(self.staging.is_empty()?)
    }

    /// Access token held for each provider, in placement order.
    pub fn tokens(&self) -> impl Iterator<Item = (&str, &AccessToken)> {
        self.providers
            .iter()
            .map(|p| p.id())
            .zip(self.tokens.iter())
    }

    fn key_count(&self) -> usize {
        self.placement.key_count()
    }

    fn data_index(&self) -> usize {
        self.placement.key_count()
    }

    /// Runs one provider call with the session's token, tagging errors.
    fn call<T>(
        &self,
        i: usize,
        f: impl FnOnce(
            &dyn crate::provider::CloudProvider,
            &AccessToken,
        ) -> std::result::Result<T, ProviderError>,
    ) -> Result<T> {
        let p = &self.providers[i];
        f(p.as_ref(), &self.tokens[i]).map_err(|e| GatewayError::from_provider(p.id(), e))
    }

    fn locate_owned(&self, name: &str) -> Result<Locator> {
        check_logical_name(name)?;
        let key_tokens = (0..self.key_count())
            .map(|i| encrypt_name(&self.name_keys[i], name))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let data_name = encrypt_name(&self.name_keys[self.data_index()], name)?;
        Ok(Locator {
            owner: None,
            key_files: key_tokens
                .iter()
                .map(|t| layout::key_file(t))
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| GatewayError::from_provider("layout", e))?,
            mac_tag: layout::mac_tag(&key_tokens[0])
                .map_err(|e| GatewayError::from_provider("layout", e))?,
            data: layout::data_object(&data_name)
                .map_err(|e| GatewayError::from_provider("layout", e))?,
            mac_key: layout::mac_key(&data_name)
                .map_err(|e| GatewayError::from_provider("layout", e))?,
            data_name,
        })
    }

    fn owned_exists(&self, loc: &Locator) -> Result<bool> {
        match self.call(self.data_index(), |p, t| p.stat(t, &loc.data)) {
            Ok(_) => Ok(true),
            Err(GatewayError::NotFound(_)) => Ok(false),
            Err(e) => Err(e),
        }
    }

    /// Own file by that name, or the reason it cannot be modified.
    fn require_owned(&self, name: &str) -> Result<Locator> {
        let loc = self.locate_owned(name)?;
        if self.owned_exists(&loc)? {
            return Ok(loc);
        }
        if self
            .shared_entries()?
            .iter()
            .any(|(e, _)| e.logical_name == name)
        {
            return Err(GatewayError::AccessDenied(format!(
                "{name} is shared with you and owned by someone else"
            )));
        }
        Err(GatewayError::NotFound(name.to_owned()))
    }

    /// Runs independent legs concurrently. If any fails, every step any
    /// leg completed is undone and the first error is returned.
    fn run_legs<'a>(&'a self, legs: Vec<Leg<'a>>) -> Result<()> {
        let mut outcomes: Vec<(Result<()>, UndoLog)> = thread::scope(|s| {
            let handles: Vec<_> = legs
                .into_iter()
                .map(|leg| {
                    s.spawn(move || {
                        let mut log = UndoLog::default();
                        let r = leg(&mut log);
                        (r, log)
                    })
                })
                .collect();
            handles.into_iter().map(join).collect()
        });
        let first_error = outcomes
            .iter_mut()
            .position(|(r, _)| r.is_err())
            .map(|i| std::mem::replace(&mut outcomes[i].0, Ok(())));
        match first_error {
            None => Ok(()),
            Some(Err(err)) => {
                for (_, log) in outcomes.iter_mut().rev() {
                    self.rollback(log);
                }
                Err(err)
            }
            Some(Ok(())) => unreachable!(),
        }
    }

    fn rollback(&self, log: &mut UndoLog) {
        for undo in log.drain_reversed() {
            // best effort: a failing compensation must not mask the cause
            let _ = match undo {
                Undo::Delete { provider, path } => {
                    self.call(provider, |p, t| p.delete_path(t, &path))
                }
                Undo::Restore {
                    provider,
                    path,
                    bytes,
                } => self
                    .call(provider, |p, t| p.upload_object(t, &path, &bytes, true))
                    .map(drop),
                Undo::Revoke {
                    provider,
                    path,
                    grantee,
                } => self.call(provider, |p, t| p.unshare_path(t, &path, &grantee)),
                Undo::Regrant {
                    provider,
                    path,
                    grantee,
                    perm,
                } => self.call(provider, |p, t| p.share_path(t, &path, &grantee, perm)),
            };
        }
    }

    /// Uploads `bytes`, logging how to undo it.
    fn put(
        &self,
        i: usize,
        path: &RemotePath,
        bytes: &[u8],
        overwrite: bool,
        log: &mut UndoLog,
    ) -> Result<()> {
        let previous = if overwrite {
            match self.call(i, |p, t| p.download_object(t, path)) {
                Ok(old) => Some(old),
                Err(GatewayError::NotFound(_)) => None,
                Err(e) => return Err(e),
            }
        } else {
            None
        };
        self.call(i, |p, t| p.upload_object(t, path, bytes, overwrite))?;
        log.push(match previous {
            Some(bytes) => Undo::Restore {
                provider: i,
                path: path.clone(),
                bytes,
            },
            None => Undo::Delete {
                provider: i,
                path: path.clone(),
            },
        });
        Ok(())
    }

    fn ensure_folder(&self, i: usize, path: &RemotePath, log: &mut UndoLog) -> Result<()> {
        match self.call(i, |p, t| p.create_folder(t, path)) {
            Ok(_) => {
                log.push(Undo::Delete {
                    provider: i,
                    path: path.clone(),
                });
                Ok(())
            }
            Err(GatewayError::Conflict(_)) => match self.call(i, |p, t| p.stat(t, path))? {
                EntryMeta {
                    kind: EntryKind::Folder,
                    ..
                } => Ok(()),
                _ => Err(GatewayError::Conflict(format!(
                    "{path} exists and is not a folder"
                ))),
            },
            Err(e) => Err(e),
        }
    }

    /// Reads a local file and uploads it under its final path segment.
    pub fn upload_file(
        &self,
        local_path: impl AsRef<Path>,
        overwrite: bool,
    ) -> Result<LogicalEntry> {
        let local_path = local_path.as_ref();
        let name = local_path
            .file_name()
            .and_then(|n| n.to_str())
            .ok_or_else(|| {
                GatewayError::Invalid(format!("{} has no usable file name", local_path.display()))
            })?;
        let content = fs::read(local_path)?;
        self.upload_bytes(name, &content, overwrite)
    }

    /// Encrypts `content` under a fresh key and spreads key material and
    /// ciphertext over the placement.
    ///
    /// Any provider failure rolls back every remote artifact this call
    /// created or replaced.
    pub fn upload_bytes(
        &self,
        name: &str,
        content: &[u8],
        overwrite: bool,
    ) -> Result<LogicalEntry> {
        let loc = self.locate_owned(name)?;
        if !overwrite && self.owned_exists(&loc)? {
            return Err(GatewayError::Conflict(name.to_owned()));
        }

        let key = generate_key()?;
        let blob = encrypt_blob(&key, name, content)?.to_bytes();
        let mac_key = MacKey::generate()?;
        let tag = compute_mac(&mac_key, content);
        let records = split_key(&key, self.key_count())?
            .into_iter()
            .map(|share| {
                KeyFileRecord {
                    key_share: share.bytes,
                    data_name: loc.data_name.clone(),
                }
                .encode()
            })
            .collect::<Result<Vec<_>>>()?;

        // local copies of the artifacts exist only while the transfer runs
        let mut staged = Vec::with_capacity(records.len() + 1);
        for r in &records {
            staged.push(self.staging.stage("key", r)?);
        }
        staged.push(self.staging.stage("blob", &blob)?);

        let mut legs: Vec<Leg<'_>> = Vec::new();
        for (i, record) in records.iter().enumerate() {
            let loc = &loc;
            let tag = &tag;
            legs.push(Box::new(move |log: &mut UndoLog| {
                let file = &loc.key_files[i];
                let folder = RemotePath::from_segments(file.parent_segments().to_vec())
                    .map_err(|e| GatewayError::from_provider("layout", e))?;
                self.ensure_folder(i, &folder, log)?;
                self.put(i, file, record, overwrite, log)?;
                if i == 0 {
                    self.put(0, &loc.mac_tag, tag.as_bytes(), overwrite, log)?;
                }
                Ok(())
            }));
        }
        {
            let loc = &loc;
            let blob = &blob;
            let mac_key = &mac_key;
            let d = self.data_index();
            legs.push(Box::new(move |log: &mut UndoLog| {
                self.put(d, &loc.data, blob, overwrite, log)?;
                self.put(d, &loc.mac_key, mac_key.as_bytes(), overwrite, log)
            }));
        }
        let result = self.run_legs(legs);
        drop(staged);
        result?;

        Ok(LogicalEntry {
            logical_name: name.to_owned(),
            size: content.len() as u64,
            owned: true,
            shared_from: None,
            problem: None,
        })
    }

    /// Fetches every artifact, rebuilds the key, decrypts, and checks the
    /// embedded name and the MAC.
    fn fetch(&self, loc: &Locator, expected_name: &str) -> Result<Vec<u8>> {
        let d = self.data_index();
        let (key_parts, data_part) = thread::scope(|s| {
            let key_legs: Vec<_> = (0..self.key_count())
                .map(|i| {
                    s.spawn(move || -> Result<(Vec<u8>, Option<Vec<u8>>)> {
                        let record =
                            self.call(i, |p, t| p.download_object(t, &loc.key_files[i]))?;
                        let tag = if i == 0 {
                            Some(self.call(0, |p, t| p.download_object(t, &loc.mac_tag))?)
                        } else {
                            None
                        };
                        Ok((record, tag))
                    })
                })
                .collect();
            let data_leg = s.spawn(move || -> Result<(Vec<u8>, Vec<u8>)> {
                let blob = self.call(d, |p, t| p.download_object(t, &loc.data))?;
                let mac_key = self.call(d, |p, t| p.download_object(t, &loc.mac_key))?;
                Ok((blob, mac_key))
            });
            (
                key_legs.into_iter().map(join).collect::<Vec<_>>(),
                join(data_leg),
            )
        });

        let mut records = Vec::with_capacity(key_parts.len());
        let mut tag_bytes = None;
        let mut staged = Vec::new();
        for part in key_parts {
            let (record, tag) = part?;
            staged.push(self.staging.stage("key", &record)?);
            records.push(KeyFileRecord::decode(&record)?);
            tag_bytes = tag_bytes.or(tag);
        }
        let (blob, mac_key) = data_part?;
        staged.push(self.staging.stage("blob", &blob)?);

        if records.iter().any(|r| r.data_name != loc.data_name) {
            return Err(GatewayError::Integrity(
                "key records point at a different data object".into(),
            ));
        }
        let shares: Vec<KeyShare> = records
            .iter()
            .enumerate()
            .map(|(index, r)| KeyShare {
                index,
                bytes: r.key_share,
            })
            .collect();
        let key = combine_key(&shares)?;
        let (embedded_name, content) = decrypt_blob(&key, &CipherBlob::from_bytes(&blob)?)?;
        drop(staged);

        if embedded_name != expected_name {
            return Err(GatewayError::Integrity(format!(
                "ciphertext carries name {embedded_name:?}, expected {expected_name:?}"
            )));
        }
        let mac_key = MacKey::from_slice(&mac_key)?;
        let tag = MacTag::from_slice(&tag_bytes.expect("first key leg fetches the tag"))?;
        if !verify_mac(&mac_key, &content, &tag) {
            return Err(GatewayError::Integrity(format!(
                "MAC mismatch for {expected_name}"
            )));
        }
        Ok(content)
    }

    fn locate_readable(&self, name: &str) -> Result<Locator> {
        let loc = self.locate_owned(name)?;
        if self.owned_exists(&loc)? {
            return Ok(loc);
        }
        if let Some(loc) = self
            .shared_entries()?
            .into_iter()
            .find(|(e, _)| e.logical_name == name && e.problem.is_none())
            .and_then(|(_, loc)| loc)
        {
            return Ok(loc);
        }
        // no longer listed: retrying a remembered location surfaces the
        // provider's refusal
        self.seen_shared
            .lock()
            .expect("poisoned")
            .get(name)
            .cloned()
            .ok_or_else(|| GatewayError::NotFound(name.to_owned()))
    }

    /// Decrypted, verified content of an owned or shared file.
    pub fn download_bytes(&self, name: &str) -> Result<Vec<u8>> {
        let loc = self.locate_readable(name)?;
        self.fetch(&loc, name)
    }

    /// Like [`download_bytes`](Self::download_bytes) but writes `dest`.
    /// Nothing is written unless decryption and verification succeed.
    pub fn download_file(&self, name: &str, dest: impl AsRef<Path>) -> Result<()> {
        let content = self.download_bytes(name)?;
        write_output(dest.as_ref(), &content)
    }

    /// Removes the key folder(s), ciphertext, and MAC key from every
    /// provider, including their trash.
    pub fn delete_file(&self, name: &str) -> Result<()> {
        let loc = self.require_owned(name)?;
        let ignore_missing = |r: Result<()>| match r {
            Err(GatewayError::NotFound(_)) => Ok(()),
            other => other,
        };
        let results: Vec<Result<()>> = thread::scope(|s| {
            let loc = &loc;
            let mut handles: Vec<_> = (0..self.key_count())
                .map(|i| {
                    s.spawn(move || {
                        let folder =
                            RemotePath::from_segments(loc.key_files[i].parent_segments().to_vec())
                                .map_err(|e| GatewayError::from_provider("layout", e))?;
                        ignore_missing(self.call(i, |p, t| p.delete_path(t, &folder)))
                    })
                })
                .collect();
            let d = self.data_index();
            handles.push(s.spawn(move || {
                ignore_missing(self.call(d, |p, t| p.delete_path(t, &loc.data)))?;
                ignore_missing(self.call(d, |p, t| p.delete_path(t, &loc.mac_key)))
            }));
            handles.into_iter().map(join).collect()
        });
        results.into_iter().collect()
    }

    /// Paths that make up a file on each provider for grant purposes:
    /// the key folder on each key provider, ciphertext and MAC key on the
    /// data provider.
    fn grant_targets(&self, loc: &Locator) -> Result<Vec<(usize, RemotePath)>> {
        let mut out = Vec::new();
        for (i, file) in loc.key_files.iter().enumerate() {
            let folder = RemotePath::from_segments(file.parent_segments().to_vec())
                .map_err(|e| GatewayError::from_provider("layout", e))?;
            out.push((i, folder));
        }
        out.push((self.data_index(), loc.data.clone()));
        out.push((self.data_index(), loc.mac_key.clone()));
        Ok(out)
    }

    fn previous_grant(
        &self,
        i: usize,
        path: &RemotePath,
        grantee: &str,
    ) -> Result<Option<Permission>> {
        Ok(self
            .call(i, |p, t| p.list_grants(t, path))?
            .into_iter()
            .find(|(g, _)| g == grantee)
            .map(|(_, perm)| perm))
    }

    /// Grants `grantee` the same permission on every artifact of the file.
    pub fn share_file(&self, name: &str, grantee: &str, perm: Permission) -> Result<()> {
        let loc = self.require_owned(name)?;
        let targets = self.grant_targets(&loc)?;
        let mut by_provider: BTreeMap<usize, Vec<RemotePath>> = BTreeMap::new();
        for (i, path) in targets {
            by_provider.entry(i).or_default().push(path);
        }
        let legs = by_provider
            .into_iter()
            .map(|(i, paths)| -> Leg<'_> {
                Box::new(move |log: &mut UndoLog| {
                    for path in paths {
                        let before = self.previous_grant(i, &path, grantee)?;
                        self.call(i, |p, t| p.share_path(t, &path, grantee, perm))
                            .map_err(|e| match e {
                                GatewayError::Capability(m) => GatewayError::Capability(format!(
                                    "{m} (key material is always shared through folders; \
                                     the data provider must allow file sharing)"
                                )),
                                other => other,
                            })?;
                        log.push(match before {
                            Some(old) => Undo::Regrant {
                                provider: i,
                                path,
                                grantee: grantee.to_owned(),
                                perm: old,
                            },
                            None => Undo::Revoke {
                                provider: i,
                                path,
                                grantee: grantee.to_owned(),
                            },
                        });
                    }
                    Ok(())
                })
            })
            .collect();
        self.run_legs(legs)
    }

    /// Removes `grantee`'s grants from every artifact of the file.
    pub fn unshare_file(&self, name: &str, grantee: &str) -> Result<()> {
        let loc = self.require_owned(name)?;
        let targets = self.grant_targets(&loc)?;
        let mut by_provider: BTreeMap<usize, Vec<RemotePath>> = BTreeMap::new();
        for (i, path) in targets {
            by_provider.entry(i).or_default().push(path);
        }
        let removed = std::sync::atomic::AtomicUsize::new(0);
        let removed_ref = &removed;
        let legs = by_provider
            .into_iter()
            .map(|(i, paths)| -> Leg<'_> {
                Box::new(move |log: &mut UndoLog| {
                    for path in paths {
                        let Some(old) = self.previous_grant(i, &path, grantee)? else {
                            continue;
                        };
                        self.call(i, |p, t| p.unshare_path(t, &path, grantee))?;
                        removed_ref.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                        log.push(Undo::Regrant {
                            provider: i,
                            path,
                            grantee: grantee.to_owned(),
                            perm: old,
                        });
                    }
                    Ok(())
                })
            })
            .collect();
        self.run_legs(legs)?;
        if removed.into_inner() == 0 {
            return Err(GatewayError::NotFound(format!(
                "{name} is not shared with {grantee}"
            )));
        }
        Ok(())
    }

    /// Owned files followed by files shared with this user, sorted by name.
    pub fn list_files(&self) -> Result<Vec<LogicalEntry>> {
        let data_listing = self.call(self.data_index(), |p, t| p.list_entries(t))?;
        let mut entries = self.owned_entries(&data_listing)?;
        entries.extend(
            self.shared_entries_with(&data_listing)?
                .into_iter()
                .map(|(e, _)| e),
        );
        entries.sort_by(|a, b| {
            a.logical_name
                .cmp(&b.logical_name)
                .then(b.owned.cmp(&a.owned))
                .then(a.shared_from.cmp(&b.shared_from))
        });
        Ok(entries)
    }

    fn owned_entries(&self, data_listing: &[EntryMeta]) -> Result<Vec<LogicalEntry>> {
        let nk_data = &self.name_keys[self.data_index()];
        let mut out = Vec::new();
        for meta in data_listing {
            if meta.shared_from.is_some()
                || meta.kind != EntryKind::File
                || meta.path.depth() != 1
                || meta.path.name().ends_with(layout::MAC_KEY_SUFFIX)
                || meta.path.name() == layout::META_FOLDER
            {
                continue;
            }
            let token = meta.path.name();
            let entry = match decrypt_name(nk_data, token) {
                Ok(name) => match self.owned_size(&name, meta.size) {
                    Ok(size) => LogicalEntry {
                        logical_name: name,
                        size,
                        owned: true,
                        shared_from: None,
                        problem: None,
                    },
                    Err(e) => LogicalEntry {
                        logical_name: name,
                        size: 0,
                        owned: true,
                        shared_from: None,
                        problem: Some(e.to_string()),
                    },
                },
                Err(e) => LogicalEntry {
                    logical_name: placeholder(token),
                    size: 0,
                    owned: true,
                    shared_from: None,
                    problem: Some(e.to_string()),
                },
            };
            out.push(entry);
        }
        Ok(out)
    }

    fn owned_size(&self, name: &str, blob_len: u64) -> Result<u64> {
        let loc = self.locate_owned(name)?;
        let key = self.fetch_key(&loc)?;
        let (_, size) = self.inspect_blob(&loc.data, &key, blob_len)?;
        Ok(size)
    }

    fn fetch_key(&self, loc: &Locator) -> Result<SymmetricKey> {
        let shares = (0..self.key_count())
            .map(|i| {
                let bytes = self.call(i, |p, t| p.download_object(t, &loc.key_files[i]))?;
                let record = KeyFileRecord::decode(&bytes)?;
                Ok(KeyShare {
                    index: i,
                    bytes: record.key_share,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(combine_key(&shares)?)
    }

    /// Recovers the embedded name and the content length of a blob by
    /// decrypting only its leading and trailing blocks.
    fn inspect_blob(
        &self,
        path: &RemotePath,
        key: &SymmetricKey,
        blob_len: u64,
    ) -> Result<(String, u64)> {
        let d = self.data_index();
        let block = BLOCK_LEN as u64;
        let iv_len = IV_LEN as u64;
        if blob_len < iv_len + block || !(blob_len - iv_len).is_multiple_of(block) {
            return Err(GatewayError::Format(format!(
                "blob length {blob_len} is malformed"
            )));
        }
        let head = self.call(d, |p, t| p.read_range(t, path, 0, iv_len + block))?;
        let first = decrypt_blocks(key, &head)?;
        let name_len = u16::from_be_bytes([first[0], first[1]]) as u64;
        let header_len = 2 + name_len;
        let header_blocks = header_len.div_ceil(block);
        if iv_len + header_blocks * block > blob_len {
            return Err(GatewayError::Format(
                "name header runs past the blob".into(),
            ));
        }
        let header = if header_blocks > 1 {
            let head = self.call(d, |p, t| {
                p.read_range(t, path, 0, iv_len + header_blocks * block)
            })?;
            decrypt_blocks(key, &head)?
        } else {
            first
        };
        let name = std::str::from_utf8(&header[2..header_len as usize])
            .map_err(|_| GatewayError::Format("embedded name is not UTF-8".into()))?
            .to_owned();

        let tail = self.call(d, |p, t| {
            p.read_range(t, path, blob_len - 2 * block, 2 * block)
        })?;
        let last = decrypt_blocks(key, &tail)?;
        let pad = *last.last().expect("one block") as usize;
        if pad == 0 || pad > BLOCK_LEN || last[BLOCK_LEN - pad..].iter().any(|&b| b as usize != pad)
        {
            return Err(GatewayError::Format("invalid padding".into()));
        }
        let plain_len = blob_len - iv_len - pad as u64;
        if plain_len < header_len {
            return Err(GatewayError::Format(
                "name header longer than payload".into(),
            ));
        }
        Ok((name, plain_len - header_len))
    }

    fn shared_entries(&self) -> Result<Vec<(LogicalEntry, Option<Locator>)>> {
        let data_listing = self.call(self.data_index(), |p, t| p.list_entries(t))?;
        self.shared_entries_with(&data_listing)
    }

    /// Pairs shared key records from every key provider by owner and data
    /// object, then reads each blob's header to learn the file name.
    fn shared_entries_with(
        &self,
        data_listing: &[EntryMeta],
    ) -> Result<Vec<(LogicalEntry, Option<Locator>)>> {
        let k = self.key_count();
        type Pending = (Vec<Option<(RemotePath, [u8; 32])>>, Option<RemotePath>);
        let mut groups: BTreeMap<(String, String), Pending> = BTreeMap::new();
        let mut broken: Vec<LogicalEntry> = Vec::new();

        for i in 0..k {
            for meta in self.call(i, |p, t| p.list_entries(t))? {
                let Some(owner) = meta.shared_from.clone() else {
                    continue;
                };
                let Some(token) = layout::token_of_key_file(&meta.path) else {
                    continue;
                };
                let token = token.to_owned();
                let record = self
                    .call(i, |p, t| p.download_object(t, &meta.path))
                    .and_then(|b| KeyFileRecord::decode(&b));
                let record = match record {
                    Ok(r) => r,
                    Err(e) => {
                        broken.push(LogicalEntry {
                            logical_name: placeholder(&token),
                            size: 0,
                            owned: false,
                            shared_from: Some(owner),
                            problem: Some(e.to_string()),
                        });
                        continue;
                    }
                };
                let slot = groups
                    .entry((owner.clone(), record.data_name.clone()))
                    .or_insert_with(|| (vec![None; k], None));
                slot.0[i] = Some((meta.path.clone(), record.key_share));
                if i == 0 {
                    let mac = layout::mac_tag(&token)
                        .map_err(|e| GatewayError::from_provider("layout", e))?
                        .in_namespace(owner.clone());
                    slot.1 = Some(mac);
                }
            }
        }

        let blob_sizes: BTreeMap<(String, String), u64> = data_listing
            .iter()
            .filter_map(|m| {
                let owner = m.shared_from.clone()?;
                (m.path.depth() == 1).then(|| ((owner, m.path.name().to_owned()), m.size))
            })
            .collect();

        let mut out: Vec<(LogicalEntry, Option<Locator>)> =
            broken.into_iter().map(|e| (e, None)).collect();
        for ((owner, data_name), (parts, mac_tag)) in groups {
            let failed = |problem: String| LogicalEntry {
                logical_name: placeholder(&data_name),
                size: 0,
                owned: false,
                shared_from: Some(owner.clone()),
                problem: Some(problem),
            };
            let (Some(parts), Some(mac_tag)) =
                (parts.into_iter().collect::<Option<Vec<_>>>(), mac_tag)
            else {
                out.push((failed("key material is only partly shared".into()), None));
                continue;
            };
            let Some(&blob_len) = blob_sizes.get(&(owner.clone(), data_name.clone())) else {
                out.push((failed("ciphertext is not shared or missing".into()), None));
                continue;
            };
            let loc = match (layout::data_object(&data_name), layout::mac_key(&data_name)) {
                (Ok(data), Ok(mac_key)) => Locator {
                    owner: Some(owner.clone()),
                    key_files: parts.iter().map(|(p, _)| p.clone()).collect(),
                    mac_tag,
                    data: data.in_namespace(owner.clone()),
                    mac_key: mac_key.in_namespace(owner.clone()),
                    data_name: data_name.clone(),
                },
                _ => {
                    out.push((failed("bad data object name".into()), None));
                    continue;
                }
            };
            let shares: Vec<KeyShare> = parts
                .iter()
                .enumerate()
                .map(|(index, (_, bytes))| KeyShare {
                    index,
                    bytes: *bytes,
                })
                .collect();
            let inspected = combine_key(&shares)
                .map_err(GatewayError::from)
                .and_then(|key| self.inspect_blob(&loc.data, &key, blob_len));
            match inspected {
                Ok((name, size)) => {
                    self.seen_shared
                        .lock()
                        .expect("poisoned")
                        .insert(name.clone(), loc.clone());
                    out.push((
                        LogicalEntry {
                            logical_name: name,
                            size,
                            owned: false,
                            shared_from: loc.owner.clone(),
                            problem: None,
                        },
                        Some(loc),
                    ))
                }
                Err(e) => out.push((failed(e.to_string()), None)),
            }
        }
        Ok(out)
    }

    /// Downloads every listed file into `dest_dir`. Failures are collected
    /// per file; the batch always runs to the end.
    pub fn sync_all(&self, dest_dir: impl AsRef<Path>) -> Result<SyncReport> {
        let dest_dir = dest_dir.as_ref();
        fs::create_dir_all(dest_dir)?;
        let data_listing = self.call(self.data_index(), |p, t| p.list_entries(t))?;
        let mut jobs: Vec<(LogicalEntry, Option<Locator>)> = self
            .owned_entries(&data_listing)?
            .into_iter()
            .map(|e| (e, None))
            .collect();
        jobs.extend(self.shared_entries_with(&data_listing)?);
        // owned copies claim a clashing name first
        jobs.sort_by(|(a, _), (b, _)| {
            a.logical_name
                .cmp(&b.logical_name)
                .then(b.owned.cmp(&a.owned))
        });

        let mut report = SyncReport::default();
        let mut taken = std::collections::BTreeSet::new();
        for (entry, loc) in jobs {
            let name = entry.logical_name.clone();
            if let Some(problem) = entry.problem {
                report.failed.push((name, GatewayError::Format(problem)));
                continue;
            }
            if let Err(e) = check_logical_name(&name) {
                report.failed.push((name, e));
                continue;
            }
            if !taken.insert(name.clone()) {
                report.failed.push((
                    name.clone(),
                    GatewayError::Conflict(format!("{name} already written by another entry")),
                ));
                continue;
            }
            let loc = match loc {
                Some(l) => Ok(l),
                None => self.locate_owned(&name),
            };
            let result = loc
                .and_then(|l| self.fetch(&l, &name))
                .and_then(|content| write_output(&dest_dir.join(&name), &content));
            match result {
                Ok(()) => report.written.push(name),
                Err(e) => report.failed.push((name, e)),
            }
        }
        Ok(report)
    }
}

/// Decrypts `iv || blocks` without removing padding.
fn decrypt_blocks(key: &SymmetricKey, data: &[u8]) -> Result<Vec<u8>> {
    if data.len() < IV_LEN + BLOCK_LEN {
        return Err(GatewayError::Format("short read from blob".into()));
    }
    let iv: [u8; IV_LEN] = data[..IV_LEN].try_into().expect("length checked");
    Ok(raw::cbc_decrypt(key.as_bytes(), &iv, &data[IV_LEN..])?)
}

fn write_output(dest: &Path, content: &[u8]) -> Result<()> {
    let dir: PathBuf = match dest.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(&dir)?;
    tmp.write_all(content)?;
    tmp.as_file().sync_all()?;
    tmp.persist(dest).map_err(|e| e.error)?;
    Ok(())
}
