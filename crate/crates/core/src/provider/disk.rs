//! Directory-tree persistence for [`super::MockProvider`].
//!
//! Layout under the root:
//!
//! ```text
//! accounts.tsv            username TAB derived-password
//! acl.tsv                 path TAB owner TAB grantee TAB R|E
//! tokens.tsv              token TAB username
//! data/<owner>/<path...>  live objects (files) and folders (directories)
//! trash/<owner>/<path...> trashed entries, same shape as data/
//! .tmp/                   staging for atomic renames
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use super::path::check_segment;
use super::store::{ProviderStore, StoreKey, TrashItem};
use super::types::Permission;
use crate::crypto::DerivedPassword;

pub(crate) struct DiskStore {
    root: PathBuf,
}

pub(crate) type TokenTable = BTreeMap<String, String>;

fn bad_data(msg: String) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg)
}

impl DiskStore {
    pub fn open(root: &Path) -> io::Result<(Self, ProviderStore, TokenTable)> {
        for dir in ["data", "trash", ".tmp"] {
            fs::create_dir_all(root.join(dir))?;
        }
        let disk = Self {
            root: root.to_path_buf(),
        };
        let mut store = ProviderStore::default();

        for fields in disk.read_table("accounts.tsv", 2)? {
            store.accounts.insert(
                fields[0].clone(),
                DerivedPassword::from_stored(fields[1].clone()),
            );
        }
        for fields in disk.read_table("acl.tsv", 4)? {
            let key = StoreKey::new(fields[1].clone(), split_path(&fields[0])?);
            let perm = Permission::from_code(&fields[3])
                .ok_or_else(|| bad_data(format!("bad permission {:?}", fields[3])))?;
            store
                .acl
                .entry(key)
                .or_default()
                .insert(fields[2].clone(), perm);
        }
        let tokens = disk
            .read_table("tokens.tsv", 2)?
            .into_iter()
            .map(|f| (f[0].clone(), f[1].clone()))
            .collect();

        for owner_dir in fs::read_dir(root.join("data"))? {
            let owner_dir = owner_dir?;
            let owner = owner_dir.file_name().to_string_lossy().into_owned();
            walk(
                &owner_dir.path(),
                &mut Vec::new(),
                &mut |segs, is_dir, path| {
                    let key = StoreKey::new(owner.clone(), segs.to_vec());
                    if is_dir {
                        store.folders.insert(key);
                    } else {
                        store.objects.insert(key, fs::read(path)?);
                    }
                    Ok(())
                },
            )?;
        }
        for owner_dir in fs::read_dir(root.join("trash"))? {
            let owner_dir = owner_dir?;
            let owner = owner_dir.file_name().to_string_lossy().into_owned();
            walk(
                &owner_dir.path(),
                &mut Vec::new(),
                &mut |segs, is_dir, path| {
                    let key = StoreKey::new(owner.clone(), segs.to_vec());
                    let item = if is_dir {
                        TrashItem::Folder
                    } else {
                        TrashItem::File(fs::read(path)?)
                    };
                    store.trash.insert(key, item);
                    Ok(())
                },
            )?;
        }
        Ok((disk, store, tokens))
    }

    fn read_table(&self, name: &str, width: usize) -> io::Result<Vec<Vec<String>>> {
        let text = match fs::read_to_string(self.root.join(name)) {
            Ok(t) => t,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(e),
        };
        text.lines()
            .filter(|l| !l.is_empty())
            .map(|line| {
                let fields: Vec<String> = line.split('\t').map(str::to_owned).collect();
                if fields.len() != width {
                    return Err(bad_data(format!("{name}: malformed line {line:?}")));
                }
                Ok(fields)
            })
            .collect()
    }

    fn write_atomic(&self, dest: &Path, bytes: &[u8]) -> io::Result<()> {
        let mut tmp = tempfile::NamedTempFile::new_in(self.root.join(".tmp"))?;
        tmp.write_all(bytes)?;
        tmp.as_file().sync_all()?;
        tmp.persist(dest).map_err(|e| e.error)?;
        Ok(())
    }

    fn write_table(&self, name: &str, rows: impl Iterator<Item = String>) -> io::Result<()> {
        let mut text = String::new();
        for row in rows {
            text.push_str(&row);
            text.push('\n');
        }
        self.write_atomic(&self.root.join(name), text.as_bytes())
    }

    pub fn write_accounts(&self, accounts: &BTreeMap<String, DerivedPassword>) -> io::Result<()> {
        self.write_table(
            "accounts.tsv",
            accounts
                .iter()
                .map(|(user, pw)| format!("{user}\t{}", pw.as_str())),
        )
    }

    pub fn write_acl(
        &self,
        acl: &BTreeMap<StoreKey, BTreeMap<String, Permission>>,
    ) -> io::Result<()> {
        self.write_table(
            "acl.tsv",
            acl.iter().flat_map(|(key, grants)| {
                grants.iter().map(move |(grantee, perm)| {
                    format!(
                        "{}\t{}\t{grantee}\t{}",
                        key.path_string(),
                        key.owner,
                        perm.code()
                    )
                })
            }),
        )
    }

    pub fn write_tokens(&self, tokens: &TokenTable) -> io::Result<()> {
        self.write_table(
            "tokens.tsv",
            tokens.iter().map(|(tok, user)| format!("{tok}\t{user}")),
        )
    }

    fn live(&self, key: &StoreKey) -> PathBuf {
        self.locate("data", key)
    }

    fn trashed(&self, key: &StoreKey) -> PathBuf {
        self.locate("trash", key)
    }

    fn locate(&self, area: &str, key: &StoreKey) -> PathBuf {
        let mut p = self.root.join(area).join(&key.owner);
        for seg in &key.segments {
            p.push(seg);
        }
        p
    }

    pub fn make_owner(&self, owner: &str) -> io::Result<()> {
        fs::create_dir_all(self.root.join("data").join(owner))
    }

    pub fn remove_owner(&self, owner: &str) -> io::Result<()> {
        remove_any(&self.root.join("data").join(owner))?;
        remove_any(&self.root.join("trash").join(owner))
    }

    pub fn put_object(&self, key: &StoreKey, bytes: &[u8]) -> io::Result<()> {
        self.write_atomic(&self.live(key), bytes)
    }

    pub fn make_folder(&self, key: &StoreKey) -> io::Result<()> {
        fs::create_dir(self.live(key))
    }

    /// Removes the live entry and anything under it in trash.
    pub fn purge(&self, key: &StoreKey) -> io::Result<()> {
        remove_any(&self.live(key))?;
        remove_any(&self.trashed(key))
    }

    pub fn move_to_trash(&self, key: &StoreKey) -> io::Result<()> {
        let dest = self.trashed(key);
        remove_any(&dest)?;
        if let Some(parent) = dest.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::rename(self.live(key), dest)
    }
}

fn remove_any(path: &Path) -> io::Result<()> {
    match fs::symlink_metadata(path) {
        Ok(meta) if meta.is_dir() => fs::remove_dir_all(path),
        Ok(_) => fs::remove_file(path),
        Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(()),
        Err(e) => Err(e),
    }
}

fn split_path(text: &str) -> io::Result<Vec<String>> {
    let segs: Vec<String> = text
        .trim_start_matches('/')
        .split('/')
        .map(str::to_owned)
        .collect();
    for seg in &segs {
        check_segment(seg).map_err(|e| bad_data(e.to_string()))?;
    }
    Ok(segs)
}

/// Called with (segments, is_dir, absolute path) for each entry.
type Visitor<'a> = dyn FnMut(&[String], bool, &Path) -> io::Result<()> + 'a;

fn walk(dir: &Path, segs: &mut Vec<String>, visit: &mut Visitor<'_>) -> io::Result<()> {
    let mut entries: Vec<_> = fs::read_dir(dir)?.collect::<io::Result<_>>()?;
    entries.sort_by_key(|e| e.file_name());
    for entry in entries {
        let name = entry
            .file_name()
            .into_string()
            .map_err(|n| bad_data(format!("non-UTF-8 file name {n:?}")))?;
        let is_dir = entry.file_type()?.is_dir();
        segs.push(name);
        visit(segs, is_dir, &entry.path())?;
        if is_dir {
            walk(&entry.path(), segs, visit)?;
        }
        segs.pop();
    }
    Ok(())
}
