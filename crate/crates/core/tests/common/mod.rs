#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::rngs::StdRng;
use rand::{Rng, RngCore, SeedableRng};
use tempfile::TempDir;
use twincloud::crypto::{combine_key, encrypt_name, KeyShare, NameKeyPair, SymmetricKey};
use twincloud::gateway::{
    Gateway, KeyFileRecord, PlacementPolicy, Session, KEY_FILE_SUFFIX, KEY_FOLDER_SUFFIX,
    META_FOLDER, NAME_KEY_FILE,
};
use twincloud::provider::{CloudProvider, MockProvider, ProviderStore, StoreKey};

pub const PASSWORD: &str = "correct horse battery";

/// `k` folder-sharing-only key providers plus one data provider, all in
/// memory, with a private scratch directory.
pub struct World {
    pub mocks: Vec<Arc<MockProvider>>,
    pub placement: PlacementPolicy,
    pub dir: TempDir,
}

impl World {
    pub fn new(k: usize) -> Self {
        let mut mocks = Vec::new();
        let mut key_ids = Vec::new();
        for i in 0..k {
            let id = format!("key{i}");
            mocks.push(Arc::new(MockProvider::in_memory(
                &id,
                &format!("https://{id}.example"),
                false,
            )));
            key_ids.push(id);
        }
        mocks.push(Arc::new(MockProvider::in_memory(
            "data",
            "https://data.example",
            true,
        )));
        Self {
            mocks,
            placement: PlacementPolicy::new(key_ids, "data").unwrap(),
            dir: tempfile::tempdir().unwrap(),
        }
    }

    pub fn k(&self) -> usize {
        self.placement.key_count()
    }

    pub fn data(&self) -> &MockProvider {
        self.mocks.last().unwrap()
    }

    pub fn key(&self, i: usize) -> &MockProvider {
        &self.mocks[i]
    }

    pub fn staging(&self, user: &str) -> PathBuf {
        self.dir.path().join("staging").join(user)
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }

    pub fn gateway(&self, user: &str) -> Gateway {
        let remotes = self
            .mocks
            .iter()
            .map(|m| m.clone() as Arc<dyn CloudProvider>);
        Gateway::new(remotes, self.placement.clone(), self.staging(user)).unwrap()
    }

    pub fn cached_gateway(&self, user: &str) -> Gateway {
        self.gateway(user)
            .with_token_cache(self.dir.path().join(format!("tokens-{user}.tsv")))
    }

    pub fn signup(&self, user: &str) -> Session {
        self.gateway(user).signup(user, PASSWORD).unwrap()
    }

    pub fn dumps(&self) -> Vec<ProviderStore> {
        self.mocks.iter().map(|m| m.dump_store()).collect()
    }

    pub fn clear_faults(&self) {
        for m in &self.mocks {
            m.clear_fault();
        }
    }
}

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

pub fn random_bytes(rng: &mut impl RngCore, len: usize) -> Vec<u8> {
    let mut v = vec![0u8; len];
    rng.fill_bytes(&mut v);
    v
}

pub fn random_len(rng: &mut impl Rng, lo: usize, hi: usize) -> usize {
    rng.gen_range(lo..=hi)
}

pub fn dir_is_empty(p: &Path) -> bool {
    std::fs::read_dir(p)
        .map(|mut d| d.next().is_none())
        .unwrap_or(true)
}

// ---- reading protocol artifacts straight out of provider stores ----

pub fn name_key(w: &World, user: &str, i: usize) -> NameKeyPair {
    let holder = (i + 1) % w.mocks.len();
    let store = w.mocks[holder].dump_store();
    let bytes =
        &store.objects[&StoreKey::new(user, vec![META_FOLDER.into(), NAME_KEY_FILE.into()])];
    NameKeyPair::from_bytes(bytes).unwrap()
}

pub fn key_token(w: &World, user: &str, i: usize, name: &str) -> String {
    encrypt_name(&name_key(w, user, i), name).unwrap()
}

pub fn data_token(w: &World, user: &str, name: &str) -> String {
    encrypt_name(&name_key(w, user, w.k()), name).unwrap()
}

pub fn key_record(w: &World, user: &str, i: usize, name: &str) -> KeyFileRecord {
    let tok = key_token(w, user, i, name);
    let key = StoreKey::new(
        user,
        vec![
            format!("{tok}{KEY_FOLDER_SUFFIX}"),
            format!("{tok}{KEY_FILE_SUFFIX}"),
        ],
    );
    KeyFileRecord::decode(&w.key(i).dump_store().objects[&key]).unwrap()
}

pub fn blob_key(w: &World, user: &str, name: &str) -> StoreKey {
    StoreKey::new(user, vec![data_token(w, user, name)])
}

/// The file key, rebuilt from the records on every key provider.
pub fn file_key(w: &World, user: &str, name: &str) -> SymmetricKey {
    let shares: Vec<KeyShare> = (0..w.k())
        .map(|i| KeyShare {
            index: i,
            bytes: key_record(w, user, i, name).key_share,
        })
        .collect();
    combine_key(&shares).unwrap()
}

pub fn stored_blob(w: &World, user: &str, name: &str) -> Vec<u8> {
    w.data().dump_store().objects[&blob_key(w, user, name)].clone()
}

/// [`file_key`] computed from an existing snapshot of every store, in
/// placement order.
pub fn file_key_in(stores: &[ProviderStore], user: &str, name: &str) -> SymmetricKey {
    let n = stores.len();
    let nk = |i: usize| {
        let bytes = &stores[(i + 1) % n].objects
            [&StoreKey::new(user, vec![META_FOLDER.into(), NAME_KEY_FILE.into()])];
        NameKeyPair::from_bytes(bytes).unwrap()
    };
    let shares: Vec<KeyShare> = (0..n - 1)
        .map(|i| {
            let tok = encrypt_name(&nk(i), name).unwrap();
            let key = StoreKey::new(
                user,
                vec![
                    format!("{tok}{KEY_FOLDER_SUFFIX}"),
                    format!("{tok}{KEY_FILE_SUFFIX}"),
                ],
            );
            KeyShare {
                index: i,
                bytes: KeyFileRecord::decode(&stores[i].objects[&key])
                    .unwrap()
                    .key_share,
            }
        })
        .collect();
    combine_key(&shares).unwrap()
}

/// The stored ciphertext of `name`, read from a snapshot.
pub fn blob_in<'a>(stores: &'a [ProviderStore], user: &str, name: &str) -> &'a [u8] {
    let n = stores.len();
    let bytes =
        &stores[0].objects[&StoreKey::new(user, vec![META_FOLDER.into(), NAME_KEY_FILE.into()])];
    let tok = encrypt_name(&NameKeyPair::from_bytes(bytes).unwrap(), name).unwrap();
    &stores[n - 1].objects[&StoreKey::new(user, vec![tok])]
}
