//! Clouds persisted on disk; a second "machine" logs in and pulls every
//! file down, reusing cached tokens on the next login.

use std::sync::Arc;

use twincloud::gateway::{Gateway, PlacementPolicy};
use twincloud::provider::{CloudProvider, MockProvider, Op, ProviderConfig};

type Opened = (Gateway, Vec<Arc<MockProvider>>);

fn open(root: &std::path::Path) -> Result<Opened, Box<dyn std::error::Error>> {
    let mocks = vec![
        Arc::new(MockProvider::open(
            ProviderConfig::new("keys", "https://keys.example")
                .file_sharing(false)
                .persist_at(root.join("clouds/keys")),
        )?),
        Arc::new(MockProvider::open(
            ProviderConfig::new("data", "https://data.example")
                .persist_at(root.join("clouds/data")),
        )?),
    ];
    let gateway = Gateway::new(
        mocks.iter().map(|m| m.clone() as Arc<dyn CloudProvider>),
        PlacementPolicy::pair("keys", "data")?,
        root.join("staging"),
    )?
    .with_token_cache(root.join("tokens.tsv"));
    Ok((gateway, mocks))
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = tempfile::tempdir()?;
    {
        let (gateway, _) = open(root.path())?;
        let laptop = gateway.signup("alice", "alice's master password")?;
        for (name, body) in [("a.txt", "first"), ("b.txt", "second"), ("c.txt", "third")] {
            laptop.upload_bytes(name, body.as_bytes(), false)?;
        }
    }

    let (gateway, mocks) = open(root.path())?;
    let desktop = gateway.login("alice", "alice's master password")?;
    let report = desktop.sync_all(root.path().join("desktop"))?;
    println!("synced {} files: {:?}", report.count(), report.written);

    for m in &mocks {
        m.reset_counters();
    }
    gateway.login("alice", "alice's master password")?;
    let auth_calls: u64 = mocks.iter().map(|m| m.call_count(Op::Authenticate)).sum();
    println!("authenticate calls on warm login: {auth_calls}");
    Ok(())
}
