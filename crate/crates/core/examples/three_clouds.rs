//! Two key clouds and one data cloud. The file key is split into XOR
//! shares, so no single provider ever stores it.

use std::sync::Arc;

use twincloud::gateway::{Gateway, PlacementPolicy};
use twincloud::provider::{CloudProvider, MockProvider, Permission};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mocks: Vec<Arc<MockProvider>> = ["dropbox", "box", "gdrive"]
        .iter()
        .map(|id| {
            let sharing = *id == "gdrive";
            Arc::new(MockProvider::in_memory(
                id,
                &format!("https://{id}.example"),
                sharing,
            ))
        })
        .collect();
    let placement = PlacementPolicy::new(["dropbox", "box"], "gdrive")?;
    let staging = tempfile::tempdir()?;
    let gateway = Gateway::new(
        mocks.iter().map(|m| m.clone() as Arc<dyn CloudProvider>),
        placement,
        staging.path(),
    )?;

    let alice = gateway.signup("alice", "alice's master password")?;
    let bob = gateway.signup("bob", "bob's master password")?;
    alice.upload_bytes("thesis.pdf", &vec![0x25; 40_000], false)?;
    alice.share_file("thesis.pdf", "bob", Permission::Read)?;
    assert_eq!(bob.download_bytes("thesis.pdf")?.len(), 40_000);

    for m in &mocks {
        let store = m.dump_store();
        println!(
            "{:8} {} objects, {} bytes, {} grants",
            m.config().id,
            store.objects.len(),
            store.total_object_bytes(),
            store.acl.len()
        );
    }
    Ok(())
}
