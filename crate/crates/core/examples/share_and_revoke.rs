//! Alice shares a file with Bob through provider grants only, then takes
//! the grant back.

use std::sync::Arc;

use twincloud::gateway::{Gateway, GatewayError, PlacementPolicy};
use twincloud::provider::{CloudProvider, MockProvider, Permission};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let providers: Vec<Arc<dyn CloudProvider>> = vec![
        Arc::new(MockProvider::in_memory(
            "keys",
            "https://keys.example",
            false,
        )),
        Arc::new(MockProvider::in_memory(
            "data",
            "https://data.example",
            true,
        )),
    ];
    let staging = tempfile::tempdir()?;
    let gateway = Gateway::new(
        providers,
        PlacementPolicy::pair("keys", "data")?,
        staging.path(),
    )?;

    let alice = gateway.signup("alice", "alice's master password")?;
    let bob = gateway.signup("bob", "bob's master password")?;

    alice.upload_bytes("plans.txt", b"meet at noon", false)?;
    alice.share_file("plans.txt", "bob", Permission::Read)?;

    for e in bob.list_files()? {
        println!(
            "bob sees {} from {}",
            e.logical_name,
            e.shared_from.unwrap_or_default()
        );
    }
    println!(
        "bob reads: {}",
        String::from_utf8_lossy(&bob.download_bytes("plans.txt")?)
    );

    alice.unshare_file("plans.txt", "bob")?;
    match bob.download_bytes("plans.txt") {
        Err(GatewayError::AccessDenied(why)) => println!("after unshare: denied ({why})"),
        other => println!("after unshare: unexpected {other:?}"),
    }
    Ok(())
}
