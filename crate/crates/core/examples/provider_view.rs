//! What each provider actually holds after an upload: opaque paths, key
//! records on one side, ciphertext on the other.

use std::sync::Arc;

use twincloud::gateway::{Gateway, PlacementPolicy};
use twincloud::provider::{CloudProvider, MockProvider};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let keys = Arc::new(MockProvider::in_memory(
        "keys",
        "https://keys.example",
        false,
    ));
    let data = Arc::new(MockProvider::in_memory(
        "data",
        "https://data.example",
        true,
    ));
    let staging = tempfile::tempdir()?;
    let gateway = Gateway::new(
        [keys.clone() as Arc<dyn CloudProvider>, data.clone()],
        PlacementPolicy::pair("keys", "data")?,
        staging.path(),
    )?;
    let session = gateway.signup("alice", "alice's master password")?;
    let secret = b"quarterly numbers: up 12 percent";
    session.upload_bytes("quarterly.txt", secret, false)?;

    for m in [&keys, &data] {
        let store = m.dump_store();
        println!("== {}", m.config().id);
        for path in store.path_strings() {
            println!("  {path}");
        }
        println!("  holds plaintext: {}", store.contains_bytes(secret));
        println!("  holds file name: {}", store.contains_bytes(b"quarterly"));
    }
    Ok(())
}
