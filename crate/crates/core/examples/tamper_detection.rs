//! A single flipped bit in the stored ciphertext is caught before anything
//! is written locally.

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
    let work = tempfile::tempdir()?;
    let gateway = Gateway::new(
        [keys as Arc<dyn CloudProvider>, data.clone()],
        PlacementPolicy::pair("keys", "data")?,
        work.path().join("staging"),
    )?;
    let session = gateway.signup("alice", "alice's master password")?;
    session.upload_bytes("invoice.pdf", &[7u8; 2048], false)?;

    // the ciphertext is the only top-level object that is not a MAC key
    let store = data.dump_store();
    let blob = store
        .objects
        .keys()
        .find(|k| k.segments.len() == 1 && !k.segments[0].ends_with(".mackey"))
        .expect("uploaded blob")
        .clone();
    data.patch_object(&blob, |bytes| bytes[1000] ^= 0x01)?;

    let dest = work.path().join("invoice.pdf");
    match session.download_file("invoice.pdf", &dest) {
        Ok(()) => println!("tampering went unnoticed"),
        Err(e) => println!("refused: {e}; output written: {}", dest.exists()),
    }
    Ok(())
}
