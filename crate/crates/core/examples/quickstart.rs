//! Sign up on two in-memory clouds, upload a file, list it, read it back.

use std::sync::Arc;

use twincloud::gateway::{Gateway, PlacementPolicy};
use twincloud::provider::{CloudProvider, MockProvider};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let key_cloud = Arc::new(MockProvider::in_memory(
        "dropbox",
        "https://dropbox.example",
        false,
    ));
    let data_cloud = Arc::new(MockProvider::in_memory(
        "gdrive",
        "https://drive.example",
        true,
    ));
    let staging = tempfile::tempdir()?;

    let gateway = Gateway::new(
        [key_cloud as Arc<dyn CloudProvider>, data_cloud],
        PlacementPolicy::pair("dropbox", "gdrive")?,
        staging.path(),
    )?;
    let session = gateway.signup("alice", "a long master password")?;

    session.upload_bytes("hello.txt", b"Hello, Bob!", false)?;
    for entry in session.list_files()? {
        println!("{}\t{} bytes", entry.logical_name, entry.size);
    }
    let back = session.download_bytes("hello.txt")?;
    println!("{}", String::from_utf8_lossy(&back));
    Ok(())
}
