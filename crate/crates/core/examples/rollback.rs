//! An upload that fails halfway leaves no trace on any provider.

use std::sync::Arc;

use twincloud::gateway::{Gateway, PlacementPolicy};
use twincloud::provider::{CloudProvider, MockProvider, Op};

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

    let before = (keys.dump_store(), data.dump_store());
    // the MAC key upload on the data cloud fails
    data.fail_after_op(Op::Upload, 1);
    let err = session
        .upload_bytes("report.odt", b"draft", false)
        .unwrap_err();
    println!("upload failed: {err}");

    let after = (keys.dump_store(), data.dump_store());
    println!(
        "key cloud unchanged:  {}",
        before.0.objects == after.0.objects
    );
    println!(
        "data cloud unchanged: {}",
        before.1.objects == after.1.objects
    );
    println!("staging empty:        {}", session.staging_is_empty()?);
    Ok(())
}
