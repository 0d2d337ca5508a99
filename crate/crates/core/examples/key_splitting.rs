use twincloud::crypto::{combine_key, generate_key, split_key};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let key = generate_key()?;
    let shares = split_key(&key, 3)?;
    for s in &shares {
        let preview: String = s.bytes[..6].iter().map(|b| format!("{b:02x}")).collect();
        println!("share {}: {preview}...", s.index);
    }
    assert_eq!(combine_key(&shares)?, key);

    let mut partial = [0u8; 32];
    for s in &shares[..2] {
        partial.iter_mut().zip(&s.bytes).for_each(|(a, b)| *a ^= b);
    }
    println!(
        "two of three shares rebuild the key: {}",
        &partial == key.as_bytes()
    );
    Ok(())
}
