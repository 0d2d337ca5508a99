use twincloud::crypto::{decrypt_name, encrypt_name, NameKeyPair};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let keys = NameKeyPair::generate()?;
    for name in ["hello.txt", "hello.txt", "Hello.txt", "taxes 2024.xlsx"] {
        let token = encrypt_name(&keys, name)?;
        println!("{name:18} -> {token}");
        assert_eq!(decrypt_name(&keys, &token)?, name);
    }

    let other = NameKeyPair::generate()?;
    let token = encrypt_name(&keys, "hello.txt")?;
    println!("wrong key: {:?}", decrypt_name(&other, &token).err());
    Ok(())
}
