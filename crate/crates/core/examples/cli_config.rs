//! Drives the command-line front end in-process from a generated config.

use std::fs;

use twincloud::cli::{run_command, CliEnv};

const CONFIG: &str = r#"
staging_dir = "staging"
token_cache = "tokens.tsv"
default_dest = "downloads"

[[provider]]
id = "dropbox"
url = "https://dropbox.example"
file_sharing = false
root = "clouds/dropbox"

[[provider]]
id = "gdrive"
url = "https://drive.example"
root = "clouds/gdrive"

[placement]
key_providers = "dropbox"
data_provider = "gdrive"
"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let config = dir.path().join("twincloud.toml");
    fs::write(&config, CONFIG)?;
    let src = dir.path().join("hello.txt");
    fs::write(&src, "Hello, Bob!")?;

    let env = |user: &str| CliEnv {
        config: Some(config.clone()),
        user: Some(user.into()),
        password: Some(format!("{user}'s master password")),
        ..CliEnv::default()
    };
    let run = |user: &str, args: &[&str]| {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let argv = std::iter::once("twincloud").chain(args.iter().copied());
        let code = run_command(argv, &env(user), &mut out, &mut err);
        print!(
            "{user}$ twincloud {} -> {code}\n{}",
            args.join(" "),
            String::from_utf8_lossy(&out)
        );
        eprint!("{}", String::from_utf8_lossy(&err));
    };

    run("alice", &["signup"]);
    run("bob", &["signup"]);
    run("alice", &["up", src.to_str().unwrap()]);
    run("alice", &["share", "hello.txt", "bob"]);
    run("bob", &["ls"]);
    run("bob", &["down", "hello.txt"]);
    run("bob", &["down", "missing.txt"]);
    Ok(())
}
