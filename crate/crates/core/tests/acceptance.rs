//! Acceptance checks, one line of output per criterion.
//!
//! Runs without the libtest harness so every verdict is printed even when
//! all checks pass. Exits non-zero if any criterion fails.

mod common;

use std::collections::BTreeSet;
use std::io::Write;
use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use aho_corasick::AhoCorasick;
use common::{
    blob_in, blob_key, dir_is_empty, file_key, file_key_in, random_bytes, random_len, rng,
    stored_blob, World, PASSWORD,
};
use rand::Rng;
use twincloud::crypto::raw::{cbc_decrypt, cbc_encrypt, hmac_sha256};
use twincloud::crypto::{
    combine_key, decrypt_blob, derive_provider_password, encrypt_blob, generate_key, split_key,
    KeyShare,
};
use twincloud::gateway::GatewayError;
use twincloud::provider::{Op, Permission, ProviderStore};

type Check = Result<(), String>;
type Criterion = (&'static str, fn() -> Check);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn hex(s: &str) -> Vec<u8> {
    (0..s.len())
        .step_by(2)
        .map(|i| u8::from_str_radix(&s[i..i + 2], 16).unwrap())
        .collect()
}

fn window(bytes: &[u8], at: usize) -> &[u8] {
    let start = at.min(bytes.len().saturating_sub(64));
    &bytes[start..(start + 64).min(bytes.len())]
}

fn random_name(r: &mut impl Rng) -> String {
    const ALNUM: &[u8] = b"abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789";
    (0..12)
        .map(|_| ALNUM[r.gen_range(0..ALNUM.len())] as char)
        .collect()
}

// 1
fn end_to_end_share() -> Check {
    let started = Instant::now();
    let w = World::new(1);
    let alice = w.signup("alice");
    let original = random_bytes(&mut rng(1), 1 << 20);
    let src = w.path("hello.bin");
    std::fs::write(&src, &original).unwrap();
    alice.upload_file(&src, false).map_err(|e| e.to_string())?;
    let bob = w.signup("bob");
    alice
        .share_file("hello.bin", "bob", Permission::Read)
        .map_err(|e| e.to_string())?;
    let listed = bob.list_files().map_err(|e| e.to_string())?;
    ensure!(listed.len() == 1, "bob sees {} entries", listed.len());
    ensure!(
        listed[0].logical_name == "hello.bin"
            && listed[0].shared_from.as_deref() == Some("alice")
            && !listed[0].owned,
        "unexpected entry {:?}",
        listed[0]
    );
    let dest = w.path("bob-hello.bin");
    bob.download_file("hello.bin", &dest)
        .map_err(|e| e.to_string())?;
    ensure!(
        std::fs::read(&dest).unwrap() == original,
        "downloaded bytes differ"
    );
    let elapsed = started.elapsed();
    ensure!(elapsed < Duration::from_secs(5), "took {elapsed:?}");
    Ok(())
}

// 2
fn split_trust_audit() -> Check {
    let w = World::new(1);
    let alice = w.signup("alice");
    w.signup("bob");
    let mut r = rng(2);
    let mut files = Vec::new();
    let mut used = BTreeSet::new();
    while files.len() < 100 {
        let name = random_name(&mut r);
        if !used.insert(name.clone()) {
            continue;
        }
        let len = random_len(&mut r, 64, 1 << 20);
        let content = random_bytes(&mut r, len);
        alice
            .upload_bytes(&name, &content, false)
            .map_err(|e| e.to_string())?;
        if files.len() % 3 == 0 {
            alice
                .share_file(&name, "bob", Permission::Read)
                .map_err(|e| e.to_string())?;
        }
        files.push((name, content));
    }
    let dumps = w.dumps();
    let (key_dump, data_dump) = (&dumps[0], &dumps[1]);

    // (label, needle) lists, each searched in one pass over a store
    let mut anywhere: Vec<(String, Vec<u8>)> = Vec::new();
    let mut not_on_data = Vec::new();
    let mut not_on_keys = Vec::new();
    for (name, content) in &files {
        for at in [0, content.len() / 2, content.len()] {
            anywhere.push((
                format!("(a) plaintext of {name}"),
                window(content, at).to_vec(),
            ));
        }
        let k = file_key_in(&dumps, "alice", name);
        not_on_data.push((
            format!("(b) key of {name} on data provider"),
            k.as_bytes().to_vec(),
        ));
        let blob = blob_in(&dumps, "alice", name);
        for at in [16, blob.len() / 2, blob.len()] {
            not_on_keys.push((
                format!("(c) ciphertext of {name} on key provider"),
                window(blob, at).to_vec(),
            ));
        }
    }
    let mut violations = Vec::new();
    for d in &dumps {
        violations.extend(found(d, &anywhere));
        for (name, _) in &files {
            if d.path_strings().iter().any(|p| p.contains(name.as_str())) {
                violations.push(format!("(d) name {name} in a path table"));
            }
        }
    }
    violations.extend(found(data_dump, &not_on_data));
    violations.extend(found(key_dump, &not_on_keys));
    ensure!(
        violations.is_empty(),
        "{} violations: {:?}",
        violations.len(),
        violations
    );
    Ok(())
}

/// Labels of the needles that occur anywhere in the store's bytes or paths.
fn found(store: &ProviderStore, needles: &[(String, Vec<u8>)]) -> Vec<String> {
    let ac = AhoCorasick::new(needles.iter().map(|(_, n)| n)).unwrap();
    let paths = store.path_strings();
    let mut hit = BTreeSet::new();
    let regions = store.byte_regions();
    let haystacks = regions
        .iter()
        .map(|(_, b)| *b)
        .chain(paths.iter().map(|p| p.as_bytes()));
    for hay in haystacks {
        for m in ac.find_overlapping_iter(hay) {
            hit.insert(m.pattern().as_usize());
        }
    }
    hit.into_iter().map(|i| needles[i].0.clone()).collect()
}

// 3
fn crypto_conformance() -> Check {
    let key: [u8; 32] = hex("603deb1015ca71be2b73aef0857d77811f352c073b6108d72d9810a30914dff4")
        .try_into()
        .unwrap();
    let iv: [u8; 16] = hex("000102030405060708090a0b0c0d0e0f").try_into().unwrap();
    let pt = hex(concat!(
        "6bc1bee22e409f96e93d7e117393172a",
        "ae2d8a571e03ac9c9eb76fac45af8e51",
        "30c81c46a35ce411e5fbc1191a0a52ef",
        "f69f2445df4f9b17ad2b417be66c3710"
    ));
    let ct = hex(concat!(
        "f58c4c04d6e5f1ba779eabfb5f7bfbd6",
        "9cfc4e967edb808d679f777bc6702c7d",
        "39f23369a9d9bacfa530e26304231461",
        "b2eb05e2c39be9fcda6c19078c6a9d1b"
    ));
    ensure!(
        cbc_encrypt(&key, &iv, &pt).unwrap() == ct,
        "CBC-AES256 encrypt vector"
    );
    ensure!(
        cbc_decrypt(&key, &iv, &ct).unwrap() == pt,
        "CBC-AES256 decrypt vector"
    );

    let hmac_cases: [(Vec<u8>, Vec<u8>, &str); 6] = [
        (
            vec![0x0b; 20],
            b"Hi There".to_vec(),
            "b0344c61d8db38535ca8afceaf0bf12b881dc200c9833da726e9376c2e32cff7",
        ),
        (
            b"Jefe".to_vec(),
            b"what do ya want for nothing?".to_vec(),
            "5bdcc146bf60754e6a042426089575c75a003f089d2739839dec58b964ec3843",
        ),
        (
            vec![0xaa; 20],
            vec![0xdd; 50],
            "773ea91e36800e46854db8ebd09181a72959098b3ef8c122d9635514ced565fe",
        ),
        (
            (1..=25).collect(),
            vec![0xcd; 50],
            "82558a389a443c0ea4cc819899f2083a85f0faa3e578f8077a2e3ff46729665b",
        ),
        (
            vec![0xaa; 131],
            b"Test Using Larger Than Block-Size Key - Hash Key First".to_vec(),
            "60e431591ee0b67f0d8a26aacbf5b77f8e0bc6213728c5140546040f0ee37f54",
        ),
        (
            vec![0xaa; 131],
            b"This is a test using a larger than block-size key and a larger than block-size data. The key needs to be hashed before being used by the HMAC algorithm.".to_vec(),
            "9b09ffa71b942fcb27635fbcd5b0e944bfdc63644f0713938a7f51535c3a35e2",
        ),
    ];
    for (i, (k, data, expected)) in hmac_cases.iter().enumerate() {
        ensure!(
            hmac_sha256(k, data).to_vec() == hex(expected),
            "HMAC vector {i}"
        );
    }

    let mut r = rng(3);
    for case in 0..1000 {
        let name_len = r.gen_range(1..=255);
        let name: String = (0..name_len)
            .map(|_| r.gen_range(b'a'..=b'z') as char)
            .collect();
        let content_len = r.gen_range(0..=4096);
        let content = random_bytes(&mut r, content_len);
        let k = generate_key().unwrap();
        let blob = encrypt_blob(&k, &name, &content).unwrap();
        let bytes = blob.to_bytes();
        let expected = 16 + 16 * (2 + name.len() + content.len() + 1).div_ceil(16);
        ensure!(
            bytes.len() == expected,
            "case {case}: length {} != {expected}",
            bytes.len()
        );
        let (n, c) = decrypt_blob(&k, &blob).unwrap();
        ensure!(
            n == name && c == content,
            "case {case}: round trip mismatch"
        );
    }
    Ok(())
}

// 4
fn password_isolation() -> Check {
    let table = include_str!("data/derived_passwords.tsv");
    let mut seen = BTreeSet::new();
    let mut rows = 0;
    for line in table.lines().filter(|l| !l.starts_with('#')) {
        let f: Vec<&str> = line.split('\t').collect();
        let (user, master, url, oracle) = (f[0], f[1], f[2], f[3]);
        let derived = derive_provider_password(user, master, url).unwrap();
        ensure!(
            derived.as_str() == oracle,
            "{user}@{url}: {} != {oracle}",
            derived.as_str()
        );
        ensure!(derived.as_str() != master, "{user}: derived equals master");
        ensure!(
            seen.insert(oracle.to_owned()),
            "{user}@{url}: duplicate derived password"
        );
        rows += 1;
    }
    ensure!(
        rows == 200,
        "expected 100 pairs x 2 urls, found {rows} rows"
    );
    Ok(())
}

// 5
fn key_splitting() -> Check {
    for n in 1..=5 {
        for _ in 0..200 {
            let k = generate_key().unwrap();
            let shares = split_key(&k, n).unwrap();
            ensure!(
                combine_key(&shares).unwrap() == k,
                "n = {n}: combine(split(k)) != k"
            );
        }
    }
    for trial in 0..1000 {
        let k = generate_key().unwrap();
        let shares = split_key(&k, 3).unwrap();
        // proper subsets of {0, 1, 2}, as bitmasks 0..7
        for mask in 0u8..7 {
            let mut acc = [0u8; 32];
            for (i, s) in shares.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    acc.iter_mut().zip(&s.bytes).for_each(|(a, b)| *a ^= b);
                }
            }
            ensure!(
                &acc != k.as_bytes(),
                "trial {trial}: subset {mask:03b} recovers k"
            );
        }
        let partial = [
            KeyShare {
                index: 0,
                bytes: shares[0].bytes,
            },
            KeyShare {
                index: 1,
                bytes: shares[1].bytes,
            },
        ];
        if let Ok(rebuilt) = combine_key(&partial) {
            ensure!(rebuilt != k, "trial {trial}: two shares rebuild k");
        }
    }
    Ok(())
}

// 6
fn revocation_and_purge() -> Check {
    let w = World::new(1);
    let alice = w.signup("alice");
    let bob = w.signup("bob");
    let content = random_bytes(&mut rng(6), 10_000);
    alice
        .upload_bytes("ledger.xlsx", &content, false)
        .map_err(|e| e.to_string())?;
    alice
        .share_file("ledger.xlsx", "bob", Permission::Read)
        .map_err(|e| e.to_string())?;
    ensure!(
        bob.download_bytes("ledger.xlsx").ok().as_deref() == Some(&content[..]),
        "grantee cannot read before revocation"
    );
    alice
        .unshare_file("ledger.xlsx", "bob")
        .map_err(|e| e.to_string())?;
    match bob.download_bytes("ledger.xlsx") {
        Err(GatewayError::AccessDenied(_)) => {}
        other => return Err(format!("after unshare: {other:?}")),
    }

    let before = w.dumps();
    let artifacts: Vec<Vec<u8>> = before
        .iter()
        .flat_map(|d| {
            d.objects
                .iter()
                .filter(|(k, _)| k.owner == "alice" && k.segments[0] != ".twincloud")
                .map(|(_, v)| v.clone())
                .collect::<Vec<_>>()
        })
        .collect();
    let paths: Vec<String> = before
        .iter()
        .flat_map(|d| d.path_strings())
        .filter(|p| !p.contains(".twincloud"))
        .collect();
    ensure!(
        artifacts.len() == 4,
        "expected 4 artifacts, found {}",
        artifacts.len()
    );
    alice
        .delete_file("ledger.xlsx")
        .map_err(|e| e.to_string())?;
    for (i, d) in w.dumps().iter().enumerate() {
        ensure!(d.trash.is_empty(), "provider {i} has trash entries");
        for a in &artifacts {
            ensure!(
                !d.contains_bytes(window(a, 0)),
                "provider {i} retains artifact bytes"
            );
        }
        for p in &paths {
            ensure!(
                !d.path_strings().contains(p),
                "provider {i} retains path {p}"
            );
        }
    }
    Ok(())
}

// 7
fn integrity() -> Check {
    let w = World::new(1);
    let alice = w.signup("alice");
    let content = random_bytes(&mut rng(7), 3000);
    alice
        .upload_bytes("contract.pdf", &content, false)
        .map_err(|e| e.to_string())?;
    let key = blob_key(&w, "alice", "contract.pdf");
    let len = stored_blob(&w, "alice", "contract.pdf").len();
    let dest = w.path("contract.pdf");
    let mut r = rng(77);
    let mut positions: Vec<usize> = vec![0, 15, 16, 17, len - 17, len - 16, len - 1];
    while positions.len() < 100 {
        positions.push(r.gen_range(0..len));
    }
    for pos in positions {
        let bit = 1u8 << r.gen_range(0..8);
        w.data().patch_object(&key, |b| b[pos] ^= bit).unwrap();
        match alice.download_file("contract.pdf", &dest) {
            Err(GatewayError::Integrity(_)) | Err(GatewayError::Format(_)) => {}
            other => return Err(format!("flip at byte {pos}: {other:?}")),
        }
        ensure!(!dest.exists(), "flip at byte {pos}: output file written");
        w.data().patch_object(&key, |b| b[pos] ^= bit).unwrap();
    }
    let fresh = w
        .gateway("alice")
        .login("alice", PASSWORD)
        .map_err(|e| e.to_string())?;
    fresh
        .download_file("contract.pdf", &dest)
        .map_err(|e| e.to_string())?;
    ensure!(
        std::fs::read(&dest).unwrap() == content,
        "clean download differs"
    );
    Ok(())
}

// 8
fn three_provider_placement() -> Check {
    let w = World::new(2);
    let alice = w.signup("alice");
    let bob = w.signup("bob");
    let mut r = rng(8);
    for i in 0..10 {
        let name = format!("report{i}");
        let content = random_bytes(&mut r, 100 + i * 997);
        alice
            .upload_bytes(&name, &content, false)
            .map_err(|e| e.to_string())?;
        alice
            .share_file(&name, "bob", Permission::Read)
            .map_err(|e| e.to_string())?;
        let got = bob.download_bytes(&name).map_err(|e| e.to_string())?;
        ensure!(got == content, "{name}: grantee round trip differs");
        let got = alice.download_bytes(&name).map_err(|e| e.to_string())?;
        ensure!(got == content, "{name}: owner round trip differs");
        let k = file_key(&w, "alice", &name);
        for (p, d) in w.dumps().iter().enumerate() {
            ensure!(
                !d.contains_bytes(k.as_bytes()),
                "{name}: provider {p} holds k"
            );
        }
    }
    Ok(())
}

// 9
fn staging_hygiene_under_faults() -> Check {
    let mut injected = 0;
    for k in 1..=2 {
        for provider in 0..=k {
            for phase in ["upload", "download"] {
                for n in 0.. {
                    let w = World::new(k);
                    let s = w.signup("alice");
                    if phase == "download" {
                        s.upload_bytes("scan.png", &[1u8; 5000], false).unwrap();
                    }
                    let tables = |w: &World| {
                        w.dumps()
                            .into_iter()
                            .map(|d| (d.objects, d.folders, d.acl, d.trash))
                            .collect::<Vec<_>>()
                    };
                    let before = tables(&w);
                    w.mocks[provider].fail_after(n);
                    let result = match phase {
                        "upload" => s.upload_bytes("scan.png", &[2u8; 5000], false).map(drop),
                        _ => s.download_file("scan.png", w.path("scan.png")),
                    };
                    let fired = !w.mocks[provider].fault_pending();
                    w.clear_faults();
                    let at = format!("K={k} provider {provider} {phase} call {n}");
                    ensure!(dir_is_empty(&w.staging("alice")), "{at}: staging not empty");
                    if !fired {
                        ensure!(result.is_ok(), "{at}: {result:?}");
                        break;
                    }
                    injected += 1;
                    ensure!(result.is_err(), "{at}: fault swallowed");
                    ensure!(before == tables(&w), "{at}: remote state changed");
                    ensure!(!w.path("scan.png").exists(), "{at}: partial output");
                }
            }
        }
    }
    ensure!(injected >= 20, "only {injected} fault points exercised");
    Ok(())
}

// 10
fn warm_login() -> Check {
    let w = World::new(1);
    w.cached_gateway("alice")
        .signup("alice", PASSWORD)
        .map_err(|e| e.to_string())?;
    w.cached_gateway("alice")
        .login("alice", PASSWORD)
        .map_err(|e| e.to_string())?;
    for m in &w.mocks {
        m.reset_counters();
    }
    let s = w
        .cached_gateway("alice")
        .login("alice", PASSWORD)
        .map_err(|e| e.to_string())?;
    for (i, m) in w.mocks.iter().enumerate() {
        let calls = m.call_count(Op::Authenticate) + m.call_count(Op::ExchangeCode);
        ensure!(
            calls == 0,
            "provider {i}: {calls} authenticate/exchange calls"
        );
    }
    s.upload_bytes("check", b"token still valid", false)
        .map_err(|e| e.to_string())?;
    Ok(())
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        (
            "end-to-end share of a 1 MiB file between two users",
            end_to_end_share,
        ),
        ("split-trust audit over 100 random files", split_trust_audit),
        (
            "CBC-AES-256, HMAC-SHA-256 vectors and envelope length law",
            crypto_conformance,
        ),
        (
            "derived password isolation against oracle table",
            password_isolation,
        ),
        (
            "XOR key splitting identity and subset secrecy",
            key_splitting,
        ),
        (
            "revocation denies access and delete purges everything",
            revocation_and_purge,
        ),
        ("single-bit tampering detected with no output", integrity),
        (
            "three-provider placement round trips, no provider holds k",
            three_provider_placement,
        ),
        (
            "staging empty and no orphans under injected faults",
            staging_hygiene_under_faults,
        ),
        ("warm token cache skips authentication", warm_login),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    let stdout = std::io::stdout();
    for (i, (title, check)) in criteria.iter().enumerate() {
        let n = i + 1;
        if !filter.is_empty() && !filter.iter().any(|f| title.contains(f.as_str())) {
            continue;
        }
        let started = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = started.elapsed().as_secs_f64();
        let mut out = stdout.lock();
        match outcome {
            Ok(()) => {
                let _ = writeln!(out, "criterion {n:>2} PASS  {title} ({secs:.2}s)");
            }
            Err(why) => {
                failed += 1;
                let _ = writeln!(out, "criterion {n:>2} FAIL  {title} ({secs:.2}s): {why}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
