use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use crate::provider::AccessToken;

/// Saved access tokens, one line per provider and user:
/// `provider-id TAB username TAB token`.
#[derive(Clone, Debug)]
pub struct TokenCache {
    path: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct Line {
    provider: String,
    username: String,
    token: String,
}

impl TokenCache {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        Self { path: path.into() }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    fn read_lines(&self) -> io::Result<Vec<Line>> {
        let text = match fs::read_to_string(&self.path) {
            Ok(t) => t,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(e),
        };
        Ok(text
            .lines()
            .filter_map(|l| {
                let mut f = l.split('\t');
                match (f.next(), f.next(), f.next(), f.next()) {
                    (Some(p), Some(u), Some(t), None) => Some(Line {
                        provider: p.to_owned(),
                        username: u.to_owned(),
                        token: t.to_owned(),
                    }),
                    _ => None,
                }
            })
            .collect())
    }

    pub fn lookup(&self, provider: &str, username: &str) -> io::Result<Option<AccessToken>> {
        Ok(self
            .read_lines()?
            .into_iter()
            .find(|l| l.provider == provider && l.username == username)
            .map(|l| AccessToken {
                opaque: l.token,
                username: l.username,
            }))
    }

    /// Replaces every line for `username` with the given provider tokens.
    pub fn store(&self, username: &str, tokens: &[(&str, &AccessToken)]) -> io::Result<()> {
        let mut lines = self.read_lines()?;
        lines.retain(|l| l.username != username);
        lines.extend(tokens.iter().map(|(p, t)| Line {
            provider: (*p).to_owned(),
            username: username.to_owned(),
            token: t.opaque.clone(),
        }));
        let mut text = String::new();
        for l in &lines {
            text.push_str(&format!("{}\t{}\t{}\n", l.provider, l.username, l.token));
        }
        let dir = match self.path.parent() {
            Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
            _ => PathBuf::from("."),
        };
        fs::create_dir_all(&dir)?;
        let mut tmp = tempfile::NamedTempFile::new_in(&dir)?;
        // tempfile creates with mode 0600 on unix
        tmp.write_all(text.as_bytes())?;
        tmp.as_file().sync_all()?;
        tmp.persist(&self.path).map_err(|e| e.error)?;
        Ok(())
    }

    pub fn forget(&self, username: &str) -> io::Result<()> {
        self.store(username, &[])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tok(s: &str, user: &str) -> AccessToken {
        AccessToken {
            opaque: s.into(),
            username: user.into(),
        }
    }

    #[test]
    fn store_and_lookup() {
        let dir = tempfile::tempdir().unwrap();
        let cache = TokenCache::new(dir.path().join("tokens"));
        assert_eq!(cache.lookup("keys", "alice").unwrap(), None);
        cache
            .store(
                "alice",
                &[("keys", &tok("t1", "alice")), ("data", &tok("t2", "alice"))],
            )
            .unwrap();
        cache.store("bob", &[("keys", &tok("t3", "bob"))]).unwrap();
        assert_eq!(
            cache.lookup("data", "alice").unwrap(),
            Some(tok("t2", "alice"))
        );
        assert_eq!(
            fs::read_to_string(cache.path()).unwrap(),
            "keys\talice\tt1\ndata\talice\tt2\nkeys\tbob\tt3\n"
        );
        cache.forget("alice").unwrap();
        assert_eq!(cache.lookup("keys", "alice").unwrap(), None);
        assert!(cache.lookup("keys", "bob").unwrap().is_some());
    }

    #[cfg(unix)]
    #[test]
    fn file_is_private() {
        use std::os::unix::fs::PermissionsExt;
        let dir = tempfile::tempdir().unwrap();
        let cache = TokenCache::new(dir.path().join("tokens"));
        cache
            .store("alice", &[("keys", &tok("t1", "alice"))])
            .unwrap();
        let mode = fs::metadata(cache.path()).unwrap().permissions().mode();
        assert_eq!(mode & 0o077, 0);
    }
}
