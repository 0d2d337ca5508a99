use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

/// Local scratch area for key files and ciphertexts in transit.
#[derive(Clone, Debug)]
pub struct Staging {
    dir: PathBuf,
}

impl Staging {
    pub fn new(dir: impl Into<PathBuf>) -> io::Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn is_empty(&self) -> io::Result<bool> {
        Ok(fs::read_dir(&self.dir)?.next().is_none())
    }

    /// Writes `bytes` to a fresh file that is wiped and removed on drop.
    pub fn stage(&self, label: &str, bytes: &[u8]) -> io::Result<StagedFile> {
        let file = tempfile::Builder::new()
            .prefix(&format!("{label}-"))
            .suffix(".tmp")
            .tempfile_in(&self.dir)?;
        let (mut handle, path) = file.keep().map_err(|e| e.error)?;
        let mut staged = StagedFile { path, len: 0 };
        staged.len = bytes.len();
        handle.write_all(bytes)?;
        handle.sync_all()?;
        Ok(staged)
    }
}

pub struct StagedFile {
    path: PathBuf,
    len: usize,
}

impl StagedFile {
    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn read(&self) -> io::Result<Vec<u8>> {
        fs::read(&self.path)
    }
}

impl Drop for StagedFile {
    fn drop(&mut self) {
        // single overwrite pass, then unlink
        if let Ok(mut f) = OpenOptions::new().write(true).open(&self.path) {
            let _ = f
                .write_all(&vec![0u8; self.len])
                .and_then(|_| File::sync_all(&f));
        }
        let _ = fs::remove_file(&self.path);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn staged_files_vanish_on_drop() {
        let dir = tempfile::tempdir().unwrap();
        let staging = Staging::new(dir.path().join("stage")).unwrap();
        {
            let f = staging.stage("key", b"secret key bytes").unwrap();
            assert_eq!(f.read().unwrap(), b"secret key bytes");
            assert!(!staging.is_empty().unwrap());
        }
        assert!(staging.is_empty().unwrap());
    }

    #[test]
    fn drop_after_partial_failure_still_cleans() {
        let dir = tempfile::tempdir().unwrap();
        let staging = Staging::new(dir.path()).unwrap();
        let staged = staging.stage("x", b"").unwrap();
        let path = staged.path().to_path_buf();
        drop(staged);
        assert!(!path.exists());
    }
}
