//! Remote naming conventions.

use crate::provider::{ProviderError, RemotePath};

pub const KEY_FOLDER_SUFFIX: &str = "_keyFolder";
pub const KEY_FILE_SUFFIX: &str = ".key";
pub const MAC_TAG_SUFFIX: &str = ".mac";
pub const MAC_KEY_SUFFIX: &str = ".mackey";
pub const META_FOLDER: &str = ".twincloud";
pub const NAME_KEY_FILE: &str = "namekey";

type Result<T> = std::result::Result<T, ProviderError>;

pub fn key_folder(token: &str) -> Result<RemotePath> {
    RemotePath::from_segments([format!("{token}{KEY_FOLDER_SUFFIX}")])
}

pub fn key_file(token: &str) -> Result<RemotePath> {
    key_folder(token)?.join(&format!("{token}{KEY_FILE_SUFFIX}"))
}

pub fn mac_tag(token: &str) -> Result<RemotePath> {
    key_folder(token)?.join(&format!("{token}{MAC_TAG_SUFFIX}"))
}

pub fn data_object(token: &str) -> Result<RemotePath> {
    RemotePath::from_segments([token])
}

pub fn mac_key(token: &str) -> Result<RemotePath> {
    RemotePath::from_segments([format!("{token}{MAC_KEY_SUFFIX}")])
}

pub fn meta_folder() -> RemotePath {
    RemotePath::from_segments([META_FOLDER]).expect("constant path")
}

pub fn name_key() -> RemotePath {
    meta_folder().join(NAME_KEY_FILE).expect("constant path")
}

/// Token of a key folder path `/<tok>_keyFolder/<tok>.key`, if it is one.
pub fn token_of_key_file(path: &RemotePath) -> Option<&str> {
    let [folder, file] = path.segments() else {
        return None;
    };
    let token = folder.strip_suffix(KEY_FOLDER_SUFFIX)?;
    (file.strip_suffix(KEY_FILE_SUFFIX)? == token).then_some(token)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_cloud_paths() {
        assert_eq!(key_folder("tok").unwrap().to_string(), "/tok_keyFolder");
        assert_eq!(
            key_file("tok").unwrap().to_string(),
            "/tok_keyFolder/tok.key"
        );
        assert_eq!(
            mac_tag("tok").unwrap().to_string(),
            "/tok_keyFolder/tok.mac"
        );
        assert_eq!(mac_key("d").unwrap().to_string(), "/d.mackey");
        assert_eq!(name_key().to_string(), "/.twincloud/namekey");
    }

    #[test]
    fn recognizes_key_files() {
        assert_eq!(token_of_key_file(&key_file("abc").unwrap()), Some("abc"));
        assert_eq!(token_of_key_file(&mac_tag("abc").unwrap()), None);
        assert_eq!(
            token_of_key_file(&RemotePath::parse("/a_keyFolder/b.key").unwrap()),
            None
        );
    }
}
