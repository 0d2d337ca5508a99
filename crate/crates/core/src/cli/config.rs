use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::gateway::PlacementPolicy;
use crate::provider::ProviderConfig;

/// File name looked up under the user's configuration directory when
/// neither `--config` nor `TWINCLOUD_CONFIG` is given.
pub const DEFAULT_CONFIG_FILE: &str = "twincloud/config.toml";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("no configuration file found (tried {0})")]
    Missing(String),
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Syntax { path: PathBuf, message: String },
    #[error("invalid `{field}`: {message}")]
    Invalid { field: String, message: String },
}

fn invalid(field: impl Into<String>, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.into(),
        message: message.into(),
    }
}

/// Providers, placement, and local paths for the command-line client.
#[derive(Clone, Debug)]
pub struct CliConfig {
    pub providers: Vec<ProviderConfig>,
    pub placement: PlacementPolicy,
    pub staging_dir: PathBuf,
    pub token_cache: PathBuf,
    pub default_dest: PathBuf,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    staging_dir: String,
    token_cache: String,
    #[serde(default = "current_dir")]
    default_dest: String,
    #[serde(default, rename = "provider")]
    providers: Vec<RawProvider>,
    placement: RawPlacement,
}

fn current_dir() -> String {
    ".".into()
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProvider {
    id: String,
    url: String,
    #[serde(default = "yes")]
    file_sharing: bool,
    root: String,
}

fn yes() -> bool {
    true
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPlacement {
    key_providers: String,
    data_provider: String,
}

/// Where to look for the configuration, in priority order.
pub fn config_candidates(
    flag: Option<&Path>,
    env_var: Option<&Path>,
    config_home: Option<&Path>,
) -> Vec<PathBuf> {
    if let Some(p) = flag {
        return vec![p.to_path_buf()];
    }
    if let Some(p) = env_var {
        return vec![p.to_path_buf()];
    }
    config_home
        .map(|h| vec![h.join(DEFAULT_CONFIG_FILE)])
        .unwrap_or_default()
}

/// Loads the first existing candidate.
pub fn load_config(candidates: &[PathBuf]) -> Result<CliConfig, ConfigError> {
    let path = candidates.iter().find(|p| p.exists()).ok_or_else(|| {
        let tried: Vec<String> = candidates.iter().map(|p| p.display().to_string()).collect();
        ConfigError::Missing(if tried.is_empty() {
            "no candidate paths".into()
        } else {
            tried.join(", ")
        })
    })?;
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.clone(),
        source,
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_config(&text, base).map_err(|e| match e {
        ConfigError::Syntax { message, .. } => ConfigError::Syntax {
            path: path.clone(),
            message,
        },
        other => other,
    })
}

/// Parses config text. Relative paths are resolved against `base`.
pub fn parse_config(text: &str, base: &Path) -> Result<CliConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Syntax {
        path: PathBuf::new(),
        message: e.message().to_owned(),
    })?;
    let resolve = |field: &str, p: &str| -> Result<PathBuf, ConfigError> {
        if p.trim().is_empty() {
            return Err(invalid(field, "must not be empty"));
        }
        Ok(base.join(p))
    };

    let mut providers = Vec::with_capacity(raw.providers.len());
    let mut ids = BTreeMap::new();
    for (n, p) in raw.providers.into_iter().enumerate() {
        let field = |f: &str| format!("provider[{n}].{f}");
        let mut config = ProviderConfig::new(p.id.clone(), p.url).file_sharing(p.file_sharing);
        if p.root != "memory" {
            config = config.persist_at(resolve(&field("root"), &p.root)?);
        }
        config
            .validate()
            .map_err(|e| invalid(field("id/url"), e.to_string()))?;
        if ids.insert(p.id.clone(), n).is_some() {
            return Err(invalid(
                field("id"),
                format!("duplicate provider id {}", p.id),
            ));
        }
        providers.push(config);
    }

    let key_providers: Vec<String> = raw
        .placement
        .key_providers
        .split(',')
        .map(|s| s.trim().to_owned())
        .filter(|s| !s.is_empty())
        .collect();
    if key_providers.is_empty() {
        return Err(invalid(
            "placement.key_providers",
            "needs at least one provider id",
        ));
    }
    for id in &key_providers {
        if !ids.contains_key(id) {
            return Err(invalid(
                "placement.key_providers",
                format!("unknown provider id {id}"),
            ));
        }
    }
    let data_provider = raw.placement.data_provider.trim().to_owned();
    if !ids.contains_key(&data_provider) {
        return Err(invalid(
            "placement.data_provider",
            format!("unknown provider id {data_provider}"),
        ));
    }
    let placement = PlacementPolicy::new(key_providers, data_provider)
        .map_err(|e| invalid("placement", e.to_string()))?;

    let staging_dir = resolve("staging_dir", &raw.staging_dir)?;
    let token_cache = resolve("token_cache", &raw.token_cache)?;
    let default_dest = resolve("default_dest", &raw.default_dest)?;
    if same_dir(&staging_dir, &default_dest) {
        return Err(invalid("staging_dir", "must differ from default_dest"));
    }
    let roots: BTreeSet<&Path> = providers
        .iter()
        .filter_map(|p| p.persistence_root.as_deref())
        .collect();
    if roots.len()
        != providers
            .iter()
            .filter(|p| p.persistence_root.is_some())
            .count()
    {
        return Err(invalid(
            "provider.root",
            "two providers share a root directory",
        ));
    }

    Ok(CliConfig {
        providers,
        placement,
        staging_dir,
        token_cache,
        default_dest,
    })
}

fn same_dir(a: &Path, b: &Path) -> bool {
    match (a.canonicalize(), b.canonicalize()) {
        (Ok(a), Ok(b)) => a == b,
        _ => normalize(a) == normalize(b),
    }
}

fn normalize(p: &Path) -> Vec<std::path::Component<'_>> {
    p.components()
        .filter(|c| !matches!(c, std::path::Component::CurDir))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO: &str = r#"
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
root = "memory"

[placement]
key_providers = "dropbox"
data_provider = "gdrive"
"#;

    #[test]
    fn two_provider_config() {
        let c = parse_config(TWO, Path::new("/etc/twc")).unwrap();
        assert_eq!(c.placement.key_count(), 1);
        assert_eq!(c.providers.len(), 2);
        assert!(!c.providers[0].supports_file_sharing);
        assert!(c.providers[1].supports_file_sharing);
        assert_eq!(
            c.providers[0].persistence_root.as_deref(),
            Some(Path::new("/etc/twc/clouds/dropbox"))
        );
        assert_eq!(c.providers[1].persistence_root, None);
        assert_eq!(c.staging_dir, Path::new("/etc/twc/staging"));
    }

    #[test]
    fn three_provider_config() {
        let text = TWO.replace(
            "[placement]",
            "[[provider]]\nid = \"box\"\nurl = \"https://box.example\"\nroot = \"memory\"\n\n[placement]",
        )
        .replace("key_providers = \"dropbox\"", "key_providers = \"dropbox, box\"");
        let c = parse_config(&text, Path::new("/x")).unwrap();
        assert_eq!(c.placement.key_providers, ["dropbox", "box"]);
    }

    #[test]
    fn unknown_provider_is_named() {
        let text = TWO.replace("data_provider = \"gdrive\"", "data_provider = \"onedrive\"");
        let err = parse_config(&text, Path::new("/x"))
            .unwrap_err()
            .to_string();
        assert!(err.contains("onedrive"), "{err}");
        assert!(err.contains("placement.data_provider"), "{err}");
        let text = TWO.replace(
            "key_providers = \"dropbox\"",
            "key_providers = \"dropbox,s3\"",
        );
        let err = parse_config(&text, Path::new("/x"))
            .unwrap_err()
            .to_string();
        assert!(err.contains("s3"), "{err}");
    }

    #[test]
    fn rejected_configs() {
        let cases = [
            TWO.replace("default_dest = \"downloads\"", "default_dest = \"staging\""),
            TWO.replace("id = \"gdrive\"", "id = \"dropbox\""),
            TWO.replace("url = \"https://drive.example\"", "url = \"\""),
            TWO.replace("data_provider = \"gdrive\"", "data_provider = \"dropbox\""),
            TWO.replace("key_providers = \"dropbox\"", "key_providers = \" , \""),
            TWO.replace("file_sharing = false", "file_sharing = \"no\""),
            TWO.replace("[placement]", "[placement]\nextra = 1"),
            TWO.replace("staging_dir = \"staging\"", ""),
            "not = [valid".to_owned(),
        ];
        for text in cases {
            assert!(parse_config(&text, Path::new("/x")).is_err(), "{text}");
        }
    }

    #[test]
    fn candidate_order() {
        let flag = Path::new("/a.toml");
        let env = Path::new("/b.toml");
        let home = Path::new("/home/u/.config");
        assert_eq!(config_candidates(Some(flag), Some(env), Some(home)), [flag]);
        assert_eq!(config_candidates(None, Some(env), Some(home)), [env]);
        assert_eq!(
            config_candidates(None, None, Some(home)),
            [home.join(DEFAULT_CONFIG_FILE)]
        );
        let err = load_config(&[PathBuf::from("/definitely/not/here.toml")]).unwrap_err();
        assert!(matches!(err, ConfigError::Missing(_)));
    }
}
