//! The split-trust protocol engine.
//!
//! A [`Gateway`] knows the providers and their roles. Signing up or logging
//! in yields a [`Session`], which performs the user-level file operations:
//! every file gets a fresh key, the ciphertext goes to the data provider,
//! the key (or its XOR shares) goes to the key provider(s), and sharing is
//! done purely with provider grants.

mod layout;
mod placement;
mod record;
mod session;
mod staging;
mod token_cache;
mod undo;

pub use layout::{
    KEY_FILE_SUFFIX, KEY_FOLDER_SUFFIX, MAC_KEY_SUFFIX, MAC_TAG_SUFFIX, META_FOLDER, NAME_KEY_FILE,
};
pub use placement::PlacementPolicy;
pub use record::{KeyFileRecord, RECORD_MAGIC, RECORD_VERSION};
pub use session::{LogicalEntry, Session, SyncReport};
pub use staging::Staging;
pub use token_cache::TokenCache;

use std::io;
use std::path::PathBuf;
use std::sync::Arc;

use thiserror::Error;

use crate::crypto::{derive_provider_password, CryptoError, NameKeyPair};
use crate::provider::{AccessToken, CloudProvider, ProviderError};

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("not found: {0}")]
    NotFound(String),
    #[error("already exists: {0}")]
    Conflict(String),
    #[error("access denied: {0}")]
    AccessDenied(String),
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("malformed data: {0}")]
    Format(String),
    #[error("integrity check failed: {0}")]
    Integrity(String),
    #[error("unsupported by provider: {0}")]
    Capability(String),
    #[error("password policy: {0}")]
    Policy(String),
    #[error("provider unavailable: {0}")]
    Unavailable(String),
    #[error("invalid request: {0}")]
    Invalid(String),
    #[error("local i/o: {0}")]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, GatewayError>;

impl GatewayError {
    /// Wraps a provider error, tagging the message with the provider id.
    pub(crate) fn from_provider(provider: &str, err: ProviderError) -> Self {
        let at = |m: String| format!("{provider}: {m}");
        match err {
            ProviderError::Auth(m) => GatewayError::Auth(at(m)),
            ProviderError::NotFound(m) => GatewayError::NotFound(at(m)),
            ProviderError::AccessDenied(m) => GatewayError::AccessDenied(at(m)),
            ProviderError::Conflict(m) => GatewayError::Conflict(at(m)),
            ProviderError::Policy(m) => GatewayError::Policy(at(m)),
            ProviderError::Capability(m) => GatewayError::Capability(at(m)),
            ProviderError::Unavailable(m) => GatewayError::Unavailable(at(m)),
            ProviderError::Io(m) => GatewayError::Unavailable(at(m)),
            ProviderError::InvalidPath(m)
            | ProviderError::Invalid(m)
            | ProviderError::InvalidConfig(m) => GatewayError::Invalid(at(m)),
        }
    }
}

impl From<CryptoError> for GatewayError {
    fn from(e: CryptoError) -> Self {
        match e {
            CryptoError::Format(_) | CryptoError::Length { .. } | CryptoError::Shares(_) => {
                GatewayError::Format(e.to_string())
            }
            CryptoError::NameTooLong(..) | CryptoError::Empty(_) => {
                GatewayError::Invalid(e.to_string())
            }
            CryptoError::Randomness(_) => GatewayError::Unavailable(e.to_string()),
        }
    }
}

pub(crate) type Remote = Arc<dyn CloudProvider>;

/// Providers arranged by a placement, plus local paths for staging and the
/// token cache.
pub struct Gateway {
    providers: Vec<Remote>,
    placement: PlacementPolicy,
    staging_dir: PathBuf,
    token_cache: Option<TokenCache>,
}

impl Gateway {
    /// `providers` may come in any order; each placement id must match
    /// exactly one of them.
    pub fn new(
        providers: impl IntoIterator<Item = Remote>,
        placement: PlacementPolicy,
        staging_dir: impl Into<PathBuf>,
    ) -> Result<Self> {
        placement.validate()?;
        let mut pool: Vec<Remote> = providers.into_iter().collect();
        let mut ordered = Vec::with_capacity(placement.provider_count());
        for id in placement.ring() {
            let pos = pool.iter().position(|p| p.id() == id).ok_or_else(|| {
                GatewayError::Invalid(format!("placement names unknown provider {id}"))
            })?;
            ordered.push(pool.swap_remove(pos));
        }
        if let Some(extra) = pool.first() {
            return Err(GatewayError::Invalid(format!(
                "provider {} is not part of the placement",
                extra.id()
            )));
        }
        Ok(Self {
            providers: ordered,
            placement,
            staging_dir: staging_dir.into(),
            token_cache: None,
        })
    }

    pub fn with_token_cache(mut self, path: impl Into<PathBuf>) -> Self {
        self.token_cache = Some(TokenCache::new(path));
        self
    }

    pub fn placement(&self) -> &PlacementPolicy {
        &self.placement
    }

    /// Creates an account on every provider with its own derived password,
    /// distributes fresh name keys around the provider ring, and logs in.
    ///
    /// Fails without leaving any account behind if any provider refuses.
    pub fn signup(&self, username: &str, password: &str) -> Result<Session> {
        check_credentials(username, password)?;
        let mut created: Vec<Option<AccessToken>> = Vec::with_capacity(self.providers.len());
        match self.signup_steps(username, password, &mut created) {
            Ok(name_keys) => {
                let tokens = created
                    .into_iter()
                    .map(|t| t.expect("all logged in"))
                    .collect();
                self.open_session(username, tokens, name_keys)
            }
            Err(err) => {
                for (p, token) in self.providers.iter().zip(created) {
                    let token = token.or_else(|| self.full_login(p, username, password).ok());
                    if let Some(t) = token {
                        let _ = p.delete_account(&t);
                    }
                }
                Err(err)
            }
        }
    }

    /// Pushes one slot per provider whose account was created, holding the
    /// token once login there succeeded.
    fn signup_steps(
        &self,
        username: &str,
        password: &str,
        created: &mut Vec<Option<AccessToken>>,
    ) -> Result<Vec<NameKeyPair>> {
        for p in &self.providers {
            let derived = derive_provider_password(username, password, &p.config().url)?;
            p.create_account(username, &derived)
                .map_err(|e| GatewayError::from_provider(p.id(), e))?;
            created.push(None);
            let token = self.full_login(p, username, password)?;
            *created.last_mut().expect("just pushed") = Some(token);
        }
        let tokens: Vec<&AccessToken> = created.iter().flatten().collect();
        let name_keys = (0..self.providers.len())
            .map(|_| NameKeyPair::generate())
            .collect::<std::result::Result<Vec<_>, _>>()?;
        for (i, nk) in name_keys.iter().enumerate() {
            let holder = self.placement.name_key_holder(i);
            let p = &self.providers[holder];
            let remote = |e| GatewayError::from_provider(p.id(), e);
            let tok = tokens[holder];
            p.create_folder(tok, &layout::meta_folder())
                .map_err(remote)?;
            p.upload_object(tok, &layout::name_key(), &nk.to_bytes(), false)
                .map_err(remote)?;
        }
        Ok(name_keys)
    }

    fn full_login(&self, p: &Remote, username: &str, password: &str) -> Result<AccessToken> {
        let derived = derive_provider_password(username, password, &p.config().url)?;
        p.authenticate(username, &derived)
            .and_then(|code| p.exchange_code(&code))
            .map_err(|e| GatewayError::from_provider(p.id(), e))
    }

    /// Obtains an access token for every provider and loads the name keys.
    ///
    /// Tokens found in the token cache are reused when the provider still
    /// accepts them; otherwise the full authenticate/exchange flow runs.
    pub fn login(&self, username: &str, password: &str) -> Result<Session> {
        check_credentials(username, password)?;
        let mut tokens = Vec::with_capacity(self.providers.len());
        for p in &self.providers {
            let cached = match &self.token_cache {
                Some(cache) => cache.lookup(p.id(), username)?,
                None => None,
            };
            let token = match cached {
                Some(t) if p.whoami(&t).is_ok_and(|u| u == username) => t,
                _ => self.full_login(p, username, password)?,
            };
            tokens.push(token);
        }
        let mut name_keys = Vec::with_capacity(self.providers.len());
        for i in 0..self.providers.len() {
            let holder = self.placement.name_key_holder(i);
            let p = &self.providers[holder];
            let bytes = p
                .download_object(&tokens[holder], &layout::name_key())
                .map_err(|e| GatewayError::from_provider(p.id(), e))?;
            name_keys.push(NameKeyPair::from_bytes(&bytes)?);
        }
        self.open_session(username, tokens, name_keys)
    }

    fn open_session(
        &self,
        username: &str,
        tokens: Vec<AccessToken>,
        name_keys: Vec<NameKeyPair>,
    ) -> Result<Session> {
        if let Some(cache) = &self.token_cache {
            let entries: Vec<(&str, &AccessToken)> = self
                .providers
                .iter()
                .map(|p| p.id())
                .zip(tokens.iter())
                .collect();
            cache.store(username, &entries)?;
        }
        Ok(Session::new(
            username.to_owned(),
            self.providers.clone(),
            self.placement.clone(),
            tokens,
            name_keys,
            Staging::new(&self.staging_dir)?,
        ))
    }
}

fn check_credentials(username: &str, password: &str) -> Result<()> {
    if username.is_empty() || password.is_empty() {
        return Err(GatewayError::Invalid(
            "username and password are required".into(),
        ));
    }
    Ok(())
}
