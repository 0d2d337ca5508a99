use std::collections::BTreeSet;

use super::{GatewayError, Result};

/// Which providers hold key shares and which one holds ciphertext.
///
/// Provider order matters: key providers come first, in the listed order,
/// followed by the data provider. Name keys are placed around that ring.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlacementPolicy {
    pub key_providers: Vec<String>,
    pub data_provider: String,
}

impl PlacementPolicy {
    pub fn new<I, S>(key_providers: I, data_provider: impl Into<String>) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let policy = Self {
            key_providers: key_providers.into_iter().map(Into::into).collect(),
            data_provider: data_provider.into(),
        };
        policy.validate()?;
        Ok(policy)
    }

    /// Two-provider placement: one key cloud, one data cloud.
    pub fn pair(key_provider: impl Into<String>, data_provider: impl Into<String>) -> Result<Self> {
        Self::new([key_provider.into()], data_provider)
    }

    pub fn validate(&self) -> Result<()> {
        if self.key_providers.is_empty() {
            return Err(GatewayError::Invalid(
                "placement needs at least one key provider".into(),
            ));
        }
        let mut seen = BTreeSet::new();
        for id in self.ring() {
            if id.is_empty() {
                return Err(GatewayError::Invalid(
                    "empty provider id in placement".into(),
                ));
            }
            if !seen.insert(id) {
                return Err(GatewayError::Invalid(format!(
                    "provider {id} appears more than once in placement"
                )));
            }
        }
        Ok(())
    }

    pub fn key_count(&self) -> usize {
        self.key_providers.len()
    }

    pub fn provider_count(&self) -> usize {
        self.key_providers.len() + 1
    }

    /// Key providers in order, then the data provider.
    pub fn ring(&self) -> impl Iterator<Item = &str> {
        self.key_providers
            .iter()
            .map(String::as_str)
            .chain(std::iter::once(self.data_provider.as_str()))
    }

    /// Index of the provider storing the name key used on provider `i`.
    pub fn name_key_holder(&self, i: usize) -> usize {
        (i + 1) % self.provider_count()
    }

    /// Index of the provider whose name key is stored on provider `i`.
    pub fn name_key_stored_on(&self, i: usize) -> usize {
        (i + self.provider_count() - 1) % self.provider_count()
    }
}
