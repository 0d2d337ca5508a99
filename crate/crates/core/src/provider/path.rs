use std::fmt;

use super::{ProviderError, Result};

/// A slash-separated location inside a provider account.
///
/// Paths are relative to the caller's own namespace unless a namespace
/// owner is attached with [`RemotePath::in_namespace`], which is how a
/// grantee addresses entries shared with them.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RemotePath {
    namespace: Option<String>,
    segments: Vec<String>,
}

pub(crate) fn check_segment(seg: &str) -> Result<()> {
    if seg.is_empty() || seg == "." || seg == ".." {
        return Err(ProviderError::InvalidPath(format!("bad segment {seg:?}")));
    }
    if seg.chars().any(|c| c == '/' || c.is_control()) {
        return Err(ProviderError::InvalidPath(format!(
            "segment {seg:?} contains a separator or control character"
        )));
    }
    Ok(())
}

impl RemotePath {
    /// Parses `"/a/b"` (leading and trailing slashes optional).
    pub fn parse(text: &str) -> Result<Self> {
        let trimmed = text.trim_start_matches('/').trim_end_matches('/');
        if trimmed.is_empty() {
            return Err(ProviderError::InvalidPath("empty path".into()));
        }
        Self::from_segments(trimmed.split('/'))
    }

    pub fn from_segments<I, S>(segments: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let segments: Vec<String> = segments.into_iter().map(Into::into).collect();
        if segments.is_empty() {
            return Err(ProviderError::InvalidPath("empty path".into()));
        }
        for seg in &segments {
            check_segment(seg)?;
        }
        Ok(Self {
            namespace: None,
            segments,
        })
    }

    pub fn join(&self, segment: &str) -> Result<Self> {
        check_segment(segment)?;
        let mut out = self.clone();
        out.segments.push(segment.to_owned());
        Ok(out)
    }

    /// Same path, addressed inside `owner`'s account.
    pub fn in_namespace(mut self, owner: impl Into<String>) -> Self {
        self.namespace = Some(owner.into());
        self
    }

    /// Same path without a namespace qualifier.
    pub fn unqualified(&self) -> Self {
        Self {
            namespace: None,
            segments: self.segments.clone(),
        }
    }

    pub fn namespace(&self) -> Option<&str> {
        self.namespace.as_deref()
    }

    pub fn segments(&self) -> &[String] {
        &self.segments
    }

    pub fn name(&self) -> &str {
        self.segments.last().expect("paths are never empty")
    }

    pub fn parent_segments(&self) -> &[String] {
        &self.segments[..self.segments.len() - 1]
    }

    pub fn depth(&self) -> usize {
        self.segments.len()
    }
}

impl fmt::Display for RemotePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(owner) = &self.namespace {
            write!(f, "{owner}:")?;
        }
        for seg in &self.segments {
            write!(f, "/{seg}")?;
        }
        Ok(())
    }
}
