//! Channel-to-scalp-site mapping.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::CHANNELS;

pub const DEFAULT_LABELS: [&str; CHANNELS] = ["F7", "Fz", "F8", "C3", "C4", "T5", "Pz", "T6"];

#[derive(Debug, Error, PartialEq)]
pub enum MontageError {
    #[error("montage needs {CHANNELS} labels, got {0}")]
    Count(usize),
    #[error("duplicate montage label {0:?}")]
    Duplicate(String),
    #[error("unknown electrode label {0:?}")]
    UnknownLabel(String),
}

/// The 10-20 site recorded by each hardware channel.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct Montage {
    labels: Vec<String>,
}

impl Default for Montage {
    fn default() -> Self {
        Montage {
            labels: DEFAULT_LABELS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl Montage {
    pub fn new<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Result<Self, MontageError> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.len() != CHANNELS {
            return Err(MontageError::Count(labels.len()));
        }
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].iter().any(|o| o.eq_ignore_ascii_case(l)) {
                return Err(MontageError::Duplicate(l.clone()));
            }
        }
        Ok(Montage { labels })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, ch: usize) -> &str {
        &self.labels[ch]
    }

    pub fn index_of(&self, label: &str) -> Result<usize, MontageError> {
        self.labels
            .iter()
            .position(|l| l.eq_ignore_ascii_case(label))
            .ok_or_else(|| MontageError::UnknownLabel(label.to_string()))
    }

    /// Resolve a list like `["Fz", "Pz"]`; `"all"` or an empty list selects every channel.
    pub fn select(&self, labels: &[String]) -> Result<Vec<usize>, MontageError> {
        if labels.is_empty() || labels.iter().any(|l| l.eq_ignore_ascii_case("all")) {
            return Ok((0..CHANNELS).collect());
        }
        let mut out = labels
            .iter()
            .map(|l| self.index_of(l))
            .collect::<Result<Vec<_>, _>>()?;
        out.sort_unstable();
        out.dedup();
        Ok(out)
    }
}

impl TryFrom<Vec<String>> for Montage {
    type Error = MontageError;

    fn try_from(v: Vec<String>) -> Result<Self, Self::Error> {
        Montage::new(v)
    }
}

impl From<Montage> for Vec<String> {
    fn from(m: Montage) -> Self {
        m.labels
    }
}
