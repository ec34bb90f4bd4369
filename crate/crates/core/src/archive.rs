//! JSON archive of a (multivariate) decomposition. Floats round-trip
//! exactly, so archives can be compared byte for byte across runs.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::memd::{MemdError, MultivariateDecomposition};
use crate::signal_core::{Decomposition, DecompositionMeta, SignalError};

pub const ARCHIVE_FORMAT: &str = "hht-motion/decomposition";
pub const ARCHIVE_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ArchiveError {
    #[error("malformed archive: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported archive {format:?} version {version}")]
    Unsupported { format: String, version: u32 },
    #[error(transparent)]
    Shape(#[from] MemdError),
    #[error(transparent)]
    Signal(#[from] SignalError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchiveChannel {
    pub label: String,
    pub imfs: Vec<Vec<f64>>,
    pub trend: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Archive {
    pub format: String,
    pub version: u32,
    pub rate: f64,
    pub meta: DecompositionMeta,
    pub channels: Vec<ArchiveChannel>,
}

impl Archive {
    pub fn from_multivariate(md: &MultivariateDecomposition) -> Self {
        Self {
            format: ARCHIVE_FORMAT.into(),
            version: ARCHIVE_VERSION,
            rate: md.rate(),
            meta: md.meta.clone(),
            channels: md
                .per_channel
                .iter()
                .zip(&md.labels)
                .map(|(d, label)| ArchiveChannel { label: label.clone(), imfs: d.imfs.clone(), trend: d.trend.clone() })
                .collect(),
        }
    }

    pub fn from_decomposition(d: &Decomposition, label: &str) -> Self {
        Self {
            format: ARCHIVE_FORMAT.into(),
            version: ARCHIVE_VERSION,
            rate: d.rate,
            meta: d.meta.clone(),
            channels: vec![ArchiveChannel { label: label.into(), imfs: d.imfs.clone(), trend: d.trend.clone() }],
        }
    }

    pub fn to_multivariate(&self) -> Result<MultivariateDecomposition, ArchiveError> {
        let per_channel = self
            .channels
            .iter()
            .map(|c| Decomposition::new(c.imfs.clone(), c.trend.clone(), self.rate, self.meta.clone()))
            .collect::<Result<Vec<_>, _>>()?;
        let labels = self.channels.iter().map(|c| c.label.clone()).collect();
        Ok(MultivariateDecomposition::new(per_channel, labels, self.meta.clone())?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("archive values are finite")
    }

    pub fn from_json(text: &str) -> Result<Self, ArchiveError> {
        let archive: Self = serde_json::from_str(text)?;
        if archive.format != ARCHIVE_FORMAT || archive.version != ARCHIVE_VERSION {
            return Err(ArchiveError::Unsupported { format: archive.format, version: archive.version });
        }
        Ok(archive)
    }
}
