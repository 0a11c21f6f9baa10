use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Value ranges `[lower, upper)` mapped to a level; a missing `upper` is
/// unbounded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub lower: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper: Option<f64>,
    pub code: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CodebookEntry {
    Categories(BTreeMap<String, u32>),
    Bands(Vec<Band>),
}

impl CodebookEntry {
    pub fn levels(&self) -> usize {
        match self {
            CodebookEntry::Categories(map) => map.len(),
            CodebookEntry::Bands(bands) => bands.len(),
        }
    }

    fn validate(&self, feature: &str) -> Result<()> {
        let mut codes: Vec<u32> = match self {
            CodebookEntry::Categories(map) => map.values().copied().collect(),
            CodebookEntry::Bands(bands) => {
                for b in bands {
                    if !b.lower.is_finite() || b.upper.is_some_and(|u| !(u > b.lower)) {
                        return Err(Error::invalid(format!("codebook `{feature}`: malformed band {b:?}")));
                    }
                }
                bands.iter().map(|b| b.code).collect()
            }
        };
        codes.sort_unstable();
        if codes.is_empty() || codes.iter().enumerate().any(|(i, c)| *c as usize != i) {
            return Err(Error::invalid(format!(
                "codebook `{feature}`: codes must be the consecutive integers 0..{}",
                codes.len()
            )));
        }
        Ok(())
    }
}

/// Level tables for the hierarchically coded features, keyed by CSV column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Codebook {
    entries: BTreeMap<String, CodebookEntry>,
}

impl Codebook {
    pub fn new(entries: BTreeMap<String, CodebookEntry>) -> Result<Self> {
        for (feature, entry) in &entries {
            entry.validate(feature)?;
        }
        Ok(Self { entries })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: BTreeMap<String, CodebookEntry> = serde_json::from_str(text).map_err(|source| Error::Json {
            context: "codebook".into(),
            source,
        })?;
        Self::new(raw)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Json { source, .. } => Error::Json {
                context: path.display().to_string(),
                source,
            },
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("codebook serializes")
    }

    pub fn entry(&self, feature: &str) -> Result<&CodebookEntry> {
        self.entries
            .get(feature)
            .ok_or_else(|| Error::invalid(format!("codebook has no entry for feature `{feature}`")))
    }

    pub fn features(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}

/// Level code of one raw value. Absent values stay absent so they end up in
/// the missing mask instead of silently becoming level 0.
pub fn encode_hierarchical(raw: Option<&str>, entry: &CodebookEntry) -> Result<Option<u32>> {
    let Some(raw) = raw.map(str::trim).filter(|s| !s.is_empty()) else {
        return Ok(None);
    };
    match entry {
        CodebookEntry::Categories(map) => map
            .get(raw)
            .copied()
            .map(Some)
            .ok_or_else(|| Error::invalid(format!("value `{raw}` is not a known category"))),
        CodebookEntry::Bands(bands) => {
            let x: f64 = raw
                .parse()
                .map_err(|_| Error::invalid(format!("value `{raw}` is not numeric")))?;
            bands
                .iter()
                .find(|b| x >= b.lower && b.upper.is_none_or(|u| x < u))
                .map(|b| Some(b.code))
                .ok_or_else(|| Error::invalid(format!("value `{raw}` falls in no band")))
        }
    }
}
