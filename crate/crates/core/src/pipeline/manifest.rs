use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{fsutil, Error, Result};

/// The ten recording classes of the crowdsourced corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassLabel {
    AsthmaBreath,
    AsthmaCough,
    AsthmaCoughBreath,
    CovidNegBreath,
    CovidNegCough,
    CovidCough,
    CovidBreath,
    HealthyBreath,
    HealthyCough,
    CovidCoughBreath,
}

impl ClassLabel {
    pub const ALL: [ClassLabel; 10] = [
        Self::AsthmaBreath,
        Self::AsthmaCough,
        Self::AsthmaCoughBreath,
        Self::CovidNegBreath,
        Self::CovidNegCough,
        Self::CovidCough,
        Self::CovidBreath,
        Self::HealthyBreath,
        Self::HealthyCough,
        Self::CovidCoughBreath,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::AsthmaBreath => "asthma_breath",
            Self::AsthmaCough => "asthma_cough",
            Self::AsthmaCoughBreath => "asthma_cough_breath",
            Self::CovidNegBreath => "covid_neg_breath",
            Self::CovidNegCough => "covid_neg_cough",
            Self::CovidCough => "covid_cough",
            Self::CovidBreath => "covid_breath",
            Self::HealthyBreath => "healthy_breath",
            Self::HealthyCough => "healthy_cough",
            Self::CovidCoughBreath => "covid_cough_breath",
        }
    }

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|&c| c == self).expect("listed")
    }

    pub fn has_cough(self) -> bool {
        self.as_str().contains("cough")
    }

    pub fn has_breath(self) -> bool {
        self.as_str().contains("breath")
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ClassLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::arg(format!("unknown class label {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            _ => Err(Error::arg(format!("unknown split {s:?} (expected train, val or test)"))),
        }
    }
}

/// One line of a manifest: a recording, its class and who recorded it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub label: ClassLabel,
    pub user_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<Split>,
}

impl ManifestEntry {
    /// The audio path, relative paths taken from `base`.
    pub fn resolve(&self, base: &Path) -> PathBuf {
        let p = Path::new(&self.path);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            base.join(p)
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEntry {
    path: String,
    label: String,
    user_id: String,
    #[serde(default)]
    split: Option<String>,
}

/// Parses JSON-lines manifest text. Blank lines are skipped; errors name
/// the 1-based line.
pub fn parse_manifest(text: &str) -> Result<Vec<ManifestEntry>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |message: String| Error::Validation { line: line_no, message };
        let raw: RawEntry = serde_json::from_str(line).map_err(|e| bad(e.to_string()))?;
        let label = raw.label.parse().map_err(|_| bad(format!("unknown label {:?}", raw.label)))?;
        let split = raw.split.map(|s| s.parse()).transpose().map_err(|e: Error| bad(e.to_string()))?;
        if raw.path.trim().is_empty() {
            return Err(bad("empty path".into()));
        }
        if raw.user_id.trim().is_empty() {
            return Err(bad("empty user_id".into()));
        }
        if !seen.insert(raw.path.clone()) {
            return Err(bad(format!("duplicate path {:?}", raw.path)));
        }
        out.push(ManifestEntry {
            path: raw.path,
            label,
            user_id: raw.user_id,
            split,
        });
    }
    Ok(out)
}

pub fn load_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_manifest(&text)
}

pub fn manifest_to_string(entries: &[ManifestEntry]) -> String {
    entries
        .iter()
        .map(|e| serde_json::to_string(e).expect("manifest entries serialize") + "\n")
        .collect()
}

pub fn write_manifest(path: &Path, entries: &[ManifestEntry]) -> Result<()> {
    fsutil::write_atomic(path, manifest_to_string(entries).as_bytes())
}
