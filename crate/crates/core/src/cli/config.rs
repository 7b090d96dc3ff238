//! Run configuration file.
//!
//! A TOML document of top-level keys, all optional. Command-line flags take
//! precedence over the file, and the file over built-in defaults:
//!
//! ```toml
//! seed = 20210611
//! manifest = "corpus/manifest.jsonl"
//! audio_root = "corpus"
//! out = "runs/task1"
//! ddae_checkpoint = "runs/ddae.ckpt"
//! checkpoint = "runs/task1/classifier.ckpt"
//! features = "ddae"
//! profile = "paper"
//! task = 1
//! epochs = 66
//! batch_size = 32
//! learning_rate = 0.001
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::features::FeatureKind;
use crate::neuralnet::ModelConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub manifest: Option<PathBuf>,
    /// Directory that manifest paths are relative to; defaults to the
    /// manifest's own directory.
    pub audio_root: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub ddae_checkpoint: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub features: Option<FeatureKind>,
    pub profile: Option<String>,
    pub task: Option<u32>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub learning_rate: Option<f64>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::arg(format!("run config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::arg(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Argument(m) => Error::Argument(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(p) = &self.profile {
            ModelConfig::profile(p)?;
        }
        if self.batch_size == Some(0) {
            return Err(Error::arg("batch_size must be positive"));
        }
        if let Some(lr) = self.learning_rate {
            if !(lr > 0.0 && lr.is_finite()) {
                return Err(Error::arg(format!("learning_rate {lr} must be positive")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn documented_example_parses() {
        let doc = include_str!("config.rs")
            .lines()
            .skip_while(|l| !l.starts_with("//! ```toml"))
            .skip(1)
            .take_while(|l| !l.starts_with("//! ```"))
            .map(|l| l.trim_start_matches("//!").trim_start())
            .collect::<Vec<_>>()
            .join("\n");
        let cfg = RunConfig::parse(&doc).unwrap();
        assert_eq!(cfg.features, Some(FeatureKind::Ddae));
        assert_eq!(cfg.task, Some(1));
        assert_eq!(cfg.epochs, Some(66));
    }

    #[test]
    fn rejects_unknown_keys_and_profiles() {
        assert!(matches!(RunConfig::parse("epoch = 3"), Err(Error::Argument(_))));
        assert!(matches!(RunConfig::parse("profile = \"vgg\""), Err(Error::Argument(_))));
        assert_eq!(RunConfig::parse("").unwrap(), RunConfig::default());
    }
}
