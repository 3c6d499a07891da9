//! Configuration files (JSON or TOML). Every field is optional; values given
//! on the command line take precedence.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use stroke_core::classifiers::ModelKind;
use stroke_core::metrics::MetricsMode;
use stroke_core::stats::Chads2Config;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub input: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub runs: Option<usize>,
    pub train_fraction: Option<f64>,
    pub stratified: Option<bool>,
    /// Family plus hyperparameters, e.g. `{ family = "mlp", hidden = 16 }`.
    pub model: Option<ModelKind>,
    pub features: Option<String>,
    pub metrics_mode: Option<MetricsMode>,
    pub balanced: Option<bool>,
    pub pca_global: Option<bool>,
    pub threads: Option<usize>,
    pub bin_width: Option<f64>,
    pub loading_threshold: Option<f64>,
    pub chads2: Option<Chads2Config>,
}

impl FileConfig {
    /// Parses by extension: `.toml` as TOML, anything else as JSON.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        let is_toml = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("toml"));
        let cfg = if is_toml {
            toml::from_str(&text).with_context(|| format!("invalid TOML in {}", path.display()))?
        } else {
            serde_json::from_str(&text).with_context(|| format!("invalid JSON in {}", path.display()))?
        };
        Ok(cfg)
    }

    pub fn parse_str(text: &str, toml_syntax: bool) -> Result<Self> {
        if toml_syntax {
            Ok(toml::from_str(text)?)
        } else {
            Ok(serde_json::from_str(text)?)
        }
    }
}

/// First present value: flag, then file, then default.
pub fn layer<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

pub fn require_positive(name: &str, v: usize) -> Result<usize> {
    if v == 0 {
        bail!("--{name} must be at least 1");
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use stroke_core::classifiers::MlpConfig;

    #[test]
    fn toml_and_json_agree() {
        let toml_text = r#"
seed = 7
runs = 10
features = "top4"
metrics_mode = "macro"

[model]
family = "mlp"
hidden = 16
"#;
        let json_text = r#"{"seed": 7, "runs": 10, "features": "top4", "metrics_mode": "macro",
            "model": {"family": "mlp", "hidden": 16}}"#;
        let a = FileConfig::parse_str(toml_text, true).unwrap();
        let b = FileConfig::parse_str(json_text, false).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.model, Some(ModelKind::Mlp(MlpConfig { hidden: 16, ..MlpConfig::default() })));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(FileConfig::parse_str(r#"{"sed": 1}"#, false).is_err());
    }

    #[test]
    fn flags_win() {
        assert_eq!(layer(Some(1), Some(2), 3), 1);
        assert_eq!(layer(None, Some(2), 3), 2);
        assert_eq!(layer(None::<u8>, None, 3), 3);
    }
}
