use std::path::Path;

use anyhow::{Context, Result};
use twig_core::harness::ExperimentConfig;

/// Reads a configuration file; `.json` is parsed as JSON, anything else as TOML.
pub fn load(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let config = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
    } else {
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
    };
    Ok(config)
}
