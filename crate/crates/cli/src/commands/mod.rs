//! Subcommand implementations and shared loading helpers.

pub mod ingest;
pub mod report;
pub mod simulate;
pub mod solve;
pub mod sweep;

use std::path::Path;

use regime_design_core::ingest::{default_profiles, BaselineEstimate, IngestConfig, Profile};
use regime_design_core::{Error, Instance, Result, ServicePlan};

pub(crate) fn load_instance(path: &Path) -> Result<Instance> {
    let text = std::fs::read_to_string(path)?;
    Instance::from_json(&text)
}

pub(crate) fn load_plan(path: &Path) -> Result<ServicePlan> {
    let text = std::fs::read_to_string(path)?;
    ServicePlan::from_json(&text)
}

pub(crate) fn load_baseline(path: &Path) -> Result<BaselineEstimate> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// Resolves a profile by name from the config (when given) or the shipped
/// defaults.
pub(crate) fn find_profile(name: &str, config: Option<&Path>) -> Result<Profile> {
    let profiles = match config {
        Some(path) => IngestConfig::from_path(path)?.effective_profiles(),
        None => default_profiles(),
    };
    profiles
        .iter()
        .find(|p| p.name == name)
        .cloned()
        .ok_or_else(|| Error::Precondition {
            message: format!(
                "unknown profile '{name}'; available: {}",
                profiles
                    .iter()
                    .map(|p| p.name.as_str())
                    .collect::<Vec<_>>()
                    .join(", ")
            ),
        })
}

pub(crate) fn ensure_out_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path)?;
    Ok(())
}

/// Filesystem-safe token for run directories and file stems.
pub(crate) fn slug(text: &str) -> String {
    text.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c.to_ascii_lowercase()
            } else {
                '_'
            }
        })
        .collect()
}
