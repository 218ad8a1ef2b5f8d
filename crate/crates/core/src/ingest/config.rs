//! TOML run configuration: input column mapping, regime map, boroughs,
//! observation windows and service-level profiles. Profiles and windows
//! default to the shipped experiment set when omitted.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{ColumnMap, Profile, ScenarioWindow};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IngestConfig {
    pub input: InputSection,
    /// call type -> regime index
    pub regimes: BTreeMap<String, usize>,
    pub boroughs: Vec<String>,
    #[serde(default)]
    pub windows: Vec<WindowSpec>,
    #[serde(default)]
    pub profiles: Vec<Profile>,
    #[serde(default)]
    pub run: RunSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InputSection {
    pub csv: PathBuf,
    #[serde(default)]
    pub columns: Option<ColumnMap>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WindowSpec {
    pub name: String,
    pub start: String,
    pub end: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSection {
    #[serde(default = "default_stability_margin")]
    pub stability_margin: f64,
    #[serde(default = "default_conflict_minutes")]
    pub conflict_minutes: f64,
    #[serde(default)]
    pub drop_unmapped_call_types: bool,
    /// Per-regime unit costs; 1.0 each when omitted.
    #[serde(default)]
    pub unit_costs: Option<Vec<f64>>,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            stability_margin: default_stability_margin(),
            conflict_minutes: default_conflict_minutes(),
            drop_unmapped_call_types: false,
            unit_costs: None,
        }
    }
}

fn default_stability_margin() -> f64 {
    1e-4
}

fn default_conflict_minutes() -> f64 {
    1.0
}

fn parse_window_timestamp(s: &str) -> Result<NaiveDateTime> {
    for fmt in ["%Y-%m-%d %H:%M", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M:%S"] {
        if let Ok(t) = NaiveDateTime::parse_from_str(s.trim(), fmt) {
            return Ok(t);
        }
    }
    Err(Error::ingest(format!("cannot parse window timestamp '{s}'")))
}

impl IngestConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let config: IngestConfig =
            toml::from_str(&text).map_err(|e| Error::ingest(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.regimes.is_empty() {
            return Err(Error::ingest("config has an empty regime map"));
        }
        let max = self.regimes.values().copied().max().unwrap_or(0);
        let mut seen = vec![false; max + 1];
        for &idx in self.regimes.values() {
            seen[idx] = true;
        }
        if seen.iter().any(|&s| !s) {
            return Err(Error::ingest("regime indices must be contiguous from 0"));
        }
        if self.boroughs.is_empty() {
            return Err(Error::ingest("config lists no boroughs"));
        }
        for p in &self.effective_profiles() {
            p.validate()?;
        }
        self.effective_windows()?;
        Ok(())
    }

    pub fn columns(&self) -> ColumnMap {
        self.input.columns.clone().unwrap_or_default()
    }

    pub fn effective_profiles(&self) -> Vec<Profile> {
        if self.profiles.is_empty() {
            default_profiles()
        } else {
            self.profiles.clone()
        }
    }

    pub fn effective_windows(&self) -> Result<Vec<ScenarioWindow>> {
        if self.windows.is_empty() {
            return Ok(default_windows());
        }
        self.windows
            .iter()
            .map(|w| {
                ScenarioWindow::new(
                    w.name.clone(),
                    parse_window_timestamp(&w.start)?,
                    parse_window_timestamp(&w.end)?,
                )
            })
            .collect()
    }
}

/// The six shipped service-level profiles.
pub fn default_profiles() -> Vec<Profile> {
    let mk = |name: &str, beta: f64, alpha: f64, psi: f64, phi: f64, kappa: f64| Profile {
        name: name.to_string(),
        beta,
        alpha,
        psi,
        phi,
        kappa,
    };
    vec![
        mk("BAL", 0.95, 0.05, 1.10, 1.00, 0.10),
        mk("COV", 0.80, 0.07, 1.15, 1.03, 0.10),
        mk("HARD", 0.90, 0.02, 1.05, 0.95, 0.10),
        mk("REL", 0.70, 0.10, 1.25, 1.08, 0.10),
        mk("TAIL+", 0.75, 0.01, 1.00, 1.00, 0.10),
        mk("TIGHT+", 0.80, 0.05, 1.08, 0.88, 0.10),
    ]
}

/// The shipped observation windows.
pub fn default_windows() -> Vec<ScenarioWindow> {
    let t = |s: &str| NaiveDateTime::parse_from_str(s, "%Y-%m-%d %H:%M").expect("static timestamp");
    let mk = |name: &str, start: &str, end: &str| ScenarioWindow {
        name: name.to_string(),
        start: t(start),
        end: t(end),
    };
    vec![
        mk("night", "2025-03-03 20:00", "2025-03-04 08:00"),
        mk("peak", "2025-03-03 08:00", "2025-03-03 20:00"),
        mk("D1", "2025-03-01 00:00", "2025-03-02 00:00"),
        mk("D2", "2025-03-02 00:00", "2025-03-03 00:00"),
        mk("D3", "2025-03-03 00:00", "2025-03-04 00:00"),
        mk("3days", "2025-03-01 00:00", "2025-03-04 00:00"),
        mk("week", "2025-03-01 00:00", "2025-03-08 00:00"),
        mk("year", "2025-01-01 00:00", "2026-01-01 00:00"),
    ]
}
