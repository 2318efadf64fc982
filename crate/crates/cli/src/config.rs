//! TOML run configuration.
//!
//! Top-level keys apply to every subcommand; a table named after a
//! subcommand (`[score]`, `[pipeline]`, …) overrides them for that
//! subcommand only. Keys are the long flag names with `-` replaced by `_`.
//! Relative paths resolve against the config file's directory.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::UsageError;

pub const SUBCOMMANDS: [&str; 6] = ["stats", "score", "eval", "pipeline", "synth", "corrupt"];

/// A Rényi order: a number, or `"inf"`.
#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum AlphaValue {
    Number(f64),
    Text(String),
}

impl AlphaValue {
    pub fn to_text(&self) -> String {
        match self {
            AlphaValue::Number(x) => x.to_string(),
            AlphaValue::Text(s) => s.clone(),
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    pub threads: Option<usize>,
    pub manifest: Option<PathBuf>,
    pub frames: Option<usize>,
    pub beta1: Option<f64>,
    pub beta2: Option<f64>,
    pub stats: Option<PathBuf>,
    pub scores: Option<PathBuf>,
    pub method: Option<Vec<String>>,
    pub k: Option<Vec<f64>>,
    pub alpha: Option<Vec<AlphaValue>>,
    pub full_span: Option<bool>,
    pub fpr_cap: Option<Vec<f64>>,
    pub out: Option<PathBuf>,
    pub roc: Option<PathBuf>,
    pub stats_out: Option<PathBuf>,
    pub scores_out: Option<PathBuf>,
    pub profile: Option<PathBuf>,
    pub seed: Option<u64>,
    pub null: Option<bool>,
    pub frames_dir: Option<PathBuf>,
    pub kind: Option<String>,
    pub level: Option<String>,
}

impl Settings {
    fn resolve_paths(&mut self, base: &Path) {
        let fields = [
            &mut self.manifest,
            &mut self.stats,
            &mut self.scores,
            &mut self.out,
            &mut self.roc,
            &mut self.stats_out,
            &mut self.scores_out,
            &mut self.profile,
            &mut self.frames_dir,
        ];
        for p in fields.into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }
}

/// Settings for `subcommand` from the config file at `path`.
pub fn load(path: &Path, subcommand: &str) -> Result<Settings, UsageError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
    parse(&text, subcommand, path.parent().unwrap_or(Path::new("")))
        .map_err(|e| UsageError(format!("config {}: {}", path.display(), e.0)))
}

pub fn parse(text: &str, subcommand: &str, base: &Path) -> Result<Settings, UsageError> {
    let mut table: toml::Table = toml::from_str(text).map_err(|e| UsageError(e.to_string()))?;
    let mut section = None;
    for name in SUBCOMMANDS {
        match table.remove(name) {
            Some(toml::Value::Table(t)) if name == subcommand => section = Some(t),
            // still checked, so a typo fails whichever subcommand runs
            Some(toml::Value::Table(t)) => {
                toml::Value::Table(t)
                    .try_into::<Settings>()
                    .map_err(|e| UsageError(format!("[{name}]: {e}")))?;
            }
            Some(_) => return Err(UsageError(format!("[{name}] must be a table"))),
            None => {}
        }
    }
    table.extend(section.unwrap_or_default());
    let mut settings: Settings =
        toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| UsageError(e.to_string()))?;
    settings.resolve_paths(base);
    Ok(settings)
}
