//! Bundled experiment presets.
//!
//! A preset file holds an optional `description`, a `[defaults]` table and a
//! list of `[[scenario]]` tables. Keys missing from a scenario are taken from
//! the defaults before the scenario is deserialized.

use std::path::Path;

use toml::{Table, Value};

use super::{ExperimentError, Scenario};

pub const PRESETS: &[(&str, &str)] = &[
    ("fig4-vif", include_str!("../../presets/fig4-vif.toml")),
    ("fig4-ronr", include_str!("../../presets/fig4-ronr.toml")),
    ("fig5", include_str!("../../presets/fig5.toml")),
    ("fig6", include_str!("../../presets/fig6.toml")),
    ("lines", include_str!("../../presets/lines.toml")),
];

#[derive(Debug, Clone, PartialEq)]
pub struct Preset {
    pub name: String,
    pub description: String,
    pub scenarios: Vec<Scenario>,
}

pub fn preset_names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|(name, _)| *name)
}

fn config_err(name: &str, msg: impl std::fmt::Display) -> ExperimentError {
    ExperimentError::Config(format!("preset {name}: {msg}"))
}

pub fn parse_preset(name: &str, text: &str) -> Result<Preset, ExperimentError> {
    let mut table: Table = text.parse().map_err(|e| config_err(name, e))?;
    let description = match table.remove("description") {
        None => String::new(),
        Some(Value::String(s)) => s,
        Some(_) => return Err(config_err(name, "description must be a string")),
    };
    let defaults = match table.remove("defaults") {
        None => Table::new(),
        Some(Value::Table(t)) => t,
        Some(_) => return Err(config_err(name, "[defaults] must be a table")),
    };
    let entries = match table.remove("scenario") {
        Some(Value::Array(a)) => a,
        None => return Err(config_err(name, "no [[scenario]] entries")),
        Some(_) => return Err(config_err(name, "scenario must be an array of tables")),
    };
    if let Some(key) = table.keys().next() {
        return Err(config_err(name, format!("unknown key {key:?}")));
    }
    let mut scenarios = Vec::with_capacity(entries.len());
    for entry in entries {
        let Value::Table(mut t) = entry else {
            return Err(config_err(name, "scenario must be a table"));
        };
        for (k, v) in &defaults {
            t.entry(k.clone()).or_insert_with(|| v.clone());
        }
        let scenario: Scenario = t.try_into().map_err(|e| config_err(name, e))?;
        scenarios.push(scenario);
    }
    Ok(Preset {
        name: name.to_string(),
        description,
        scenarios,
    })
}

/// Loads a bundled preset by name, or a preset file when `name` is a path.
pub fn load_preset(name: &str) -> Result<Preset, ExperimentError> {
    if let Some((_, text)) = PRESETS.iter().find(|(n, _)| *n == name) {
        return parse_preset(name, text);
    }
    let path = Path::new(name);
    if path.exists() {
        let text = std::fs::read_to_string(path).map_err(|source| ExperimentError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        return parse_preset(name, &text);
    }
    Err(ExperimentError::Config(format!("unknown preset {name:?}")))
}
