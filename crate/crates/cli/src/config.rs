//! Experiment config: the search hyperparameters as top-level keys plus
//! optional `[agent]` and `[reward]` endpoint sections.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use kbqa_core::agent::EndpointConfig;
use kbqa_core::annotate::DEFAULT_F1_THRESHOLD;
use kbqa_core::SearchConfig;
use serde::Serialize;
use sha2::{Digest, Sha256};
use toml::{Table, Value};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Config {
    pub search: SearchConfig,
    /// Built-in reward prompt set, `freebase` or `wikidata`.
    pub prompt_flavor: String,
    /// Directory overriding the built-in reward prompts.
    pub prompts_dir: Option<PathBuf>,
    pub f1_threshold: f64,
    pub agent: Option<EndpointConfig>,
    pub reward: Option<EndpointConfig>,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            search: SearchConfig::default(),
            prompt_flavor: "wikidata".into(),
            prompts_dir: None,
            f1_threshold: DEFAULT_F1_THRESHOLD,
            agent: None,
            reward: None,
        }
    }
}

const OWN_KEYS: [&str; 5] = ["prompt_flavor", "prompts_dir", "f1_threshold", "agent", "reward"];

fn search_keys() -> Vec<String> {
    match Value::try_from(SearchConfig::default()) {
        Ok(Value::Table(t)) => t.keys().cloned().collect(),
        _ => Vec::new(),
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("invalid config {}", path.display()))
    }

    /// Parses and validates, reporting every problem at once.
    pub fn parse(text: &str) -> Result<Self> {
        let table: Table = text.parse().context("config is not valid TOML")?;
        let mut errors = Vec::new();
        let mut cfg = Config::default();
        let known = search_keys();

        let mut search = Table::new();
        for (key, value) in &table {
            if known.contains(key) {
                let single: Table = [(key.clone(), value.clone())].into_iter().collect();
                match single.clone().try_into::<SearchConfig>() {
                    Ok(_) => {
                        search.insert(key.clone(), value.clone());
                    }
                    Err(e) => errors.push(format!("{key}: {}", e.message().trim())),
                }
            } else if !OWN_KEYS.contains(&key.as_str()) {
                errors.push(format!("unknown key {key:?}"));
            }
        }
        match search.try_into::<SearchConfig>() {
            Ok(s) => cfg.search = s,
            Err(e) if errors.is_empty() => errors.push(e.message().trim().to_owned()),
            Err(_) => {}
        }
        errors.extend(cfg.search.validate());

        if let Some(v) = table.get("prompt_flavor") {
            match v.as_str() {
                Some(f @ ("freebase" | "wikidata")) => cfg.prompt_flavor = f.to_owned(),
                _ => errors.push(format!("prompt_flavor must be \"freebase\" or \"wikidata\", got {v}")),
            }
        }
        if let Some(v) = table.get("prompts_dir") {
            match v.as_str() {
                Some(p) => cfg.prompts_dir = Some(PathBuf::from(p)),
                None => errors.push(format!("prompts_dir must be a path string, got {v}")),
            }
        }
        if let Some(v) = table.get("f1_threshold") {
            match v.as_float().or_else(|| v.as_integer().map(|i| i as f64)) {
                Some(t) if (0.0..=1.0).contains(&t) => cfg.f1_threshold = t,
                _ => errors.push(format!("f1_threshold must be a number in [0, 1], got {v}")),
            }
        }
        for section in ["agent", "reward"] {
            let Some(v) = table.get(section) else { continue };
            match v.clone().try_into::<EndpointConfig>() {
                Ok(e) => {
                    if section == "agent" {
                        cfg.agent = Some(e);
                    } else {
                        cfg.reward = Some(e);
                    }
                }
                Err(e) => errors.push(format!("[{section}]: {}", e.message().trim())),
            }
        }

        if !errors.is_empty() {
            bail!("{} problem(s):\n  - {}", errors.len(), errors.join("\n  - "));
        }
        Ok(cfg)
    }

    /// Hex sha256 of the effective config as JSON.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(json))
    }
}
