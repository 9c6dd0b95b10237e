//! Prompt-based evaluation of intermediate states, plus the per-depth
//! score stability analysis.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use rand::Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{render_state_text, AgentState, ChatBackend, CompletionRequest, Message, Role};

/// Returned when every sample fails to parse or the backend fails.
pub const NEUTRAL_REWARD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RewardMode {
    /// Task description, guidelines and exemplars.
    Rule,
    /// Tool descriptions and output format only.
    Direct,
    /// Uniform draw from the search generator; no backend call.
    Random,
}

impl std::str::FromStr for RewardMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rule" => Ok(RewardMode::Rule),
            "direct" => Ok(RewardMode::Direct),
            "random" => Ok(RewardMode::Random),
            other => Err(format!("unknown reward mode {other:?} (expected rule, direct or random)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardConfig {
    pub mode: RewardMode,
    pub n_samples: usize,
    pub temperature: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self { mode: RewardMode::Rule, n_samples: 10, temperature: 0.7 }
    }
}

#[derive(Debug, Error)]
pub enum RewardError {
    #[error("missing prompt asset {}", .0.display())]
    MissingAsset(PathBuf),
    #[error("unknown prompt flavor {0:?} (expected freebase or wikidata)")]
    UnknownFlavor(String),
    #[error("random mode builds no prompt")]
    NoPrompt,
}

/// Texts the evaluation prompts are assembled from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptAssets {
    pub task: String,
    pub guidelines: String,
    pub exemplars: String,
    pub tools: String,
    pub format: String,
}

const ASSET_FILES: [&str; 5] = ["task.md", "guidelines.md", "exemplars.md", "tools.md", "format.md"];

impl PromptAssets {
    /// The built-in prompts for `freebase` or `wikidata` style KBs.
    pub fn builtin(flavor: &str) -> Result<Self, RewardError> {
        let exemplars = match flavor {
            "freebase" => include_str!("../assets/prompts/reward/freebase/exemplars.md"),
            "wikidata" => include_str!("../assets/prompts/reward/wikidata/exemplars.md"),
            other => return Err(RewardError::UnknownFlavor(other.to_owned())),
        };
        Ok(Self {
            task: include_str!("../assets/prompts/reward/task.md").trim_end().to_owned(),
            guidelines: include_str!("../assets/prompts/reward/guidelines.md").trim_end().to_owned(),
            exemplars: exemplars.trim_end().to_owned(),
            tools: include_str!("../assets/prompts/reward/tools.md").trim_end().to_owned(),
            format: include_str!("../assets/prompts/reward/format.md").trim_end().to_owned(),
        })
    }

    /// Loads `task.md`, `guidelines.md`, `exemplars.md`, `tools.md` and
    /// `format.md` from `dir`.
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self, RewardError> {
        let read = |name: &str| {
            let path = dir.as_ref().join(name);
            std::fs::read_to_string(&path).map(|s| s.trim_end().to_owned()).map_err(|_| RewardError::MissingAsset(path))
        };
        let [task, guidelines, exemplars, tools, format] = ASSET_FILES.map(read);
        Ok(Self { task: task?, guidelines: guidelines?, exemplars: exemplars?, tools: tools?, format: format? })
    }
}

pub fn build_eval_prompt(state: &AgentState, mode: RewardMode, assets: &PromptAssets) -> Result<Vec<Message>, RewardError> {
    let system = match mode {
        RewardMode::Rule => format!(
            "{}\n\n## Guidelines\n{}\n\n## Examples\n{}\n\n## Format\n{}",
            assets.task, assets.guidelines, assets.exemplars, assets.format
        ),
        RewardMode::Direct => format!("## Tools\n{}\n\n## Format\n{}", assets.tools, assets.format),
        RewardMode::Random => return Err(RewardError::NoPrompt),
    };
    Ok(vec![Message::new(Role::System, system), Message::new(Role::User, render_state_text(state))])
}

fn score_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"Score:\s*(-?\d+)").expect("valid regex"))
}

/// Last `Score: <0..10>` in the text, scaled to `[0, 1]`.
pub fn parse_score(text: &str) -> Option<f64> {
    let last = score_re().captures_iter(text).last()?;
    let v: i64 = last[1].parse().ok()?;
    (0..=10).contains(&v).then(|| v as f64 / 10.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardSample {
    pub raw: String,
    pub value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardOutcome {
    pub value: f64,
    pub samples: Vec<RewardSample>,
    pub degraded: bool,
}

/// Mean of the parsed sample values, or the neutral reward with the
/// degraded flag when none parse.
pub fn aggregate(samples: Vec<RewardSample>) -> RewardOutcome {
    let parsed: Vec<f64> = samples.iter().filter_map(|s| s.value).collect();
    if parsed.is_empty() {
        return RewardOutcome { value: NEUTRAL_REWARD, samples, degraded: true };
    }
    let value = parsed.iter().sum::<f64>() / parsed.len() as f64;
    RewardOutcome { value: value.clamp(0.0, 1.0), samples, degraded: false }
}

/// Scores a state. Never fails: transport errors degrade to the neutral
/// reward.
pub fn score_state(
    backend: Option<&dyn ChatBackend>,
    config: &RewardConfig,
    assets: &PromptAssets,
    state: &AgentState,
    rng: &mut impl Rng,
) -> RewardOutcome {
    if config.mode == RewardMode::Random {
        return RewardOutcome { value: rng.gen::<f64>(), samples: Vec::new(), degraded: false };
    }
    let seed = rng.gen::<u64>();
    let Some(backend) = backend else {
        log::warn!("no reward backend configured; using neutral reward");
        return RewardOutcome { value: NEUTRAL_REWARD, samples: Vec::new(), degraded: true };
    };
    let messages = build_eval_prompt(state, config.mode, assets).expect("non-random mode has a prompt");
    let req = CompletionRequest { messages, n: config.n_samples.max(1), temperature: config.temperature, seed };
    match backend.complete(&req) {
        Ok(completions) => aggregate(
            completions.into_iter().take(req.n).map(|raw| RewardSample { value: parse_score(&raw), raw }).collect(),
        ),
        Err(e) => {
            log::warn!("reward backend failed: {e}");
            RewardOutcome { value: NEUTRAL_REWARD, samples: Vec::new(), degraded: true }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSamples {
    pub depth: usize,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityRow {
    pub depth: usize,
    pub node_count: usize,
    pub mean_std: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StabilityTable {
    pub rows: Vec<StabilityRow>,
    /// Nodes with fewer than two parsed samples.
    pub excluded: usize,
}

impl StabilityTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("depth,node_count,mean_std\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{}", r.depth, r.node_count, r.mean_std);
        }
        out
    }
}

pub fn population_std(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
}

/// Population standard deviation per node, averaged by depth.
pub fn score_stability(nodes: &[NodeSamples]) -> StabilityTable {
    let mut by_depth: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    let mut excluded = 0;
    for node in nodes {
        if node.values.len() < 2 {
            excluded += 1;
            continue;
        }
        by_depth.entry(node.depth).or_default().push(population_std(&node.values));
    }
    let rows = by_depth
        .into_iter()
        .map(|(depth, stds)| StabilityRow { depth, node_count: stds.len(), mean_std: stds.iter().sum::<f64>() / stds.len() as f64 })
        .collect();
    StabilityTable { rows, excluded }
}
