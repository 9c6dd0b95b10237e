//! Offline backends driven by a JSON fixture of planted solutions.
//!
//! For each question the fixture lists gold paths (completions in order)
//! and decoy completions. On a gold-path prefix the agent samples the next
//! gold step (weight `gold_weight`) mixed with the decoys (weight 1 each).
//! Off the gold paths it samples decoys until `decoy_depth`, then answers
//! `Done`. Explicit `rules` keyed by the exact action history override both.
//! All sampling is seeded by the request seed.

use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::backend::{BackendError, ChatBackend, CompletionRequest};
use super::{parse_agent_output, Role};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptFixture {
    pub questions: Vec<QuestionScript>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionScript {
    pub question: String,
    pub gold_paths: Vec<Vec<String>>,
    #[serde(default)]
    pub decoys: Vec<String>,
    #[serde(default = "default_gold_weight")]
    pub gold_weight: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decoy_depth: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rules: Vec<Rule>,
}

fn default_gold_weight() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    /// Call texts (`Tool(argument)`) of the history this rule applies to.
    pub after: Vec<String>,
    pub candidates: Vec<Weighted>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Weighted {
    pub completion: String,
    #[serde(default = "default_gold_weight")]
    pub weight: f64,
}

struct Entry {
    script: QuestionScript,
    gold_calls: Vec<Vec<String>>,
}

/// A loaded, indexed fixture shared by the agent and reward backends.
pub struct Script {
    by_question: HashMap<String, Entry>,
}

const DONE: &str = "Thought: I cannot make further progress.\nAction: Done";

impl Script {
    pub fn load(path: impl AsRef<Path>) -> Result<Arc<Self>, BackendError> {
        let text = std::fs::read_to_string(path)?;
        let fixture: ScriptFixture = serde_json::from_str(&text).map_err(|e| BackendError::Script(e.to_string()))?;
        Self::new(fixture)
    }

    pub fn new(fixture: ScriptFixture) -> Result<Arc<Self>, BackendError> {
        let mut by_question = HashMap::new();
        for q in fixture.questions {
            let gold_calls = q
                .gold_paths
                .iter()
                .map(|path| {
                    path.iter()
                        .map(|c| {
                            parse_agent_output(c).map(|a| a.call_text()).map_err(|e| {
                                BackendError::Script(format!("gold step {c:?} of {:?} does not parse: {e}", q.question))
                            })
                        })
                        .collect::<Result<Vec<_>, _>>()
                })
                .collect::<Result<Vec<_>, _>>()?;
            by_question.insert(q.question.clone(), Entry { script: q, gold_calls });
        }
        Ok(Arc::new(Self { by_question }))
    }

    fn entry(&self, question: &str) -> Result<&Entry, BackendError> {
        self.by_question.get(question).ok_or_else(|| BackendError::Script(format!("no script for question {question:?}")))
    }

    /// Whether `history` is a prefix of some gold path.
    pub fn on_gold_path(&self, question: &str, history: &[String]) -> bool {
        self.by_question
            .get(question)
            .is_some_and(|e| e.gold_calls.iter().any(|g| g.len() >= history.len() && g[..history.len()] == *history))
    }

    fn candidates(&self, question: &str, history: &[String]) -> Result<Vec<(String, f64)>, BackendError> {
        let e = self.entry(question)?;
        if let Some(rule) = e.script.rules.iter().find(|r| r.after == history) {
            return Ok(rule.candidates.iter().map(|c| (c.completion.clone(), c.weight)).collect());
        }
        let mut out: Vec<(String, f64)> = Vec::new();
        for (path, calls) in e.script.gold_paths.iter().zip(&e.gold_calls) {
            if calls.len() > history.len() && calls[..history.len()] == *history {
                let next = &path[history.len()];
                if !out.iter().any(|(c, _)| c == next) {
                    out.push((next.clone(), e.script.gold_weight));
                }
            }
        }
        let off_path = out.is_empty();
        if off_path && e.script.decoy_depth.is_some_and(|d| history.len() >= d) {
            return Ok(vec![(DONE.to_owned(), 1.0)]);
        }
        out.extend(e.script.decoys.iter().map(|d| (d.clone(), 1.0)));
        if out.is_empty() {
            out.push((DONE.to_owned(), 1.0));
        }
        Ok(out)
    }
}

fn sample(cands: &[(String, f64)], n: usize, rng: &mut ChaCha8Rng) -> Result<Vec<String>, BackendError> {
    let dist = WeightedIndex::new(cands.iter().map(|c| c.1)).map_err(|e| BackendError::Script(e.to_string()))?;
    Ok((0..n).map(|_| cands[dist.sample(rng)].0.clone()).collect())
}

/// Splits a rendered history (`Thought:`/`Action:`/`Observation:` lines)
/// into call texts.
fn calls_in(text: &str) -> Vec<String> {
    let mut blocks: Vec<String> = Vec::new();
    let mut cur: Option<(String, bool)> = None;
    for line in text.lines() {
        let is_action = line.starts_with("Action:");
        if line.starts_with("Thought:") || (is_action && cur.as_ref().map_or(true, |c| c.1)) {
            blocks.extend(cur.take().map(|c| c.0));
            cur = Some((line.to_owned(), is_action));
        } else if line.starts_with("Observation:") {
            blocks.extend(cur.take().map(|c| c.0));
        } else if let Some((text, has_action)) = cur.as_mut() {
            text.push('\n');
            text.push_str(line);
            *has_action |= is_action;
        }
    }
    blocks.extend(cur.map(|c| c.0));
    blocks.iter().filter_map(|b| parse_agent_output(b).ok()).map(|a| a.call_text()).collect()
}

fn question_in(text: &str) -> Option<&str> {
    text.lines().find_map(|l| l.strip_prefix("Question: "))
}

/// Scripted action proposer.
pub struct ScriptedAgent {
    script: Arc<Script>,
}

impl ScriptedAgent {
    pub fn new(script: Arc<Script>) -> Self {
        Self { script }
    }
}

impl ChatBackend for ScriptedAgent {
    fn complete(&self, req: &CompletionRequest) -> Result<Vec<String>, BackendError> {
        let question = req
            .messages
            .iter()
            .find(|m| m.role == Role::User)
            .and_then(|m| question_in(&m.content))
            .ok_or_else(|| BackendError::Script("prompt has no question".into()))?;
        let history: Vec<String> = req
            .messages
            .iter()
            .filter(|m| m.role == Role::Assistant)
            .filter_map(|m| parse_agent_output(&m.content).ok())
            .map(|a| a.call_text())
            .collect();
        let cands = self.script.candidates(question, &history)?;
        sample(&cands, req.n, &mut ChaCha8Rng::seed_from_u64(req.seed))
    }
}

/// Scripted evaluator: `Score: 10` for states on a gold path, `Score: 0`
/// otherwise. Prompts without a guidelines section get noisier: each sample
/// is replaced by a uniform score with probability `direct_noise`.
pub struct ScriptedReward {
    script: Arc<Script>,
    pub direct_noise: f64,
}

impl ScriptedReward {
    pub fn new(script: Arc<Script>) -> Self {
        Self { script, direct_noise: 0.5 }
    }
}

impl ChatBackend for ScriptedReward {
    fn complete(&self, req: &CompletionRequest) -> Result<Vec<String>, BackendError> {
        let state = req
            .messages
            .iter()
            .rev()
            .find(|m| m.role == Role::User)
            .ok_or_else(|| BackendError::Script("prompt has no state".into()))?;
        let question = question_in(&state.content).ok_or_else(|| BackendError::Script("state has no question".into()))?;
        let history = calls_in(&state.content);
        let good = self.script.on_gold_path(question, &history);
        let guided = req.messages.iter().any(|m| m.content.contains("## Guidelines"));
        let mut rng = ChaCha8Rng::seed_from_u64(req.seed);
        Ok((0..req.n)
            .map(|_| {
                let score = if !guided && rng.gen_bool(self.direct_noise) {
                    rng.gen_range(0..=10)
                } else if good {
                    10
                } else {
                    0
                };
                format!("The state {} the question.\nScore: {score}", if good { "advances" } else { "does not advance" })
            })
            .collect())
    }
}
