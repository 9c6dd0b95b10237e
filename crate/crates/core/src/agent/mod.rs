//! Action proposal: prompt rendering, completion parsing and the
//! backends that produce completions.

pub mod backend;
pub mod scripted;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tools::{Action, Observation, Tool};

pub use backend::{BackendError, ChatBackend, CompletionRequest, EndpointBackend, EndpointConfig, RecordingBackend, ReplayBackend};

const AGENT_SYSTEM: &str = include_str!("../../assets/prompts/agent_system.md");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn new(role: Role, content: impl Into<String>) -> Self {
        Self { role, content: content.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Step {
    pub action: Action,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observation: Option<Observation>,
}

/// The question plus the interaction history along one branch.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentState {
    pub question: String,
    pub history: Vec<Step>,
}

impl AgentState {
    pub fn new(question: impl Into<String>) -> Self {
        Self { question: question.into(), history: Vec::new() }
    }

    pub fn depth(&self) -> usize {
        self.history.len()
    }

    pub fn is_terminal(&self) -> bool {
        self.history.last().is_some_and(|s| s.action.tool == Tool::Done)
    }
}

/// Assistant turn text for an action. Parsing it back yields the same
/// thought, tool and argument.
pub fn render_action(action: &Action) -> String {
    if action.thought.is_empty() {
        format!("Action: {}", action.call_text())
    } else {
        format!("Thought: {}\nAction: {}", action.thought, action.call_text())
    }
}

pub fn render_observation(obs: &Observation) -> String {
    format!("Observation: {}", obs.text)
}

/// System prompt, the question, then one assistant turn per action and one
/// user turn per observation.
pub fn render_state_prompt(state: &AgentState) -> Vec<Message> {
    let mut out = vec![
        Message::new(Role::System, AGENT_SYSTEM.trim_end()),
        Message::new(Role::User, format!("Question: {}", state.question)),
    ];
    for step in &state.history {
        out.push(Message::new(Role::Assistant, render_action(&step.action)));
        if let Some(obs) = &step.observation {
            out.push(Message::new(Role::User, render_observation(obs)));
        }
    }
    out
}

/// The same history as plain text, used inside evaluation prompts.
pub fn render_state_text(state: &AgentState) -> String {
    let mut out = format!("Question: {}", state.question);
    for step in &state.history {
        out.push('\n');
        out.push_str(&render_action(&step.action));
        if let Some(obs) = &step.observation {
            out.push('\n');
            out.push_str(&render_observation(obs));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseFailure {
    #[error("no Action line")]
    NoToolLine,
    #[error("{0} Action lines; expected exactly one")]
    MultipleToolLines(usize),
    #[error("unknown tool {0:?}")]
    UnknownTool(String),
    #[error("malformed tool call: {0}")]
    Malformed(String),
}

/// Extracts the thought and exactly one `Action: Tool(argument)` call.
///
/// The argument runs from the first `(` to the last `)` of the completion,
/// so multi-line queries with nested braces come back verbatim. Anything a
/// model writes after an `Observation:` line is ignored.
pub fn parse_agent_output(text: &str) -> Result<Action, ParseFailure> {
    let body = match text.find("\nObservation:") {
        Some(i) => &text[..i],
        None => text,
    };
    let mut offsets = Vec::new();
    let mut pos = 0;
    for line in body.split_inclusive('\n') {
        if line.trim_start().starts_with("Action:") {
            offsets.push(pos + (line.len() - line.trim_start().len()));
        }
        pos += line.len();
    }
    let start = match offsets.as_slice() {
        [] => return Err(ParseFailure::NoToolLine),
        [one] => *one,
        many => return Err(ParseFailure::MultipleToolLines(many.len())),
    };
    let thought = body[..start].trim();
    let thought = thought.strip_prefix("Thought:").unwrap_or(thought).trim().to_owned();
    let call = body[start + "Action:".len()..].trim();

    let name_end = call.find(|c: char| !(c.is_ascii_alphanumeric() || c == '_')).unwrap_or(call.len());
    let name = &call[..name_end];
    if name.is_empty() {
        return Err(ParseFailure::Malformed(call.chars().take(40).collect()));
    }
    let tool = Tool::from_name(name).ok_or_else(|| ParseFailure::UnknownTool(name.to_owned()))?;
    let rest = call[name_end..].trim_start();
    let argument = if rest.is_empty() {
        String::new()
    } else {
        let close = rest.rfind(')');
        match (rest.starts_with('('), close) {
            (true, Some(close)) if close > 0 => rest[1..close].trim().to_owned(),
            _ => return Err(ParseFailure::Malformed(format!("{name}{}", rest.chars().take(40).collect::<String>()))),
        }
    };
    if tool == Tool::Done && !argument.is_empty() {
        return Err(ParseFailure::Malformed("Done takes no argument".into()));
    }
    if tool != Tool::Done && argument.is_empty() {
        return Err(ParseFailure::Malformed(format!("{name} needs an argument")));
    }
    Ok(Action { thought, tool, argument, raw: text.to_owned() })
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Proposal {
    pub actions: Vec<Action>,
    pub parse_failures: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sampling {
    pub n: usize,
    pub temperature: f64,
}

impl fmt::Display for Sampling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n={} t={}", self.n, self.temperature)
    }
}

/// Asks the backend for `n` completions and keeps those that parse.
pub fn propose_actions(
    backend: &dyn ChatBackend,
    state: &AgentState,
    sampling: Sampling,
    seed: u64,
) -> Result<Proposal, BackendError> {
    let req = CompletionRequest {
        messages: render_state_prompt(state),
        n: sampling.n.max(1),
        temperature: sampling.temperature,
        seed,
    };
    let completions = backend.complete(&req)?;
    let mut out = Proposal::default();
    for c in completions.into_iter().take(req.n) {
        match parse_agent_output(&c) {
            Ok(a) => out.actions.push(a),
            Err(e) => {
                log::debug!("dropping completion: {e}");
                out.parse_failures += 1;
            }
        }
    }
    Ok(out)
}
