//! The agent's action space and the observations each tool produces.
//!
//! Observation text is part of the agent prompt format, so rendering is
//! frozen: a numbered list, one item per line, at most [`MAX_ITEMS`] items,
//! followed by `... and N more` when truncated.

pub mod args;
pub mod scorer;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::answer::AnswerSet;
use crate::kb::{KnowledgeBase, NodeId, PredicateId, TermValue};
use crate::query::{self, ast::write_literal, canonical_answers, QueryForm};

pub use scorer::{LexicalScorer, Scorer};

pub const MAX_ITEMS: usize = 10;
const DESCRIPTION_CHARS: usize = 80;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Tool {
    SearchNodes,
    SearchGraphPatterns,
    #[serde(rename = "ExecuteSPARQL")]
    ExecuteSparql,
    Done,
}

impl Tool {
    pub const ALL: [Tool; 4] = [Tool::SearchNodes, Tool::SearchGraphPatterns, Tool::ExecuteSparql, Tool::Done];

    pub fn name(self) -> &'static str {
        match self {
            Tool::SearchNodes => "SearchNodes",
            Tool::SearchGraphPatterns => "SearchGraphPatterns",
            Tool::ExecuteSparql => "ExecuteSPARQL",
            Tool::Done => "Done",
        }
    }

    pub fn from_name(name: &str) -> Option<Tool> {
        Tool::ALL.into_iter().find(|t| t.name().eq_ignore_ascii_case(name))
    }
}

impl fmt::Display for Tool {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Action {
    pub thought: String,
    pub tool: Tool,
    /// Text between the parentheses of the tool call, verbatim.
    pub argument: String,
    /// The completion this action was parsed from.
    pub raw: String,
}

impl Action {
    pub fn new(thought: impl Into<String>, tool: Tool, argument: impl Into<String>) -> Self {
        let thought = thought.into();
        let argument = argument.into();
        let raw = format!("Thought: {thought}\nAction: {tool}({argument})");
        Self { thought, tool, argument, raw }
    }

    pub fn call_text(&self) -> String {
        format!("{}({})", self.tool, self.argument)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub text: String,
    /// Number of items before truncation.
    pub item_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Full canonical answers, set for successful ExecuteSPARQL calls only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answers: Option<AnswerSet>,
    /// Untruncated result content the fingerprint is computed over.
    #[serde(skip)]
    pub content: Vec<String>,
}

impl Observation {
    fn list(items: Vec<String>) -> Self {
        Self { text: render_list(&items), item_count: items.len(), error: None, answers: None, content: items }
    }

    pub fn error(message: impl Into<String>) -> Self {
        let message = message.into();
        Self { text: format!("Error: {message}"), item_count: 0, content: vec![message.clone()], error: Some(message), answers: None }
    }

    /// Non-empty, error-free execution result.
    pub fn is_valid_result(&self) -> bool {
        self.error.is_none() && self.answers.as_ref().is_some_and(|a| !a.is_empty())
    }
}

/// The frozen list format shared by every tool.
pub fn render_list(items: &[String]) -> String {
    if items.is_empty() {
        return "No results.".to_owned();
    }
    let mut out: Vec<String> =
        items.iter().take(MAX_ITEMS).enumerate().map(|(i, item)| format!("{}. {item}", i + 1)).collect();
    if items.len() > MAX_ITEMS {
        out.push(format!("... and {} more", items.len() - MAX_ITEMS));
    }
    out.join("\n")
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Fingerprint(pub String);

/// Hash over the tool and the untruncated result content. Thought text and
/// query spelling do not contribute.
pub fn observation_fingerprint(action: &Action, obs: Option<&Observation>) -> Fingerprint {
    let mut h = Sha256::new();
    h.update(action.tool.name().as_bytes());
    h.update([0]);
    if let Some(obs) = obs {
        let tag: &[u8] = if obs.error.is_some() { b"E" } else { b"R" };
        h.update(tag);
        for line in &obs.content {
            h.update((line.len() as u64).to_le_bytes());
            h.update(line.as_bytes());
        }
    }
    Fingerprint(hex::encode(&h.finalize()[..16]))
}

fn truncate_chars(s: &str, max: usize) -> String {
    if s.chars().count() <= max {
        return s.to_owned();
    }
    let mut out: String = s.chars().take(max).collect();
    out.push_str("...");
    out
}

/// Stateless tool runner over an immutable KB.
pub struct Toolbox<'a> {
    kb: &'a KnowledgeBase,
    scorer: Box<dyn Scorer + 'a>,
}

impl<'a> Toolbox<'a> {
    pub fn new(kb: &'a KnowledgeBase) -> Self {
        Self { kb, scorer: Box::new(LexicalScorer) }
    }

    pub fn with_scorer(kb: &'a KnowledgeBase, scorer: Box<dyn Scorer + 'a>) -> Self {
        Self { kb, scorer }
    }

    pub fn kb(&self) -> &'a KnowledgeBase {
        self.kb
    }

    /// Runs an action. `Done` has no observation.
    pub fn execute(&self, action: &Action) -> Option<Observation> {
        match action.tool {
            Tool::Done => None,
            Tool::SearchNodes => Some(self.search_nodes(&unquote_argument(&action.argument))),
            Tool::ExecuteSparql => Some(self.execute_sparql(&unquote_argument(&action.argument))),
            Tool::SearchGraphPatterns => Some(match args::parse_string_args(&action.argument) {
                Some(list) if !list.is_empty() => {
                    let anchor = list.iter().find(|a| a.name.as_deref() == Some("sparql")).unwrap_or(&list[0]);
                    let hint = list
                        .iter()
                        .find(|a| a.name.as_deref() == Some("semantic"))
                        .or_else(|| list.iter().skip(1).find(|a| a.name.is_none()))
                        .map_or("", |a| a.value.as_str());
                    self.search_graph_patterns(&anchor.value, hint)
                }
                _ => Observation::error("expected SearchGraphPatterns(\"<anchor SELECT>\", \"<hint>\")"),
            }),
        }
    }

    pub fn search_nodes(&self, query: &str) -> Observation {
        if query.trim().is_empty() {
            return Observation::error("empty search text");
        }
        let mut hits: Vec<(f64, &crate::kb::NodeMeta)> = self
            .kb
            .nodes()
            .iter()
            .filter_map(|n| {
                let s = self.scorer.score(query, &n.label);
                (s > 0.0).then_some((s, n))
            })
            .collect();
        hits.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.id.cmp(&b.1.id)));
        let items = hits
            .iter()
            .map(|(_, n)| {
                let mut item = format!("{} (e:{})", n.label, n.id);
                if n.is_class {
                    item.push_str(" [class]");
                }
                if let Some(d) = n.description.as_deref().filter(|d| !d.is_empty()) {
                    item.push_str(" - ");
                    item.push_str(&truncate_chars(d, DESCRIPTION_CHARS));
                }
                item
            })
            .collect();
        Observation::list(items)
    }

    pub fn search_graph_patterns(&self, anchor: &str, hint: &str) -> Observation {
        let q = match query::parse_query(anchor) {
            Ok(q) => q,
            Err(e) => return Observation::error(format!("invalid anchor query: {e}")),
        };
        if q.form != QueryForm::Select {
            return Observation::error("invalid anchor query: expected a SELECT query");
        }
        let rs = query::evaluate(&q, self.kb);
        let Some(entity) = rs.rows.iter().flatten().flatten().find_map(TermValue::as_node).cloned() else {
            return Observation::error("anchor query bound no entity");
        };

        let mut patterns = self.one_hop(&entity);
        patterns.iter_mut().for_each(|p| {
            let label = self.kb.predicate_label(&p.predicate).unwrap_or(p.predicate.as_str());
            p.score = self.scorer.score(hint, label);
        });
        patterns.sort_by(|a, b| {
            b.score.total_cmp(&a.score).then(a.incoming.cmp(&b.incoming)).then_with(|| a.predicate.cmp(&b.predicate))
        });
        let items: Vec<String> = patterns.iter().map(|p| self.render_pattern(p)).collect();
        let mut obs = Observation::list(items);
        let label = self.kb.node_label(&entity).unwrap_or(entity.as_str());
        obs.text = format!("Anchor: {label} (e:{entity})\n{}", obs.text);
        obs.content.insert(0, entity.0);
        obs
    }

    fn one_hop(&self, entity: &NodeId) -> Vec<Pattern> {
        let mut out: BTreeMap<(bool, PredicateId), Pattern> = BTreeMap::new();
        let mut add = |incoming: bool, st: &crate::kb::Statement, sample: TermValue| {
            let p = out.entry((incoming, st.predicate.clone())).or_insert_with(|| Pattern {
                incoming,
                predicate: st.predicate.clone(),
                sample,
                qualifier_keys: Vec::new(),
                score: 0.0,
            });
            for (k, _) in &st.qualifiers {
                if !p.qualifier_keys.contains(k) {
                    p.qualifier_keys.push(k.clone());
                }
            }
        };
        for st in self.kb.match_statements(Some(entity), None, None) {
            add(false, st, st.object.clone());
        }
        let target = TermValue::Node(entity.clone());
        for st in self.kb.match_statements(None, None, Some(&target)) {
            add(true, st, TermValue::Node(st.subject.clone()));
        }
        out.into_values().collect()
    }

    fn render_value(&self, v: &TermValue) -> String {
        match v {
            TermValue::Node(id) => match self.kb.node_label(id) {
                Some(l) => format!("e:{id} ({l})"),
                None => format!("e:{id}"),
            },
            TermValue::Literal(l) => {
                let mut s = String::new();
                let _ = write_literal(&mut s, l);
                s
            }
        }
    }

    fn render_pattern(&self, p: &Pattern) -> String {
        let sample = self.render_value(&p.sample);
        let mut s = if p.incoming {
            format!("({sample}, p:{}, ?e)", p.predicate)
        } else {
            format!("(?e, p:{}, {sample})", p.predicate)
        };
        if !p.qualifier_keys.is_empty() {
            let keys: Vec<String> = p.qualifier_keys.iter().map(|k| format!("pq:{k}")).collect();
            s.push_str(" qualifiers: ");
            s.push_str(&keys.join(", "));
        }
        s
    }

    pub fn execute_sparql(&self, text: &str) -> Observation {
        match query::execute(text, self.kb) {
            Err(e) => Observation::error(e.to_string()),
            Ok(rs) => {
                let rows = rs.rendered_rows();
                let answers = canonical_answers(&rs);
                Observation {
                    text: render_list(&rows),
                    item_count: rows.len(),
                    error: None,
                    content: answers.iter().map(str::to_owned).collect(),
                    answers: Some(answers),
                }
            }
        }
    }
}

struct Pattern {
    incoming: bool,
    predicate: PredicateId,
    sample: TermValue,
    qualifier_keys: Vec<PredicateId>,
    score: f64,
}

/// A single quoted argument is unquoted; anything else is taken verbatim.
pub fn unquote_argument(argument: &str) -> String {
    match args::parse_string_args(argument) {
        Some(list) if list.len() == 1 => list.into_iter().next().map(|a| a.value).unwrap_or_default(),
        _ => argument.trim().to_owned(),
    }
}
