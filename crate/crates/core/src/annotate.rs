//! Training-trajectory construction from question/query pairs: search until
//! a branch's answers reach an F1 threshold against the gold answers, then
//! keep that branch.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agent::{parse_agent_output, render_state_prompt, AgentState, Message, Role, Step};
use crate::dataset::DatasetRecord;
use crate::kb::KnowledgeBase;
use crate::metrics::f1;
use crate::search::{run_search_until, SearchContext, SearchStats, Strategy};
use crate::tools::{Action, Tool, Toolbox};

pub const DEFAULT_F1_THRESHOLD: f64 = 0.67;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub id: String,
    pub question: String,
    /// Root-to-terminal steps; the last one is `Done`.
    pub turns: Vec<Step>,
    pub f1: f64,
    pub predicted_sparql: String,
    pub gold_sparql: String,
}

impl Trajectory {
    pub fn state(&self) -> AgentState {
        AgentState { question: self.question.clone(), history: self.turns.clone() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SkipReason {
    /// No branch reached the threshold within the search budget.
    Budget,
    /// The gold query failed or returned nothing.
    GoldError,
}

impl SkipReason {
    pub fn name(self) -> &'static str {
        match self {
            SkipReason::Budget => "budget",
            SkipReason::GoldError => "gold-error",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Skip {
    pub id: String,
    pub reason: SkipReason,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Annotation {
    pub outcome: Result<Trajectory, Skip>,
    pub stats: SearchStats,
}

/// Runs the MCTS loop on one record and stops at the first valid terminal
/// whose answers score at least `threshold` F1 against gold.
pub fn annotate_question(ctx: SearchContext<'_>, record: &DatasetRecord, threshold: f64) -> Result<Annotation, Skip> {
    let skip = |reason, detail: String| Skip { id: record.id.clone(), reason, detail };
    let gold = record.gold_answers(ctx.kb).map_err(|e| skip(SkipReason::GoldError, e.to_string()))?;
    if gold.is_empty() {
        return Err(skip(SkipReason::GoldError, "gold query returns no answers".into()));
    }
    let mut hit: Option<(usize, f64)> = None;
    let result = run_search_until(ctx, &record.question, Strategy::Mcts, &mut |tree, node| {
        let Some(p) = &tree.node(node).prediction else { return false };
        let score = f1(&p.answers, &gold);
        if score >= threshold {
            hit = Some((node, score));
            return true;
        }
        false
    });
    let outcome = match hit {
        Some((node, score)) => {
            let state = result.tree.state(node);
            let predicted_sparql = result.tree.node(node).prediction.as_ref().map(|p| p.sparql.clone()).unwrap_or_default();
            Ok(Trajectory {
                id: record.id.clone(),
                question: record.question.clone(),
                turns: state.history,
                f1: score,
                predicted_sparql,
                gold_sparql: record.sparql.clone(),
            })
        }
        None => Err(skip(SkipReason::Budget, format!("{} iterations, {} valid terminals", result.stats.iterations, result.stats.valid_terminals))),
    };
    Ok(Annotation { outcome, stats: result.stats })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplayMismatch {
    pub turn: usize,
    pub expected: Option<String>,
    pub actual: Option<String>,
}

/// Re-executes every action and compares observation text byte for byte.
pub fn replay(kb: &KnowledgeBase, trajectory: &Trajectory) -> Result<(), ReplayMismatch> {
    let tools = Toolbox::new(kb);
    for (i, step) in trajectory.turns.iter().enumerate() {
        let actual = tools.execute(&step.action).map(|o| o.text);
        let expected = step.observation.as_ref().map(|o| o.text.clone());
        if actual != expected {
            return Err(ReplayMismatch { turn: i, expected, actual });
        }
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum ExportLine {
    Manifest { format: String, version: u32, count: usize },
    Trajectory { id: String, question: String, f1: f64, predicted_sparql: String, gold_sparql: String, messages: Vec<Message> },
}

const EXPORT_FORMAT: &str = "kbqa-trajectories";

/// A manifest line, then one conversation per trajectory in the agent
/// prompt format.
pub fn export_training(trajectories: &[Trajectory], mut out: impl Write) -> std::io::Result<()> {
    let mut write = |line: &ExportLine| -> std::io::Result<()> {
        serde_json::to_writer(&mut out, line).map_err(std::io::Error::other)?;
        out.write_all(b"\n")
    };
    write(&ExportLine::Manifest { format: EXPORT_FORMAT.into(), version: 1, count: trajectories.len() })?;
    for t in trajectories {
        write(&ExportLine::Trajectory {
            id: t.id.clone(),
            question: t.question.clone(),
            f1: t.f1,
            predicted_sparql: t.predicted_sparql.clone(),
            gold_sparql: t.gold_sparql.clone(),
            messages: render_state_prompt(&t.state()),
        })?;
    }
    Ok(())
}

/// Actions of each exported conversation, recovered from assistant turns.
pub fn read_training(text: &str) -> Result<Vec<(String, Vec<Action>)>, String> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        match serde_json::from_str::<ExportLine>(line).map_err(|e| format!("line {}: {e}", i + 1))? {
            ExportLine::Manifest { .. } => {}
            ExportLine::Trajectory { id, messages, .. } => {
                let actions = messages
                    .iter()
                    .filter(|m| m.role == Role::Assistant)
                    .map(|m| parse_agent_output(&m.content).map_err(|e| format!("line {}: {e}", i + 1)))
                    .collect::<Result<Vec<_>, _>>()?;
                out.push((id, actions));
            }
        }
    }
    Ok(out)
}

pub fn skip_report_csv(skips: &[Skip]) -> String {
    let mut out = String::from("id,reason,detail\n");
    for s in skips {
        let _ = writeln!(out, "{},{},\"{}\"", s.id, s.reason.name(), s.detail.replace('"', "\"\""));
    }
    out
}

/// Per-type sample of `fraction` of the records (at least one per type),
/// with `boost[type]` multiplying the fraction for under-represented types.
pub fn stratified_sample(
    records: &[DatasetRecord],
    fraction: f64,
    boost: &BTreeMap<String, f64>,
    seed: u64,
) -> Vec<DatasetRecord> {
    let mut by_type: BTreeMap<String, Vec<&DatasetRecord>> = BTreeMap::new();
    for r in records {
        by_type.entry(r.qtype.clone().unwrap_or_else(|| "untyped".into())).or_default().push(r);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for (t, mut group) in by_type {
        let f = (fraction * boost.get(&t).copied().unwrap_or(1.0)).clamp(0.0, 1.0);
        let take = ((group.len() as f64 * f).ceil() as usize).clamp(1, group.len());
        group.shuffle(&mut rng);
        out.extend(group.into_iter().take(take).cloned());
    }
    out
}

/// The oversampling used for comparative and superlative questions.
pub fn default_boost() -> BTreeMap<String, f64> {
    [("Compa".to_owned(), 2.0), ("Super".to_owned(), 2.0)].into_iter().collect()
}

/// Whether the trajectory ends in `Done` right after a successful query.
pub fn ends_valid(t: &Trajectory) -> bool {
    let n = t.turns.len();
    n >= 2
        && t.turns[n - 1].action.tool == Tool::Done
        && t.turns[n - 2].action.tool == Tool::ExecuteSparql
        && t.turns[n - 2].observation.as_ref().is_some_and(|o| o.is_valid_result())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(id: &str, t: &str) -> DatasetRecord {
        DatasetRecord { id: id.into(), question: id.into(), sparql: String::new(), answers: None, qtype: Some(t.into()) }
    }

    #[test]
    fn sample_keeps_every_type() {
        let mut recs: Vec<DatasetRecord> = (0..40).map(|i| rec(&format!("c{i}"), "Conj")).collect();
        recs.extend((0..10).map(|i| rec(&format!("s{i}"), "Super")));
        let s = stratified_sample(&recs, 0.1, &default_boost(), 1);
        assert_eq!(s.iter().filter(|r| r.qtype.as_deref() == Some("Conj")).count(), 4);
        assert_eq!(s.iter().filter(|r| r.qtype.as_deref() == Some("Super")).count(), 2);
        assert_eq!(s, stratified_sample(&recs, 0.1, &default_boost(), 1));
    }

    #[test]
    fn empty_export_has_manifest() {
        let mut buf = Vec::new();
        export_training(&[], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1);
        assert!(text.contains("\"kind\":\"manifest\""));
        assert!(read_training(&text).unwrap().is_empty());
    }

    #[test]
    fn skip_csv_quotes_detail() {
        let csv = skip_report_csv(&[Skip { id: "q".into(), reason: SkipReason::Budget, detail: "a \"b\"".into() }]);
        assert_eq!(csv, "id,reason,detail\nq,budget,\"a \"\"b\"\"\"\n");
    }
}
