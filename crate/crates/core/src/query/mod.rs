//! Parser and evaluator for the SPARQL subset the agent writes.
//!
//! Supported: `SELECT`/`ASK`, `DISTINCT`, basic graph patterns, qualifier
//! patterns (`pq:`) scoped to the statement matched by the nearest preceding
//! `p:` pattern, single-comparison `FILTER`, `UNION`, `COUNT`, `ORDER BY`
//! and `LIMIT`. The full grammar lives in `docs/query-grammar.md`.

pub mod ast;
mod eval;
mod parser;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::answer::AnswerSet;
use crate::kb::{NodeId, TermValue};

pub use ast::{
    CompareOp, Element, Filter, GroupPattern, OrderBy, PatternTerm, Projection, Query, QueryForm, TriplePattern, Var,
};
pub use eval::{evaluate, filter_compare, order_compare, render_node};
pub use parser::parse_query;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum QueryError {
    #[error("syntax error at offset {offset}: expected {expected}, found {found}")]
    Syntax { offset: usize, expected: String, found: String },
    #[error("unknown prefix \"{prefix}:\" at offset {offset} (known prefixes: e:, p:, pq:)")]
    UnknownPrefix { offset: usize, prefix: String },
    #[error("invalid query: {message}")]
    Invalid { message: String },
}

/// Evaluation result. `ask` is set for ASK queries, which carry no rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultSet {
    pub variables: Vec<String>,
    pub rows: Vec<Vec<Option<TermValue>>>,
    pub ask: Option<bool>,
    /// Labels of every node appearing in `rows`, captured at evaluation time.
    pub labels: BTreeMap<NodeId, String>,
}

impl ResultSet {
    pub fn render_value(&self, v: &TermValue) -> String {
        match v {
            TermValue::Node(id) => render_node(id, self.labels.get(id).map(String::as_str)),
            TermValue::Literal(l) => l.lexical().to_owned(),
        }
    }

    /// A row in canonical text; `None` when every projected value is unbound.
    pub fn render_row(&self, row: &[Option<TermValue>]) -> Option<String> {
        if row.iter().all(Option::is_none) {
            return None;
        }
        let parts: Vec<String> =
            row.iter().map(|v| v.as_ref().map_or_else(String::new, |v| self.render_value(v))).collect();
        Some(parts.join(" | "))
    }

    /// Distinct rendered rows in result order (ASK renders `true`/`false`).
    pub fn rendered_rows(&self) -> Vec<String> {
        if let Some(b) = self.ask {
            return vec![b.to_string()];
        }
        let mut seen = std::collections::HashSet::new();
        self.rows.iter().filter_map(|r| self.render_row(r)).filter(|r| seen.insert(r.clone())).collect()
    }
}

/// Deduplicated, order-insensitive answers of a result set.
pub fn canonical_answers(rs: &ResultSet) -> AnswerSet {
    rs.rendered_rows().into_iter().collect()
}

/// Parses and evaluates in one step.
pub fn execute(text: &str, kb: &crate::kb::KnowledgeBase) -> Result<ResultSet, QueryError> {
    parse_query(text).map(|q| evaluate(&q, kb))
}
