//! In-memory knowledge base: entities, classes, predicates, literals and
//! statements with optional qualifiers.
//!
//! A KB is loaded once from a line-oriented JSON file and is immutable
//! afterwards. Every statement is addressed by its load position, which is
//! also the deterministic order returned by [`KnowledgeBase::match_statements`].

mod file;
pub mod label;

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use file::{load_kb, parse_kb, write_kb};

/// Identifier of an entity or class node.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub String);

/// Identifier of a predicate (relation or qualifier key).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PredicateId(pub String);

impl NodeId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl PredicateId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for PredicateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LiteralKind {
    String,
    Integer,
    Decimal,
    Date,
    Year,
}

impl LiteralKind {
    pub fn name(self) -> &'static str {
        match self {
            LiteralKind::String => "string",
            LiteralKind::Integer => "integer",
            LiteralKind::Decimal => "decimal",
            LiteralKind::Date => "date",
            LiteralKind::Year => "year",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "string" => LiteralKind::String,
            "integer" => LiteralKind::Integer,
            "decimal" => LiteralKind::Decimal,
            "date" => LiteralKind::Date,
            "year" => LiteralKind::Year,
            _ => return None,
        })
    }

    pub fn is_numeric(self) -> bool {
        matches!(self, LiteralKind::Integer | LiteralKind::Decimal | LiteralKind::Year)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("invalid {kind} literal {lexical:?}")]
pub struct LiteralError {
    pub kind: &'static str,
    pub lexical: String,
}

/// A typed literal value. The lexical form is always stored canonically, so
/// structural equality is value equality within a kind.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Literal {
    kind: LiteralKind,
    lexical: String,
}

impl Literal {
    pub fn new(kind: LiteralKind, lexical: &str) -> Result<Self, LiteralError> {
        let bad = || LiteralError { kind: kind.name(), lexical: lexical.to_owned() };
        let canonical = match kind {
            LiteralKind::String => lexical.to_owned(),
            LiteralKind::Integer => lexical.trim().parse::<i64>().map_err(|_| bad())?.to_string(),
            LiteralKind::Year => lexical.trim().parse::<i32>().map_err(|_| bad())?.to_string(),
            LiteralKind::Decimal => {
                let v = lexical.trim().parse::<f64>().map_err(|_| bad())?;
                if !v.is_finite() {
                    return Err(bad());
                }
                // `{}` prints the shortest representation that round-trips.
                let v = if v == 0.0 { 0.0 } else { v };
                format!("{v}")
            }
            LiteralKind::Date => {
                let (y, m, d) = parse_date(lexical.trim()).ok_or_else(bad)?;
                format_date(y, m, d)
            }
        };
        Ok(Self { kind, lexical: canonical })
    }

    pub fn string(text: impl Into<String>) -> Self {
        Self { kind: LiteralKind::String, lexical: text.into() }
    }

    pub fn integer(v: i64) -> Self {
        Self { kind: LiteralKind::Integer, lexical: v.to_string() }
    }

    pub fn year(v: i32) -> Self {
        Self { kind: LiteralKind::Year, lexical: v.to_string() }
    }

    pub fn kind(&self) -> LiteralKind {
        self.kind
    }

    pub fn lexical(&self) -> &str {
        &self.lexical
    }

    /// Present iff the kind is integer, decimal or year.
    pub fn numeric(&self) -> Option<f64> {
        if self.kind.is_numeric() {
            self.lexical.parse::<f64>().ok()
        } else {
            None
        }
    }

    /// `(year, month, day)` for date literals.
    pub fn calendar(&self) -> Option<(i32, u32, u32)> {
        match self.kind {
            LiteralKind::Date => parse_date(&self.lexical),
            _ => None,
        }
    }
}

fn parse_date(text: &str) -> Option<(i32, u32, u32)> {
    let (neg, body) = match text.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, text),
    };
    let mut parts = body.split('-');
    let y = parts.next()?;
    let m = parts.next()?;
    let d = parts.next()?;
    if parts.next().is_some() || y.is_empty() || m.len() != 2 || d.len() != 2 {
        return None;
    }
    if !(y.bytes().chain(m.bytes()).chain(d.bytes())).all(|b| b.is_ascii_digit()) {
        return None;
    }
    let y: i32 = y.parse().ok()?;
    let m: u32 = m.parse().ok()?;
    let d: u32 = d.parse().ok()?;
    if !(1..=12).contains(&m) || !(1..=31).contains(&d) {
        return None;
    }
    Some((if neg { -y } else { y }, m, d))
}

fn format_date(y: i32, m: u32, d: u32) -> String {
    if y < 0 {
        format!("-{:04}-{m:02}-{d:02}", -y)
    } else {
        format!("{y:04}-{m:02}-{d:02}")
    }
}

/// Object position of a statement: a node or a literal.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TermValue {
    Node(NodeId),
    Literal(Literal),
}

impl TermValue {
    pub fn node(id: impl Into<String>) -> Self {
        TermValue::Node(NodeId::new(id))
    }

    pub fn as_node(&self) -> Option<&NodeId> {
        match self {
            TermValue::Node(id) => Some(id),
            TermValue::Literal(_) => None,
        }
    }
}

/// A subject-predicate-object triple with an optional qualifier list.
#[derive(Debug, Clone)]
pub struct Statement {
    pub subject: NodeId,
    pub predicate: PredicateId,
    pub object: TermValue,
    pub qualifiers: Vec<(PredicateId, TermValue)>,
}

impl Statement {
    pub fn triple(subject: NodeId, predicate: PredicateId, object: TermValue) -> Self {
        Self { subject, predicate, object, qualifiers: Vec::new() }
    }

    fn sorted_qualifiers(&self) -> Vec<&(PredicateId, TermValue)> {
        let mut q: Vec<_> = self.qualifiers.iter().collect();
        q.sort();
        q
    }
}

// Qualifier order does not matter for equality.
impl PartialEq for Statement {
    fn eq(&self, other: &Self) -> bool {
        self.subject == other.subject
            && self.predicate == other.predicate
            && self.object == other.object
            && self.qualifiers.len() == other.qualifiers.len()
            && self.sorted_qualifiers() == other.sorted_qualifiers()
    }
}

impl Eq for Statement {}

impl PartialOrd for Statement {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Statement {
    fn cmp(&self, other: &Self) -> Ordering {
        (&self.subject, &self.predicate, &self.object, self.sorted_qualifiers()).cmp(&(
            &other.subject,
            &other.predicate,
            &other.object,
            other.sorted_qualifiers(),
        ))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeMeta {
    pub id: NodeId,
    pub label: String,
    pub description: Option<String>,
    pub is_class: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredicateMeta {
    pub id: PredicateId,
    pub label: String,
}

#[derive(Debug, Error)]
pub enum KbError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: reference to undeclared {what} {id:?}")]
    Dangling { line: usize, what: &'static str, id: String },
    #[error("line {line}: duplicate {what} id {id:?}")]
    Duplicate { line: usize, what: &'static str, id: String },
    #[error("missing manifest record on the first line")]
    MissingManifest,
    #[error("manifest declares {declared} {field} but the file contains {actual}")]
    ManifestMismatch { field: &'static str, declared: usize, actual: usize },
    #[error("unknown node id {0:?}")]
    UnknownId(String),
}

/// Immutable knowledge base. Safe to share across threads.
#[derive(Debug, Clone, Default)]
pub struct KnowledgeBase {
    nodes: Vec<NodeMeta>,
    node_index: HashMap<NodeId, usize>,
    predicates: Vec<PredicateMeta>,
    predicate_index: HashMap<PredicateId, usize>,
    statements: Vec<Statement>,
    by_subject: HashMap<NodeId, Vec<usize>>,
    by_predicate: HashMap<PredicateId, Vec<usize>>,
    label_index: HashMap<String, Vec<NodeId>>,
}

/// Incremental constructor that enforces the reference invariants.
#[derive(Debug, Default)]
pub struct KbBuilder {
    kb: KnowledgeBase,
}

impl KbBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn entity(&mut self, id: &str, label: &str, description: Option<&str>) -> Result<&mut Self, KbError> {
        self.add_node(id, label, description, false, 0)?;
        Ok(self)
    }

    pub fn class(&mut self, id: &str, label: &str) -> Result<&mut Self, KbError> {
        self.add_node(id, label, None, true, 0)?;
        Ok(self)
    }

    pub fn predicate(&mut self, id: &str, label: &str) -> Result<&mut Self, KbError> {
        self.add_predicate(id, label, 0)?;
        Ok(self)
    }

    pub fn statement(&mut self, statement: Statement) -> Result<&mut Self, KbError> {
        self.add_statement(statement, 0)?;
        Ok(self)
    }

    pub fn build(self) -> KnowledgeBase {
        self.kb
    }

    pub(crate) fn add_node(
        &mut self,
        id: &str,
        label: &str,
        description: Option<&str>,
        is_class: bool,
        line: usize,
    ) -> Result<(), KbError> {
        let kb = &mut self.kb;
        let id = NodeId::new(id);
        if kb.node_index.contains_key(&id) {
            return Err(KbError::Duplicate { line, what: "node", id: id.0 });
        }
        kb.node_index.insert(id.clone(), kb.nodes.len());
        kb.label_index.entry(label::normalize(label)).or_default().push(id.clone());
        kb.nodes.push(NodeMeta {
            id,
            label: label.to_owned(),
            description: description.map(str::to_owned),
            is_class,
        });
        Ok(())
    }

    pub(crate) fn add_predicate(&mut self, id: &str, label: &str, line: usize) -> Result<(), KbError> {
        let kb = &mut self.kb;
        let id = PredicateId::new(id);
        if kb.predicate_index.contains_key(&id) {
            return Err(KbError::Duplicate { line, what: "predicate", id: id.0 });
        }
        kb.predicate_index.insert(id.clone(), kb.predicates.len());
        kb.predicates.push(PredicateMeta { id, label: label.to_owned() });
        Ok(())
    }

    pub(crate) fn add_statement(&mut self, st: Statement, line: usize) -> Result<(), KbError> {
        let kb = &mut self.kb;
        let dangling_node = |id: &NodeId| KbError::Dangling { line, what: "node", id: id.0.clone() };
        let dangling_pred = |id: &PredicateId| KbError::Dangling { line, what: "predicate", id: id.0.clone() };
        if !kb.node_index.contains_key(&st.subject) {
            return Err(dangling_node(&st.subject));
        }
        if !kb.predicate_index.contains_key(&st.predicate) {
            return Err(dangling_pred(&st.predicate));
        }
        if let TermValue::Node(o) = &st.object {
            if !kb.node_index.contains_key(o) {
                return Err(dangling_node(o));
            }
        }
        for (qp, qv) in &st.qualifiers {
            if !kb.predicate_index.contains_key(qp) {
                return Err(dangling_pred(qp));
            }
            if let TermValue::Node(o) = qv {
                if !kb.node_index.contains_key(o) {
                    return Err(dangling_node(o));
                }
            }
        }
        let idx = kb.statements.len();
        kb.by_subject.entry(st.subject.clone()).or_default().push(idx);
        kb.by_predicate.entry(st.predicate.clone()).or_default().push(idx);
        kb.statements.push(st);
        Ok(())
    }
}

impl KnowledgeBase {
    pub fn statements(&self) -> &[Statement] {
        &self.statements
    }

    /// Entities and classes in declaration order.
    pub fn nodes(&self) -> &[NodeMeta] {
        &self.nodes
    }

    pub fn predicates(&self) -> &[PredicateMeta] {
        &self.predicates
    }

    pub fn entity_count(&self) -> usize {
        self.nodes.iter().filter(|n| !n.is_class).count()
    }

    pub fn class_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_class).count()
    }

    pub fn has_node(&self, id: &NodeId) -> bool {
        self.node_index.contains_key(id)
    }

    pub fn has_predicate(&self, id: &PredicateId) -> bool {
        self.predicate_index.contains_key(id)
    }

    /// Label, description and class flag of a node, verbatim as loaded.
    pub fn node_meta(&self, id: &NodeId) -> Result<&NodeMeta, KbError> {
        self.node_index
            .get(id)
            .map(|&i| &self.nodes[i])
            .ok_or_else(|| KbError::UnknownId(id.0.clone()))
    }

    pub fn node_label(&self, id: &NodeId) -> Option<&str> {
        self.node_index.get(id).map(|&i| self.nodes[i].label.as_str())
    }

    pub fn predicate_label(&self, id: &PredicateId) -> Option<&str> {
        self.predicate_index.get(id).map(|&i| self.predicates[i].label.as_str())
    }

    /// Nodes whose normalized label equals the normalized `text`.
    pub fn nodes_with_label(&self, text: &str) -> &[NodeId] {
        self.label_index.get(&label::normalize(text)).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn label_index(&self) -> &HashMap<String, Vec<NodeId>> {
        &self.label_index
    }

    /// Statements agreeing with every bound position, in load order.
    pub fn match_statements(
        &self,
        subject: Option<&NodeId>,
        predicate: Option<&PredicateId>,
        object: Option<&TermValue>,
    ) -> Vec<&Statement> {
        self.match_indices(subject, predicate, object).into_iter().map(|i| &self.statements[i]).collect()
    }

    pub(crate) fn match_indices(
        &self,
        subject: Option<&NodeId>,
        predicate: Option<&PredicateId>,
        object: Option<&TermValue>,
    ) -> Vec<usize> {
        let keep = |i: &usize| {
            let st = &self.statements[*i];
            subject.map_or(true, |s| &st.subject == s)
                && predicate.map_or(true, |p| &st.predicate == p)
                && object.map_or(true, |o| &st.object == o)
        };
        let by_s = subject.map(|s| self.by_subject.get(s).map(Vec::as_slice).unwrap_or(&[]));
        let by_p = predicate.map(|p| self.by_predicate.get(p).map(Vec::as_slice).unwrap_or(&[]));
        let candidates: Box<dyn Iterator<Item = usize>> = match (by_s, by_p) {
            (Some(a), Some(b)) => Box::new(if a.len() <= b.len() { a } else { b }.iter().copied()),
            (Some(a), None) | (None, Some(a)) => Box::new(a.iter().copied()),
            (None, None) => Box::new(0..self.statements.len()),
        };
        candidates.filter(keep).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> KnowledgeBase {
        let mut b = KbBuilder::new();
        b.entity("e1", "Alpha", Some("first")).unwrap();
        b.entity("e2", "Beta", None).unwrap();
        b.class("c1", "Thing").unwrap();
        b.predicate("knows", "knows").unwrap();
        b.predicate("since", "since").unwrap();
        b.statement(Statement::triple(NodeId::new("e1"), PredicateId::new("knows"), TermValue::node("e2")))
            .unwrap();
        b.statement(Statement {
            subject: NodeId::new("e1"),
            predicate: PredicateId::new("since"),
            object: TermValue::Literal(Literal::year(1990)),
            qualifiers: vec![],
        })
        .unwrap();
        b.build()
    }

    #[test]
    fn literal_canonical_forms() {
        assert_eq!(Literal::new(LiteralKind::Integer, "+007").unwrap().lexical(), "7");
        assert_eq!(Literal::new(LiteralKind::Decimal, "3.50").unwrap().lexical(), "3.5");
        assert_eq!(Literal::new(LiteralKind::Date, "1990-01-05").unwrap().calendar(), Some((1990, 1, 5)));
        assert!(Literal::new(LiteralKind::Date, "1990-13-05").is_err());
        assert!(Literal::new(LiteralKind::Integer, "x").is_err());
        assert_eq!(Literal::year(1990).numeric(), Some(1990.0));
        assert_eq!(Literal::string("a").numeric(), None);
    }

    #[test]
    fn literal_equality_is_kind_and_lexical() {
        let a = Literal::new(LiteralKind::Decimal, "1.0").unwrap();
        let b = Literal::new(LiteralKind::Decimal, "1").unwrap();
        assert_eq!(a, b);
        assert_ne!(Literal::integer(1), Literal::year(1));
    }

    #[test]
    fn qualifier_order_is_irrelevant() {
        let q1 = (PredicateId::new("a"), TermValue::node("x"));
        let q2 = (PredicateId::new("b"), TermValue::node("y"));
        let mk = |q: Vec<(PredicateId, TermValue)>| Statement {
            subject: NodeId::new("s"),
            predicate: PredicateId::new("p"),
            object: TermValue::node("o"),
            qualifiers: q,
        };
        assert_eq!(mk(vec![q1.clone(), q2.clone()]), mk(vec![q2.clone(), q1.clone()]));
        assert_ne!(mk(vec![q1.clone()]), mk(vec![q1, q2]));
    }

    #[test]
    fn match_by_subject_returns_outgoing() {
        let kb = tiny();
        assert_eq!(kb.match_statements(Some(&NodeId::new("e1")), None, None).len(), 2);
        assert_eq!(kb.match_statements(None, None, None).len(), 2);
        assert!(kb.match_statements(Some(&NodeId::new("nope")), None, None).is_empty());
    }

    #[test]
    fn node_meta_lookup() {
        let kb = tiny();
        assert_eq!(kb.node_meta(&NodeId::new("e1")).unwrap().label, "Alpha");
        assert!(kb.node_meta(&NodeId::new("c1")).unwrap().is_class);
        assert!(matches!(kb.node_meta(&NodeId::new("zz")), Err(KbError::UnknownId(_))));
    }

    #[test]
    fn dangling_statement_rejected() {
        let mut b = KbBuilder::new();
        b.entity("e1", "A", None).unwrap();
        b.predicate("p", "p").unwrap();
        let err = b
            .statement(Statement::triple(NodeId::new("e1"), PredicateId::new("p"), TermValue::node("e9")))
            .unwrap_err();
        assert!(matches!(err, KbError::Dangling { id, .. } if id == "e9"));
    }

    #[test]
    fn label_index_holds_every_node_once() {
        let kb = tiny();
        let total: usize = kb.label_index().values().map(Vec::len).sum();
        assert_eq!(total, kb.nodes().len());
        assert_eq!(kb.nodes_with_label("ALPHA"), &[NodeId::new("e1")]);
    }
}
