use std::collections::BTreeSet;
use std::fmt;

use crate::kb::{Literal, LiteralKind, NodeId, PredicateId};

/// A query variable, stored without its leading `?`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(pub String);

impl Var {
    pub fn new(name: impl Into<String>) -> Self {
        Self(name.into())
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "?{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QueryForm {
    Select,
    Ask,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Projection {
    Vars(Vec<Var>),
    Count { var: Var, distinct: bool, alias: Var },
    /// ASK queries project nothing.
    Empty,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PatternTerm {
    Var(Var),
    Node(NodeId),
    Literal(Literal),
}

impl PatternTerm {
    pub fn var(&self) -> Option<&Var> {
        match self {
            PatternTerm::Var(v) => Some(v),
            _ => None,
        }
    }
}

/// A main triple pattern plus the qualifier patterns scoped to the statement
/// it matches.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TriplePattern {
    pub subject: PatternTerm,
    pub predicate: PredicateId,
    pub object: PatternTerm,
    pub qualifiers: Vec<(PredicateId, PatternTerm)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompareOp {
    Eq,
    Ne,
    Lt,
    Gt,
    Le,
    Ge,
}

impl CompareOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CompareOp::Eq => "=",
            CompareOp::Ne => "!=",
            CompareOp::Lt => "<",
            CompareOp::Gt => ">",
            CompareOp::Le => "<=",
            CompareOp::Ge => ">=",
        }
    }

    pub fn holds(self, ord: std::cmp::Ordering) -> bool {
        use std::cmp::Ordering::*;
        match self {
            CompareOp::Eq => ord == Equal,
            CompareOp::Ne => ord != Equal,
            CompareOp::Lt => ord == Less,
            CompareOp::Gt => ord == Greater,
            CompareOp::Le => ord != Greater,
            CompareOp::Ge => ord != Less,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Filter {
    pub left: PatternTerm,
    pub op: CompareOp,
    pub right: PatternTerm,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Element {
    Triple(TriplePattern),
    Filter(Filter),
    Union(GroupPattern, GroupPattern),
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct GroupPattern {
    pub elements: Vec<Element>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrderBy {
    pub var: Var,
    pub descending: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Query {
    pub form: QueryForm,
    pub distinct: bool,
    pub projection: Projection,
    pub body: GroupPattern,
    pub order: Option<OrderBy>,
    pub limit: Option<usize>,
}

impl GroupPattern {
    /// Variables in first-appearance order (patterns before filters).
    pub fn variables(&self) -> Vec<Var> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        self.collect_vars(&mut seen, &mut out);
        out
    }

    fn collect_vars(&self, seen: &mut BTreeSet<Var>, out: &mut Vec<Var>) {
        let push = |t: &PatternTerm, seen: &mut BTreeSet<Var>, out: &mut Vec<Var>| {
            if let PatternTerm::Var(v) = t {
                if seen.insert(v.clone()) {
                    out.push(v.clone());
                }
            }
        };
        for el in &self.elements {
            match el {
                Element::Triple(tp) => {
                    push(&tp.subject, seen, out);
                    push(&tp.object, seen, out);
                    for (_, q) in &tp.qualifiers {
                        push(q, seen, out);
                    }
                }
                Element::Union(a, b) => {
                    a.collect_vars(seen, out);
                    b.collect_vars(seen, out);
                }
                Element::Filter(_) => {}
            }
        }
    }

    /// Whether at least one triple pattern is reachable from this group.
    pub fn has_triple(&self) -> bool {
        self.elements.iter().any(|e| match e {
            Element::Triple(_) => true,
            Element::Union(a, b) => a.has_triple() && b.has_triple(),
            Element::Filter(_) => false,
        })
    }
}

pub(crate) fn write_literal(f: &mut impl fmt::Write, lit: &Literal) -> fmt::Result {
    let escaped = escape(lit.lexical());
    match lit.kind() {
        LiteralKind::String => write!(f, "\"{escaped}\""),
        kind => write!(f, "\"{escaped}\"^^{}", kind.name()),
    }
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

impl fmt::Display for PatternTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PatternTerm::Var(v) => write!(f, "{v}"),
            PatternTerm::Node(id) => write!(f, "e:{id}"),
            PatternTerm::Literal(lit) => write_literal(f, lit),
        }
    }
}

impl fmt::Display for GroupPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for el in &self.elements {
            match el {
                Element::Triple(tp) => {
                    write!(f, " {} p:{} {} .", tp.subject, tp.predicate, tp.object)?;
                    for (qp, qv) in &tp.qualifiers {
                        write!(f, " {} pq:{} {} .", tp.subject, qp, qv)?;
                    }
                }
                Element::Filter(flt) => write!(f, " FILTER({} {} {})", flt.left, flt.op.symbol(), flt.right)?,
                Element::Union(a, b) => write!(f, " {a} UNION {b}")?,
            }
        }
        f.write_str(" }")
    }
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.form {
            QueryForm::Ask => f.write_str("ASK")?,
            QueryForm::Select => {
                f.write_str("SELECT")?;
                if self.distinct {
                    f.write_str(" DISTINCT")?;
                }
                match &self.projection {
                    Projection::Vars(vars) => {
                        for v in vars {
                            write!(f, " {v}")?;
                        }
                    }
                    Projection::Count { var, distinct, alias } => {
                        let d = if *distinct { "DISTINCT " } else { "" };
                        write!(f, " (COUNT({d}{var}) AS {alias})")?;
                    }
                    Projection::Empty => {}
                }
            }
        }
        write!(f, " WHERE {}", self.body)?;
        if let Some(o) = &self.order {
            let dir = if o.descending { "DESC" } else { "ASC" };
            write!(f, " ORDER BY {dir}({})", o.var)?;
        }
        if let Some(l) = self.limit {
            write!(f, " LIMIT {l}")?;
        }
        Ok(())
    }
}
