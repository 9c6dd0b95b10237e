//! Brute-force query evaluation: every pattern scans the whole statement
//! list, bindings are name maps, no indexes.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashSet};

use kbqa_core::kb::{KnowledgeBase, Literal, LiteralKind, Statement, TermValue};
use kbqa_core::query::{CompareOp, Element, Filter, GroupPattern, PatternTerm, Projection, Query, QueryForm, TriplePattern};

type Env = BTreeMap<String, TermValue>;

pub struct Answer {
    pub rows: Vec<Vec<Option<TermValue>>>,
    pub ask: Option<bool>,
}

fn bind(env: &mut Env, term: &PatternTerm, value: &TermValue) -> bool {
    match term {
        PatternTerm::Var(v) => match env.get(&v.0) {
            Some(bound) => bound == value,
            None => {
                env.insert(v.0.clone(), value.clone());
                true
            }
        },
        PatternTerm::Node(id) => *value == TermValue::Node(id.clone()),
        PatternTerm::Literal(l) => *value == TermValue::Literal(l.clone()),
    }
}

fn value_of(env: &Env, term: &PatternTerm) -> Option<TermValue> {
    match term {
        PatternTerm::Var(v) => env.get(&v.0).cloned(),
        PatternTerm::Node(id) => Some(TermValue::Node(id.clone())),
        PatternTerm::Literal(l) => Some(TermValue::Literal(l.clone())),
    }
}

fn numeric(l: &Literal) -> Option<f64> {
    match l.kind() {
        LiteralKind::Integer | LiteralKind::Decimal | LiteralKind::Year => l.lexical().parse().ok(),
        _ => None,
    }
}

fn compare(a: &TermValue, b: &TermValue) -> Option<Ordering> {
    match (a, b) {
        (TermValue::Node(x), TermValue::Node(y)) => Some(x.as_str().cmp(y.as_str())),
        (TermValue::Literal(x), TermValue::Literal(y)) => match (numeric(x), numeric(y)) {
            (Some(u), Some(v)) => Some(u.total_cmp(&v)),
            _ => match (x.kind(), y.kind()) {
                (LiteralKind::String, LiteralKind::String) => Some(x.lexical().cmp(y.lexical())),
                (LiteralKind::Date, LiteralKind::Date) => Some(x.calendar().cmp(&y.calendar())),
                _ => None,
            },
        },
        _ => None,
    }
}

fn holds(op: CompareOp, ord: Ordering) -> bool {
    match op {
        CompareOp::Eq => ord.is_eq(),
        CompareOp::Ne => ord.is_ne(),
        CompareOp::Lt => ord.is_lt(),
        CompareOp::Gt => ord.is_gt(),
        CompareOp::Le => ord.is_le(),
        CompareOp::Ge => ord.is_ge(),
    }
}

fn passes(f: &Filter, env: &Env) -> bool {
    match (value_of(env, &f.left), value_of(env, &f.right)) {
        (Some(a), Some(b)) => compare(&a, &b).is_some_and(|o| holds(f.op, o)),
        _ => false,
    }
}

fn class(v: &TermValue) -> (&'static str, String) {
    match v {
        TermValue::Node(id) => ("node", id.as_str().to_owned()),
        TermValue::Literal(l) => {
            let c = match l.kind() {
                LiteralKind::Integer | LiteralKind::Decimal | LiteralKind::Year => "numeric",
                LiteralKind::Date => "date",
                LiteralKind::String => "string",
            };
            (c, l.lexical().to_owned())
        }
    }
}

fn order(a: Option<&TermValue>, b: Option<&TermValue>) -> Ordering {
    match (a, b) {
        (None, None) => Ordering::Equal,
        (None, _) => Ordering::Less,
        (_, None) => Ordering::Greater,
        (Some(x), Some(y)) => compare(x, y).unwrap_or_else(|| class(x).cmp(&class(y))),
    }
}

fn qualifiers(st: &Statement, pats: &[(kbqa_core::kb::PredicateId, PatternTerm)], env: Env, out: &mut Vec<Env>) {
    let Some(((key, term), rest)) = pats.split_first() else {
        out.push(env);
        return;
    };
    for (k, v) in &st.qualifiers {
        let mut e = env.clone();
        if k == key && bind(&mut e, term, v) {
            qualifiers(st, rest, e, out);
        }
    }
}

fn triple(kb: &KnowledgeBase, tp: &TriplePattern, env: &Env) -> Vec<Env> {
    let mut out = Vec::new();
    for st in kb.statements() {
        if st.predicate != tp.predicate {
            continue;
        }
        let mut e = env.clone();
        if bind(&mut e, &tp.subject, &TermValue::Node(st.subject.clone())) && bind(&mut e, &tp.object, &st.object) {
            qualifiers(st, &tp.qualifiers, e, &mut out);
        }
    }
    out
}

fn group(kb: &KnowledgeBase, g: &GroupPattern, input: Vec<Env>) -> Vec<Env> {
    let mut sols = input;
    for el in &g.elements {
        sols = match el {
            Element::Triple(tp) => sols.iter().flat_map(|e| triple(kb, tp, e)).collect(),
            Element::Union(l, r) => sols
                .into_iter()
                .flat_map(|e| {
                    let mut both = group(kb, l, vec![e.clone()]);
                    both.extend(group(kb, r, vec![e]));
                    both
                })
                .collect(),
            Element::Filter(_) => sols,
        };
    }
    for el in &g.elements {
        if let Element::Filter(f) = el {
            sols.retain(|e| passes(f, e));
        }
    }
    sols
}

pub fn run(q: &Query, kb: &KnowledgeBase) -> Answer {
    let mut sols = group(kb, &q.body, vec![Env::new()]);
    if q.form == QueryForm::Ask {
        return Answer { rows: Vec::new(), ask: Some(!sols.is_empty()) };
    }
    let mut rows: Vec<Vec<Option<TermValue>>> = match &q.projection {
        Projection::Count { var, distinct, .. } => {
            let bound: Vec<&TermValue> = sols.iter().filter_map(|e| e.get(&var.0)).collect();
            let n = if *distinct { bound.iter().collect::<BTreeSet<_>>().len() } else { bound.len() };
            vec![vec![Some(TermValue::Literal(Literal::integer(n as i64)))]]
        }
        Projection::Vars(vars) => {
            if let Some(o) = &q.order {
                // Vec::sort_by is stable, so equal keys keep solution order.
                sols.sort_by(|a, b| {
                    let ord = order(a.get(&o.var.0), b.get(&o.var.0));
                    if o.descending {
                        ord.reverse()
                    } else {
                        ord
                    }
                });
            }
            sols.iter().map(|e| vars.iter().map(|v| e.get(&v.0).cloned()).collect()).collect()
        }
        Projection::Empty => Vec::new(),
    };
    if q.distinct {
        let mut seen = HashSet::new();
        rows.retain(|r| seen.insert(r.clone()));
    }
    if let Some(n) = q.limit {
        rows.truncate(n);
    }
    Answer { rows, ask: None }
}
