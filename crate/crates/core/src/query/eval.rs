use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap, HashSet};

use crate::kb::{KnowledgeBase, Literal, LiteralKind, NodeId, PredicateId, Statement, TermValue};

use super::ast::*;
use super::ResultSet;

type Binding = Vec<Option<TermValue>>;

struct Slots(HashMap<String, usize>);

impl Slots {
    fn of(&self, v: &Var) -> usize {
        self.0[&v.0]
    }
}

/// Comparison used by FILTER. `None` means the operands are not comparable,
/// which makes every operator false.
pub fn filter_compare(a: &TermValue, b: &TermValue) -> Option<Ordering> {
    match (a, b) {
        (TermValue::Node(x), TermValue::Node(y)) => Some(x.cmp(y)),
        (TermValue::Literal(x), TermValue::Literal(y)) => {
            if let (Some(u), Some(v)) = (x.numeric(), y.numeric()) {
                return Some(u.total_cmp(&v));
            }
            match (x.kind(), y.kind()) {
                (LiteralKind::Date, LiteralKind::Date) => Some(x.calendar().cmp(&y.calendar())),
                (LiteralKind::String, LiteralKind::String) => Some(x.lexical().cmp(y.lexical())),
                _ => None,
            }
        }
        _ => None,
    }
}

// Numeric kinds share one class so the cross-class order stays transitive.
fn kind_name(v: &TermValue) -> &'static str {
    match v {
        TermValue::Node(_) => "node",
        TermValue::Literal(l) if l.kind().is_numeric() => "numeric",
        TermValue::Literal(l) => l.kind().name(),
    }
}

/// Total order used by ORDER BY: unbound first; comparable values by
/// [`filter_compare`]; otherwise by kind name, then lexical form.
pub fn order_compare(a: Option<&TermValue>, b: Option<&TermValue>) -> Ordering {
    match (a, b) {
        (None, None) => Ordering::Equal,
        (None, Some(_)) => Ordering::Less,
        (Some(_), None) => Ordering::Greater,
        (Some(x), Some(y)) => filter_compare(x, y).unwrap_or_else(|| {
            kind_name(x).cmp(kind_name(y)).then_with(|| lexical(x).cmp(lexical(y)))
        }),
    }
}

fn lexical(v: &TermValue) -> &str {
    match v {
        TermValue::Node(id) => id.as_str(),
        TermValue::Literal(l) => l.lexical(),
    }
}

fn unify(b: &mut Binding, slots: &Slots, term: &PatternTerm, value: &TermValue) -> bool {
    match term {
        PatternTerm::Var(v) => {
            let slot = &mut b[slots.of(v)];
            match slot {
                Some(bound) => bound == value,
                None => {
                    *slot = Some(value.clone());
                    true
                }
            }
        }
        PatternTerm::Node(id) => matches!(value, TermValue::Node(n) if n == id),
        PatternTerm::Literal(l) => matches!(value, TermValue::Literal(x) if x == l),
    }
}

fn resolve(b: &Binding, slots: &Slots, term: &PatternTerm) -> Option<TermValue> {
    match term {
        PatternTerm::Var(v) => b[slots.of(v)].clone(),
        PatternTerm::Node(id) => Some(TermValue::Node(id.clone())),
        PatternTerm::Literal(l) => Some(TermValue::Literal(l.clone())),
    }
}

struct Evaluator<'a> {
    kb: &'a KnowledgeBase,
    slots: Slots,
}

impl Evaluator<'_> {
    fn group(&self, g: &GroupPattern, input: Vec<Binding>) -> Vec<Binding> {
        let mut sols = input;
        for el in &g.elements {
            match el {
                Element::Triple(tp) => {
                    sols = sols.into_iter().flat_map(|b| self.triple(tp, b)).collect();
                }
                Element::Union(left, right) => {
                    sols = sols
                        .into_iter()
                        .flat_map(|b| {
                            let mut out = self.group(left, vec![b.clone()]);
                            out.extend(self.group(right, vec![b]));
                            out
                        })
                        .collect();
                }
                Element::Filter(_) => {}
            }
        }
        for el in &g.elements {
            if let Element::Filter(f) = el {
                sols.retain(|b| self.filter(f, b));
            }
        }
        sols
    }

    fn triple(&self, tp: &TriplePattern, b: Binding) -> Vec<Binding> {
        let subject = match resolve(&b, &self.slots, &tp.subject) {
            Some(TermValue::Node(id)) => Some(id),
            Some(TermValue::Literal(_)) => return Vec::new(),
            None => None,
        };
        let object = resolve(&b, &self.slots, &tp.object);
        let mut out = Vec::new();
        for idx in self.kb.match_indices(subject.as_ref(), Some(&tp.predicate), object.as_ref()) {
            let st = &self.kb.statements()[idx];
            let mut nb = b.clone();
            if !unify(&mut nb, &self.slots, &tp.subject, &TermValue::Node(st.subject.clone()))
                || !unify(&mut nb, &self.slots, &tp.object, &st.object)
            {
                continue;
            }
            self.qualifiers(st, &tp.qualifiers, nb, &mut out);
        }
        out
    }

    fn qualifiers(&self, st: &Statement, patterns: &[(PredicateId, PatternTerm)], b: Binding, out: &mut Vec<Binding>) {
        let Some(((key, value), rest)) = patterns.split_first() else {
            out.push(b);
            return;
        };
        for (k, v) in &st.qualifiers {
            if k != key {
                continue;
            }
            let mut nb = b.clone();
            if unify(&mut nb, &self.slots, value, v) {
                self.qualifiers(st, rest, nb, out);
            }
        }
    }

    fn filter(&self, f: &Filter, b: &Binding) -> bool {
        let (Some(l), Some(r)) =
            (resolve(b, &self.slots, &f.left), resolve(b, &self.slots, &f.right))
        else {
            return false;
        };
        filter_compare(&l, &r).is_some_and(|ord| f.op.holds(ord))
    }
}

pub fn evaluate(query: &Query, kb: &KnowledgeBase) -> ResultSet {
    let mut names: Vec<Var> = query.body.variables();
    // Filters may mention variables no pattern binds; they stay unbound.
    collect_filter_vars(&query.body, &mut names);
    if let Projection::Count { alias, .. } = &query.projection {
        names.push(alias.clone());
    }
    let slots = Slots(names.iter().enumerate().map(|(i, v)| (v.0.clone(), i)).collect());
    let ev = Evaluator { kb, slots };
    let mut sols = ev.group(&query.body, vec![vec![None; names.len()]]);

    if query.form == QueryForm::Ask {
        return ResultSet { variables: Vec::new(), rows: Vec::new(), ask: Some(!sols.is_empty()), labels: BTreeMap::new() };
    }

    let (variables, mut rows): (Vec<String>, Vec<Vec<Option<TermValue>>>) = match &query.projection {
        Projection::Count { var, distinct, alias } => {
            let slot = ev.slots.of(var);
            let bound = sols.iter().filter_map(|b| b[slot].as_ref());
            let count = if *distinct { bound.collect::<HashSet<_>>().len() } else { bound.count() };
            let lit = Literal::integer(count as i64);
            (vec![alias.0.clone()], vec![vec![Some(TermValue::Literal(lit))]])
        }
        Projection::Vars(vars) => {
            if let Some(order) = &query.order {
                let slot = ev.slots.of(&order.var);
                sols.sort_by(|a, b| {
                    let ord = order_compare(a[slot].as_ref(), b[slot].as_ref());
                    if order.descending {
                        ord.reverse()
                    } else {
                        ord
                    }
                });
            }
            let idx: Vec<usize> = vars.iter().map(|v| ev.slots.of(v)).collect();
            let rows = sols.into_iter().map(|b| idx.iter().map(|&i| b[i].clone()).collect()).collect();
            (vars.iter().map(|v| v.0.clone()).collect(), rows)
        }
        Projection::Empty => (Vec::new(), Vec::new()),
    };

    if query.distinct {
        let mut seen = HashSet::new();
        rows.retain(|r| seen.insert(r.clone()));
    }
    if let Some(limit) = query.limit {
        rows.truncate(limit);
    }

    let mut labels = BTreeMap::new();
    for v in rows.iter().flatten().flatten() {
        if let TermValue::Node(id) = v {
            if let Some(label) = kb.node_label(id) {
                labels.insert(id.clone(), label.to_owned());
            }
        }
    }
    ResultSet { variables, rows, ask: None, labels }
}

fn collect_filter_vars(g: &GroupPattern, names: &mut Vec<Var>) {
    for el in &g.elements {
        match el {
            Element::Filter(f) => {
                for t in [&f.left, &f.right] {
                    if let PatternTerm::Var(v) = t {
                        if !names.contains(v) {
                            names.push(v.clone());
                        }
                    }
                }
            }
            Element::Union(a, b) => {
                collect_filter_vars(a, names);
                collect_filter_vars(b, names);
            }
            Element::Triple(_) => {}
        }
    }
}

/// Renders a node as `"id (label)"` when a label is known.
pub fn render_node(id: &NodeId, label: Option<&str>) -> String {
    match label {
        Some(l) => format!("{id} ({l})"),
        None => id.to_string(),
    }
}
