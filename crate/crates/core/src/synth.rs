//! Random knowledge bases, queries and search trees for benchmarks and
//! randomized checks.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::kb::{KbBuilder, KnowledgeBase, Literal, LiteralKind, NodeId, PredicateId, Statement, TermValue};
use crate::query::{
    CompareOp, Element, Filter, GroupPattern, OrderBy, PatternTerm, Projection, Query, QueryForm, TriplePattern, Var,
};
use crate::search::Tree;
use crate::tools::{Action, Fingerprint, Tool};

#[derive(Debug, Clone, Copy)]
pub struct KbShape {
    pub entities: usize,
    pub predicates: usize,
    /// Qualifier keys, declared as extra predicates `q0..`.
    pub qualifier_keys: usize,
    pub statements: usize,
}

impl Default for KbShape {
    fn default() -> Self {
        Self { entities: 12, predicates: 4, qualifier_keys: 2, statements: 120 }
    }
}

const WORDS: [&str; 8] = ["red", "green", "blue", "amber", "Red", "delta", "echo", "fox"];

pub fn random_literal(rng: &mut impl Rng) -> Literal {
    match rng.gen_range(0..5) {
        0 | 1 => Literal::integer(rng.gen_range(0..30)),
        2 => Literal::year(rng.gen_range(1990..2010)),
        3 => Literal::string(*WORDS.choose(rng).expect("non-empty")),
        _ => Literal::new(LiteralKind::Decimal, &format!("{}.5", rng.gen_range(0..30))).expect("valid decimal"),
    }
}

fn random_value(rng: &mut impl Rng, shape: &KbShape) -> TermValue {
    if rng.gen_bool(0.5) {
        TermValue::node(format!("N{}", rng.gen_range(0..shape.entities)))
    } else {
        TermValue::Literal(random_literal(rng))
    }
}

/// Entities `N0..`, predicates `p0..`, qualifier keys `q0..`.
pub fn random_kb(rng: &mut impl Rng, shape: KbShape) -> KnowledgeBase {
    let mut b = KbBuilder::new();
    let ok = "generated ids are unique";
    for i in 0..shape.entities {
        let label = format!("{} {i}", WORDS[i % WORDS.len()]);
        b.entity(&format!("N{i}"), &label, None).expect(ok);
    }
    for i in 0..shape.predicates {
        b.predicate(&format!("p{i}"), &format!("relation {i}")).expect(ok);
    }
    for i in 0..shape.qualifier_keys {
        b.predicate(&format!("q{i}"), &format!("qualifier {i}")).expect(ok);
    }
    for _ in 0..shape.statements {
        let mut st = Statement::triple(
            NodeId::new(format!("N{}", rng.gen_range(0..shape.entities))),
            PredicateId::new(format!("p{}", rng.gen_range(0..shape.predicates))),
            random_value(rng, &shape),
        );
        if shape.qualifier_keys > 0 {
            for _ in 0..rng.gen_range(0..3) {
                let key = PredicateId::new(format!("q{}", rng.gen_range(0..shape.qualifier_keys)));
                st.qualifiers.push((key, random_value(rng, &shape)));
            }
        }
        b.statement(st).expect(ok);
    }
    b.build()
}

const VARS: [&str; 4] = ["x", "y", "z", "w"];

fn var(rng: &mut impl Rng) -> Var {
    Var::new(*VARS.choose(rng).expect("non-empty"))
}

fn term(rng: &mut impl Rng, shape: &KbShape, var_bias: f64) -> PatternTerm {
    if rng.gen_bool(var_bias) {
        return PatternTerm::Var(var(rng));
    }
    match random_value(rng, shape) {
        TermValue::Node(id) => PatternTerm::Node(id),
        TermValue::Literal(l) => PatternTerm::Literal(l),
    }
}

fn pattern(rng: &mut impl Rng, shape: &KbShape) -> TriplePattern {
    let subject = if rng.gen_bool(0.85) {
        PatternTerm::Var(var(rng))
    } else {
        PatternTerm::Node(NodeId::new(format!("N{}", rng.gen_range(0..shape.entities))))
    };
    let mut qualifiers = Vec::new();
    if shape.qualifier_keys > 0 && rng.gen_bool(0.25) {
        let key = PredicateId::new(format!("q{}", rng.gen_range(0..shape.qualifier_keys)));
        qualifiers.push((key, term(rng, shape, 0.7)));
    }
    TriplePattern {
        subject,
        predicate: PredicateId::new(format!("p{}", rng.gen_range(0..shape.predicates))),
        object: term(rng, shape, 0.6),
        qualifiers,
    }
}

/// A valid query with at most three triple patterns, at most one filter,
/// and optional UNION, COUNT, ORDER BY and LIMIT, over ids of a
/// [`random_kb`] with the same shape.
pub fn random_query(rng: &mut impl Rng, shape: &KbShape) -> Query {
    loop {
        if let Some(q) = try_query(rng, shape) {
            return q;
        }
    }
}

fn try_query(rng: &mut impl Rng, shape: &KbShape) -> Option<Query> {
    let total = rng.gen_range(1..=3);
    let mut elements = Vec::new();
    if total >= 2 && rng.gen_bool(0.3) {
        let left = GroupPattern { elements: vec![Element::Triple(pattern(rng, shape))] };
        let right = GroupPattern { elements: vec![Element::Triple(pattern(rng, shape))] };
        elements.push(Element::Union(left, right));
        if total == 3 {
            elements.push(Element::Triple(pattern(rng, shape)));
        }
    } else {
        for _ in 0..total {
            elements.push(Element::Triple(pattern(rng, shape)));
        }
    }
    let mut body = GroupPattern { elements };
    let vars = body.variables();
    if vars.is_empty() {
        return None;
    }
    if rng.gen_bool(0.4) {
        let ops = [CompareOp::Eq, CompareOp::Ne, CompareOp::Lt, CompareOp::Gt, CompareOp::Le, CompareOp::Ge];
        let right = if rng.gen_bool(0.3) {
            PatternTerm::Var(vars.choose(rng)?.clone())
        } else {
            term(rng, shape, 0.0)
        };
        let filter = Filter { left: PatternTerm::Var(vars.choose(rng)?.clone()), op: *ops.choose(rng)?, right };
        let at = rng.gen_range(0..=body.elements.len());
        body.elements.insert(at, Element::Filter(filter));
    }
    if rng.gen_bool(0.15) {
        return Some(Query {
            form: QueryForm::Ask,
            distinct: false,
            projection: Projection::Empty,
            body,
            order: None,
            limit: None,
        });
    }
    let projection = if rng.gen_bool(0.2) {
        Projection::Count { var: vars.choose(rng)?.clone(), distinct: rng.gen_bool(0.5), alias: Var::new("cnt") }
    } else {
        let k = rng.gen_range(1..=vars.len());
        let mut picked: Vec<Var> = vars.choose_multiple(rng, k).cloned().collect();
        picked.sort_by_key(|v| vars.iter().position(|u| u == v));
        Projection::Vars(picked)
    };
    let order = rng
        .gen_bool(0.3)
        .then(|| OrderBy { var: vars.choose(rng).expect("non-empty").clone(), descending: rng.gen_bool(0.5) });
    let limit = rng.gen_bool(0.3).then(|| rng.gen_range(1..=5));
    Some(Query { form: QueryForm::Select, distinct: rng.gen_bool(0.3), projection, body, order, limit })
}

/// A tree of `size` nodes with random shape and statistics. Roughly one
/// node in eight is terminal and one in ten exhausted.
pub fn random_tree(rng: &mut impl Rng, size: usize) -> Tree {
    let mut tree = Tree::new("synthetic");
    for i in 1..size.max(1) {
        let parent = loop {
            let p = rng.gen_range(0..i);
            if !tree.nodes[p].terminal {
                break p;
            }
        };
        let tool = if rng.gen_bool(0.125) { Tool::Done } else { Tool::SearchNodes };
        let arg = if tool == Tool::Done { String::new() } else { format!("\"n{i}\"") };
        let id = tree.add_child(parent, Action::new("", tool, arg), None, Fingerprint(format!("{i}")), i);
        tree.nodes[id].exhausted = tool != Tool::Done && rng.gen_bool(0.1);
    }
    // Visit counts consistent with some backpropagation history, rewards on
    // a coarse grid so ties occur.
    for i in (1..tree.nodes.len()).rev() {
        let own = rng.gen_range(0..3u64);
        let below: u64 = tree.nodes[i].children.iter().map(|&c| tree.nodes[c].n).sum();
        let n = own + below;
        tree.nodes[i].n = n;
        tree.nodes[i].w = (0..n).map(|_| f64::from(rng.gen_range(0..5u8)) * 0.25).sum();
    }
    let root_n: u64 = tree.nodes[0].children.iter().map(|&c| tree.nodes[c].n).sum();
    tree.nodes[0].n = root_n;
    tree.nodes[0].w = tree.nodes[0].children.iter().map(|&c| tree.nodes[c].w).sum();
    tree
}
