//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod fixed;
mod scan;

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use fixed::Fx;
use kbqa_core::agent::scripted::{QuestionScript, Script, ScriptFixture, ScriptedAgent, ScriptedReward};
use kbqa_core::agent::{BackendError, ChatBackend, CompletionRequest};
use kbqa_core::annotate::{annotate_question, replay, SkipReason, DEFAULT_F1_THRESHOLD};
use kbqa_core::metrics::{aggregate, em, empty_at_k, f1, max_at_k, rhits1, set_accuracy, EvalRecord};
use kbqa_core::query::{canonical_answers, execute};
use kbqa_core::reward::{score_stability, NodeSamples, StabilityRow};
use kbqa_core::search::{decayed_increment, run_search, uct, DecayDepth, StopReason, Tree};
use kbqa_core::synth::{random_kb, random_query, random_tree, KbShape};
use kbqa_core::tools::{Action, Tool, Toolbox};
use kbqa_core::toy::{generate, ToyFixture};
use kbqa_core::{AnswerSet, Method, PromptAssets, RewardMode, SearchConfig, SearchContext, Strategy};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const QUERY_CASES: usize = 500;
const QUERY_MAX_STATEMENTS: usize = 200;
const QUERY_TIME_LIMIT: Duration = Duration::from_secs(60);
const NUMERIC_CASES: usize = 1000;
/// Relative error bound 1e-12, as its inverse.
const NUMERIC_TOL_INVERSE: u64 = 1_000_000_000_000;
const SELECTION_CASES: usize = 200;
const DEDUP_CASES: usize = 200;
const TOY_SEED: u64 = 11;
const TOY_TIME_LIMIT: Duration = Duration::from_secs(30);
const TOY_MIN_F1: f64 = 1.0;
const DEEP_WIN_SHARE: f64 = 0.8;
const TOY_SIMULATIONS: usize = 50;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn set(items: &[&str]) -> AnswerSet {
    items.iter().copied().collect()
}

struct Toy {
    fixture: ToyFixture,
    agent: ScriptedAgent,
    reward: ScriptedReward,
    assets: PromptAssets,
}

impl Toy {
    fn new(fixture: ToyFixture) -> Self {
        let script = Script::new(fixture.script.clone()).expect("toy script");
        Self {
            agent: ScriptedAgent::new(script.clone()),
            reward: ScriptedReward::new(script),
            assets: PromptAssets::builtin("wikidata").expect("builtin prompts"),
            fixture,
        }
    }

    fn ctx<'a>(&'a self, config: &'a SearchConfig) -> SearchContext<'a> {
        SearchContext { kb: &self.fixture.kb, agent: &self.agent, reward: Some(&self.reward), assets: &self.assets, config }
    }
}

fn toy_config() -> SearchConfig {
    SearchConfig { early_stop_k: 2, max_simulations: TOY_SIMULATIONS, seed: 5, ..SearchConfig::default() }
}

// 1
fn query_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let start = Instant::now();
    let mut rows = 0;
    for case in 0..QUERY_CASES {
        let shape = KbShape {
            entities: rng.gen_range(4..=16),
            predicates: rng.gen_range(1..=5),
            qualifier_keys: rng.gen_range(0..=2),
            statements: rng.gen_range(1..=QUERY_MAX_STATEMENTS),
        };
        let kb = random_kb(&mut rng, shape);
        let q = random_query(&mut rng, &shape);
        let text = q.to_string();
        let got = execute(&text, &kb).map_err(|e| format!("case {case}: {text:?} does not parse: {e}"))?;
        let want = scan::run(&q, &kb);
        ensure(got.rows == want.rows && got.ask == want.ask, || {
            format!("case {case}: {text}\n  engine {:?} {:?}\n  oracle {:?} {:?}", got.ask, got.rows, want.ask, want.rows)
        })?;
        rows += want.rows.len();
    }
    let took = start.elapsed();
    ensure(took < QUERY_TIME_LIMIT, || format!("took {took:?}"))?;
    Ok(format!("{QUERY_CASES} queries, {rows} rows, {:.1}s", took.as_secs_f64()))
}

fn uct_oracle(w: f64, n: u64, parent: u64) -> Fx {
    let n = Fx::int(n);
    Fx::of(w).div(&n).add(&Fx::int(2).mul(&Fx::ln_int(parent)).div(&n).sqrt())
}

fn increment_oracle(r: f64, gamma: f64, d: usize, d_exp: usize) -> Fx {
    let excess = Fx::int(d.saturating_sub(d_exp) as u64);
    Fx::of(r).mul(&Fx::int(1).sub(&Fx::of(gamma).mul(&excess))).max0()
}

// 2
fn numerics() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    // (gamma, excess) pairs at or next to the clamp: gamma * excess is 1
    // exactly, or off by a rounding error of gamma.
    let boundary: Vec<(f64, usize)> = [2, 3, 4, 5, 7, 8, 9, 10, 11, 13, 17, 20]
        .iter()
        .flat_map(|&m| {
            let g = 1.0 / m as f64;
            [(g, m), (g, m - 1), (g, m + 1), (f64::from_bits(g.to_bits() - 1), m), (f64::from_bits(g.to_bits() + 1), m)]
        })
        .collect();
    let (mut identity, mut clamped) = (0, 0);
    for case in 0..NUMERIC_CASES {
        let n: u64 = match case % 4 {
            0 => 1,
            _ => rng.gen_range(1..=2000),
        };
        let parent = if case % 10 == 0 { n } else { n + rng.gen_range(0..=5000) };
        let w = rng.gen::<f64>() * n as f64;
        let got = uct(w, n, parent);
        ensure(uct_oracle(w, n, parent).close(got, NUMERIC_TOL_INVERSE), || format!("uct({w}, {n}, {parent}) = {got}"))?;

        let r: f64 = if case % 50 == 0 { 0.0 } else { rng.gen() };
        let d_exp = rng.gen_range(0..=10);
        let (gamma, d) = if case % 5 == 0 {
            let (g, excess) = boundary[(case / 5) % boundary.len()];
            (g, d_exp + excess)
        } else {
            (rng.gen::<f64>(), rng.gen_range(0..=20))
        };
        let got = decayed_increment(r, gamma, d, d_exp);
        let want = increment_oracle(r, gamma, d, d_exp);
        ensure(want.close(got, NUMERIC_TOL_INVERSE), || format!("increment({r}, {gamma:e}, {d}, {d_exp}) = {got:e}"))?;
        if d <= d_exp {
            ensure(got == r, || format!("d={d} <= d_exp={d_exp} but increment {got} != r {r}"))?;
            identity += 1;
        }
        if want == Fx::zero() && r > 0.0 {
            clamped += 1;
        }
    }
    ensure(uct(0.3, 0, 7) == f64::INFINITY, || "unvisited node is not +inf".into())?;

    // Backpropagation along chains accumulates exactly these increments.
    for case in 0..100 {
        let len = rng.gen_range(1..=15);
        let gamma = rng.gen_range(0.0..0.3);
        let d_exp = rng.gen_range(0..=6);
        let mut tree = Tree::new("chain");
        for i in 0..len {
            tree.add_child(i, Action::new("", Tool::SearchNodes, format!("\"{i}\"")), None, kbqa_core::tools::Fingerprint(i.to_string()), 0);
        }
        let mut want = vec![Fx::zero(); len + 1];
        for _ in 0..rng.gen_range(1..=8) {
            let leaf = rng.gen_range(0..=len);
            let r: f64 = rng.gen();
            tree.backpropagate(leaf, r, gamma, d_exp, DecayDepth::PerNode);
            for (i, slot) in want.iter_mut().enumerate().take(leaf + 1) {
                *slot = slot.add(&increment_oracle(r, gamma, i, d_exp));
            }
        }
        for (i, node) in tree.nodes.iter().enumerate() {
            ensure(want[i].close(node.w, NUMERIC_TOL_INVERSE), || format!("chain {case} node {i}: w = {}", node.w))?;
        }
    }
    Ok(format!("{NUMERIC_CASES} tuples ({identity} at d <= d_exp, {clamped} clamped) and 100 chains within 1e-12"))
}

fn brute_select(tree: &Tree, max_rounds: usize) -> Option<usize> {
    let score = |i: usize| {
        let node = &tree.nodes[i];
        if node.n == 0 {
            return f64::INFINITY;
        }
        let parent = node.parent.map_or(node.n, |p| tree.nodes[p].n);
        let n = node.n as f64;
        node.w / n + (2.0 * (parent as f64).ln() / n).sqrt()
    };
    let candidates: Vec<usize> = (0..tree.nodes.len())
        .filter(|&i| {
            let n = &tree.nodes[i];
            !n.terminal && !n.exhausted && n.depth < max_rounds
        })
        .collect();
    let best = candidates.iter().map(|&i| score(i)).fold(f64::NEG_INFINITY, f64::max);
    candidates.into_iter().filter(|&i| score(i) == best).min_by_key(|&i| (tree.nodes[i].depth, i))
}

// 3
fn selection() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut ties = 0;
    for case in 0..SELECTION_CASES {
        let size = rng.gen_range(1..=60);
        let tree = random_tree(&mut rng, size);
        let max_rounds = rng.gen_range(1..=8);
        let got = tree.select(Strategy::Mcts, max_rounds, &mut rng);
        let want = brute_select(&tree, max_rounds);
        ensure(got == want, || format!("case {case}: select {got:?}, brute force {want:?}"))?;
        if let Some(i) = got {
            ensure(!tree.nodes[i].terminal, || format!("case {case}: selected terminal {i}"))?;
            let u = tree.uct_of(i);
            let tied = (0..tree.nodes.len()).filter(|&j| j != i && tree.is_selectable(j, max_rounds) && tree.uct_of(j) == u).count();
            ties += usize::from(tied > 0);
        }
    }
    Ok(format!("{SELECTION_CASES} trees agree, {ties} with tied maxima"))
}

fn step(thought: &str, call: &str) -> String {
    format!("Thought: {thought}\nAction: {call}")
}

fn sparql(q: &str) -> String {
    format!("ExecuteSPARQL(\"{}\")", q.replace('"', "\\\""))
}

// 4
fn early_stop() -> Check {
    const Q: &str = "What is the capital of Avalon?";
    let mut decoys: Vec<String> = (0..6)
        .map(|i| step(&format!("Try country {i}."), &sparql(&format!("SELECT ?c WHERE {{ e:C{i} p:capital ?c }}"))))
        .collect();
    decoys.push(step("Reverse it.", &sparql("SELECT ?x WHERE { ?x p:capital e:C0 }")));
    decoys.push(step("Look it up.", "SearchNodes(\"Avalon\")"));
    decoys.push(step("Give up.", "Done"));
    let mut fixture = generate(TOY_SEED);
    fixture.script = ScriptFixture {
        questions: vec![QuestionScript {
            question: Q.into(),
            gold_paths: Vec::new(),
            decoys,
            gold_weight: 1.0,
            decoy_depth: Some(1),
            rules: Vec::new(),
        }],
    };
    let toy = Toy::new(fixture);
    let mut last_nodes = 0;
    let mut summary = Vec::new();
    let mut invalid_ignored = false;
    for k in 1..=5 {
        let cfg = SearchConfig { early_stop_k: k, n_agent: 20, max_simulations: 50, seed: 4, ..SearchConfig::default() };
        let r = run_search(toy.ctx(&cfg), Q, Strategy::Mcts);
        let s = &r.stats;
        ensure(s.stop_reason == StopReason::EarlyStop, || format!("k={k}: stopped by {:?}", s.stop_reason))?;
        ensure(s.valid_terminals >= k, || format!("k={k}: only {} valid terminals", s.valid_terminals))?;
        ensure(s.invalid_terminals > 0, || format!("k={k}: no invalid terminal was planted in the tree"))?;
        let last = s.iterations - 1;
        let before = |valid: bool| {
            r.tree.nodes.iter().filter(|n| n.terminal && n.created_at < last && (!valid || n.valid_terminal)).count()
        };
        ensure(before(true) < k, || format!("k={k}: {} valid terminals existed before the last iteration", before(true)))?;
        invalid_ignored |= before(false) >= k;
        ensure(s.node_count >= last_nodes, || format!("k={k}: {} nodes after {last_nodes}", s.node_count))?;
        last_nodes = s.node_count;
        summary.push(format!("k={k}:{}n/{}v/{}i", s.node_count, s.valid_terminals, s.invalid_terminals));
    }
    ensure(invalid_ignored, || "no k where invalid terminals alone would have met the threshold".into())?;
    Ok(summary.join(" "))
}

struct Fixed(Vec<String>);

impl ChatBackend for Fixed {
    fn complete(&self, req: &CompletionRequest) -> Result<Vec<String>, BackendError> {
        Ok(self.0.iter().take(req.n).cloned().collect())
    }
}

#[derive(PartialEq, Eq, PartialOrd, Ord)]
enum Outcome {
    Rows(Vec<String>),
    Error(String),
    Listing(String),
    Done,
}

// 5
fn dedup() -> Check {
    let fixture = generate(TOY_SEED);
    let kb = &fixture.kb;
    let queries = [
        "SELECT ?c WHERE { e:C0 p:capital ?c }",
        "SELECT ?x WHERE { e:C0 p:capital ?x }",
        "SELECT  ?c WHERE {e:C0   p:capital ?c}",
        "SELECT DISTINCT ?c WHERE { e:C0 p:capital ?c } LIMIT 4",
        "SELECT ?t WHERE { ?t p:name \"Port Avel\" }",
        "SELECT ?c WHERE { e:C1 p:capital ?c }",
        "SELECT ?n WHERE { e:C0 p:population ?n }",
        "SELECT (COUNT(?b) AS ?n) WHERE { e:C0 p:borders ?b }",
        "SELECT ?x WHERE { ?x p:capital e:C0 }",
        "SELECT ?x WHERE { ?x p:capital e:C9 }",
        "ASK WHERE { e:C0 p:capital e:T0 }",
        "ASK { e:C1 p:capital e:T1 }",
        "ASK WHERE { e:C0 p:capital e:T1 }",
        "SELECT ?x WHERE {",
        "SELECT ?x WHERE { ?x zz:capital ?y }",
    ];
    let lookups = ["\"Avalon\"", "'Avalon'", "\"Brevia\""];
    let tools = Toolbox::new(kb);
    let assets = PromptAssets::builtin("wikidata").expect("builtin prompts");
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut total = 0;
    for case in 0..DEDUP_CASES {
        let count = rng.gen_range(1..=12);
        let mut completions = Vec::new();
        let mut expected = BTreeSet::new();
        for _ in 0..count {
            let thought = format!("idea {}", rng.gen_range(0..1000));
            let pick = rng.gen_range(0..queries.len() + lookups.len() + 1);
            if pick < queries.len() {
                let q = queries[pick];
                completions.push(step(&thought, &sparql(q)));
                expected.insert(match execute(q, kb) {
                    Ok(rs) => Outcome::Rows(canonical_answers(&rs).iter().map(str::to_owned).collect()),
                    Err(e) => Outcome::Error(e.to_string()),
                });
            } else if pick < queries.len() + lookups.len() {
                let arg = lookups[pick - queries.len()];
                completions.push(step(&thought, &format!("SearchNodes({arg})")));
                let name = arg.trim_matches(|c| c == '"' || c == '\'');
                expected.insert(Outcome::Listing(tools.search_nodes(name).text));
            } else {
                completions.push(step(&thought, "Done"));
                expected.insert(Outcome::Done);
            }
        }
        completions.shuffle(&mut rng);
        let agent = Fixed(completions);
        let cfg = SearchConfig { n_agent: count, max_simulations: 1, ..SearchConfig::default() };
        let ctx = SearchContext { kb, agent: &agent, reward: None, assets: &assets, config: &cfg };
        let r = run_search(ctx, "dedup", Strategy::Bfs);
        let children = r.tree.root().children.len();
        ensure(children == expected.len(), || {
            format!("case {case}: {children} children for {} distinct results among {count} actions", expected.len())
        })?;
        total += count;
    }
    Ok(format!("{DEDUP_CASES} expansions, {total} actions"))
}

fn toy_records(toy: &Toy, cfg: &SearchConfig, method: Method) -> (Vec<EvalRecord>, Vec<usize>) {
    let mut records = Vec::new();
    let mut nodes = Vec::new();
    for q in &toy.fixture.dataset {
        let r = method.run(toy.ctx(cfg), &q.question);
        nodes.push(r.stats.node_count);
        records.push(EvalRecord {
            id: q.id.clone(),
            qtype: q.qtype.clone().unwrap_or_default(),
            pred: r.answer.clone(),
            gold: q.answers.clone().expect("toy answers are stored"),
            branches: r.predictions.iter().map(|p| p.answers.clone()).collect(),
        });
    }
    (records, nodes)
}

fn overall_f1(records: &[EvalRecord]) -> f64 {
    aggregate(records).overall().map_or(0.0, |r| r.scores.f1)
}

// 6
fn toy_end_to_end() -> Check {
    let toy = Toy::new(generate(TOY_SEED));
    let cfg = toy_config();
    let start = Instant::now();
    let (records, mcts_nodes) = toy_records(&toy, &cfg, Method::Mcts);
    let took = start.elapsed();
    let (_, bfs_nodes) = toy_records(&toy, &cfg, Method::Bfs);
    let f = overall_f1(&records);
    let deep: Vec<usize> = toy
        .fixture
        .dataset
        .iter()
        .enumerate()
        .filter(|(_, q)| toy.fixture.deep_decoys.contains(&q.id))
        .map(|(i, _)| i)
        .collect();
    let wins = deep.iter().filter(|&&i| mcts_nodes[i] < bfs_nodes[i]).count();
    let share = wins as f64 / deep.len().max(1) as f64;
    let detail = format!(
        "{} questions, F1 {f:.3}, fewer nodes than BFS on {wins}/{} deep-decoy questions, {:.1}s",
        records.len(),
        deep.len(),
        took.as_secs_f64()
    );
    ensure(records.len() == 50 && f >= TOY_MIN_F1, || detail.clone())?;
    ensure(!deep.is_empty() && share >= DEEP_WIN_SHARE, || detail.clone())?;
    ensure(took < TOY_TIME_LIMIT, || detail.clone())?;
    Ok(detail)
}

// 7
fn rule_vs_random() -> Check {
    let toy = Toy::new(generate(TOY_SEED));
    let rule = toy_config();
    let random = SearchConfig { reward_mode: RewardMode::Random, ..toy_config() };
    let f_rule = overall_f1(&toy_records(&toy, &rule, Method::Mcts).0);
    let f_random = overall_f1(&toy_records(&toy, &random, Method::Mcts).0);
    let detail = format!("rule F1 {f_rule:.3}, random F1 {f_random:.3}");
    ensure(f_rule >= f_random, || detail.clone())?;
    Ok(detail)
}

// 8
fn metrics() -> Check {
    // pred, gold, f1, rhits1, em, acc
    let cases: [(&[&str], &[&str], f64, f64, f64, f64); 20] = [
        (&["a", "b"], &["a", "b"], 1.0, 1.0, 1.0, 1.0),
        (&["a", "b"], &["b", "c"], 0.5, 0.5, 1.0, 0.0),
        (&[], &["a"], 0.0, 0.0, 0.0, 0.0),
        (&[], &["a", "b"], 0.0, 0.0, 0.0, 0.0),
        (&["a"], &["a"], 1.0, 1.0, 1.0, 1.0),
        (&["x"], &["a"], 0.0, 0.0, 0.0, 0.0),
        (&["a", "x"], &["a"], 2.0 / 3.0, 0.5, 1.0, 0.0),
        (&["b", "a"], &["a", "b"], 1.0, 1.0, 1.0, 1.0),
        (&["a"], &["a", "b"], 2.0 / 3.0, 1.0, 1.0, 0.0),
        (&["a"], &["a", "b", "c", "d"], 0.4, 1.0, 1.0, 0.0),
        (&["a", "b", "c", "d"], &["a", "b"], 2.0 / 3.0, 0.5, 1.0, 0.0),
        (&["a", "b", "c", "d"], &["a", "b", "e"], 4.0 / 7.0, 0.5, 1.0, 0.0),
        (&["a", "b", "c"], &["c", "d", "e"], 1.0 / 3.0, 1.0 / 3.0, 1.0, 0.0),
        (&["a", "b", "c", "d"], &["a"], 0.4, 0.25, 1.0, 0.0),
        (&["a", "b"], &["c", "d"], 0.0, 0.0, 0.0, 0.0),
        (&["a", "b", "c"], &["c", "b", "a"], 1.0, 1.0, 1.0, 1.0),
        (&["a", "b", "c", "d", "e"], &["a", "b"], 4.0 / 7.0, 0.4, 1.0, 0.0),
        (&["a", "b"], &["a", "b", "c"], 0.8, 1.0, 1.0, 0.0),
        (&["a", "b", "c"], &["b", "c", "d", "e"], 4.0 / 7.0, 2.0 / 3.0, 1.0, 0.0),
        (&["x", "y", "z"], &["a"], 0.0, 0.0, 0.0, 0.0),
    ];
    for (i, (p, g, f, h, e, a)) in cases.iter().enumerate() {
        let (p, g) = (set(p), set(g));
        let got = (f1(&p, &g), rhits1(&p, &g), em(&p, &g), set_accuracy(&p, &g));
        ensure(got == (*f, *h, *e, *a), || format!("case {i}: got {got:?}, want {:?}", (f, h, e, a)))?;
    }
    ensure(set_accuracy(&set(&[]), &set(&[])) == 0.0, || "two empty sets scored".into())?;

    let gold = set(&["a", "b"]);
    let branch_cases: [(Vec<AnswerSet>, f64, f64); 5] = [
        (vec![set(&["x"]), set(&["a", "c"]), set(&["a", "b"])], 1.0, 0.0),
        (vec![set(&["x"]), set(&["y"])], 0.0, 1.0),
        (vec![], 0.0, 1.0),
        (vec![set(&["a"])], 2.0 / 3.0, 0.0),
        (vec![set(&[]), set(&["a", "b", "c", "d"]), set(&["b", "x"])], 2.0 / 3.0, 0.0),
    ];
    for (i, (branches, max, empty)) in branch_cases.iter().enumerate() {
        let got = (max_at_k(branches, &gold), empty_at_k(branches, &gold));
        ensure(got == (*max, *empty), || format!("branch case {i}: got {got:?}, want {:?}", (max, empty)))?;
    }

    let rec = |id: &str, t: &str, pred: &[&str]| EvalRecord {
        id: id.into(),
        qtype: t.into(),
        pred: set(pred),
        gold: set(&["a"]),
        branches: Vec::new(),
    };
    let report = aggregate(&[rec("1", "X", &["a"]), rec("2", "Y", &["b"])]);
    let f = |t: &str| report.row(t).map(|r| r.scores.f1);
    ensure(f("X") == Some(1.0) && f("Y") == Some(0.0) && f("overall") == Some(0.5), || format!("{report:?}"))?;
    Ok(format!("{} answer-set cases, {} branch sets, macro report", cases.len(), branch_cases.len()))
}

// 9
fn stability() -> Check {
    let node = |depth: usize, values: &[f64]| NodeSamples { depth, values: values.to_vec() };
    let row = |depth, node_count, mean_std| StabilityRow { depth, node_count, mean_std };
    let tables = [
        (
            vec![
                node(1, &[0.0, 10.0]),
                node(1, &[4.0, 4.0, 4.0]),
                node(1, &[1.0, 3.0]),
                node(2, &[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]),
                node(2, &[0.0, 6.0, 6.0, 0.0]),
                node(3, &[7.0]),
                node(0, &[]),
                node(4, &[10.0, 10.0, 10.0, 10.0]),
            ],
            vec![row(1, 3, 2.0), row(2, 2, 2.5), row(4, 1, 0.0)],
            2,
        ),
        (
            vec![node(2, &[0.0, 4.0]), node(1, &[0.0, 2.0]), node(2, &[0.0, 6.0]), node(1, &[5.0, 5.0, 5.0, 9.0])],
            vec![row(1, 2, (1.0 + 3.0f64.sqrt()) / 2.0), row(2, 2, 2.5)],
            0,
        ),
        (vec![node(1, &[3.0])], vec![], 1),
    ];
    for (i, (nodes, rows, excluded)) in tables.iter().enumerate() {
        let got = score_stability(nodes);
        ensure(got.rows == *rows && got.excluded == *excluded, || format!("table {i}: {got:?}"))?;
    }
    Ok(format!("{} tables", tables.len()))
}

// 10
fn annotator() -> Check {
    let toy = Toy::new(generate(TOY_SEED));
    let cfg = toy_config();
    let mut worst = 1.0f64;
    for q in &toy.fixture.dataset {
        let a = annotate_question(toy.ctx(&cfg), q, DEFAULT_F1_THRESHOLD).map_err(|s| format!("{}: {:?}", q.id, s))?;
        let t = a.outcome.map_err(|s| format!("{}: skipped for {}", q.id, s.reason.name()))?;
        ensure(t.f1 >= DEFAULT_F1_THRESHOLD, || format!("{}: F1 {}", q.id, t.f1))?;
        replay(&toy.fixture.kb, &t).map_err(|m| format!("{}: replay differs at turn {}", q.id, m.turn))?;
        worst = worst.min(t.f1);
    }
    let mut unreachable = 0;
    for (i, q) in toy.fixture.dataset.iter().enumerate().take(5) {
        let mut record = q.clone();
        record.sparql = format!("SELECT ?g WHERE {{ e:C{i} p:form_of_government ?g }}");
        record.answers = None;
        let a = annotate_question(toy.ctx(&cfg), &record, DEFAULT_F1_THRESHOLD).map_err(|s| format!("{s:?}"))?;
        match a.outcome {
            Err(s) if s.reason == SkipReason::Budget && s.reason.name() == "budget" => unreachable += 1,
            other => return Err(format!("{}: unreachable gold gave {:?}", record.id, other.map(|t| t.f1))),
        }
    }
    Ok(format!(
        "{} trajectories replay exactly, min F1 {worst:.2}; {unreachable} unreachable skipped as budget",
        toy.fixture.dataset.len()
    ))
}

fn kbqa(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_kbqa")).args(args).output().map_err(|e| e.to_string())?;
    ensure(out.status.success(), || format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)))
}

fn same_dir(a: &Path, b: &Path) -> Result<usize, String> {
    let mut names: Vec<_> = fs::read_dir(a).map_err(|e| e.to_string())?.map(|e| e.unwrap().file_name()).collect();
    names.sort();
    for name in &names {
        let x = fs::read(a.join(name)).map_err(|e| e.to_string())?;
        let y = fs::read(b.join(name)).map_err(|e| format!("{name:?}: {e}"))?;
        ensure(x == y, || format!("{} differs from {}", a.join(name).display(), b.join(name).display()))?;
    }
    Ok(names.len())
}

// 11
fn determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let root = dir.path();
    let p = |rel: &str| root.join(rel).to_string_lossy().into_owned();
    kbqa(&["make-toy", "--out", &p("toy"), "--seed", &TOY_SEED.to_string()])?;
    fs::write(root.join("config.toml"), "early_stop_k = 2\nseed = 5\n").map_err(|e| e.to_string())?;
    let agent = format!("scripted:{}", p("toy/script.json"));
    let runs: [&[&str]; 8] = [
        &["search"],
        &["search", "--reward-mode", "random"],
        &["baseline", "--strategy", "bfs"],
        &["baseline", "--strategy", "linear-vote"],
        &["baseline", "--strategy", "random-select"],
        &["annotate"],
        &["annotate", "--sample-fraction", "0.3"],
        &["reward-stats"],
    ];
    let mut files = 0;
    for (i, cmd) in runs.iter().enumerate() {
        for (tag, workers) in [("a", "1"), ("b", "4")] {
            let out = p(&format!("run{i}{tag}"));
            let mut args: Vec<&str> = cmd.to_vec();
            let config = p("config.toml");
            let (dataset, kb) = (p("toy/dataset.jsonl"), p("toy/kb.jsonl"));
            args.extend([
                "--config", &config, "--dataset", &dataset, "--kb", &kb, "--agent", &agent, "--out", &out, "--workers", workers,
            ]);
            kbqa(&args)?;
        }
        files += same_dir(&root.join(format!("run{i}a")), &root.join(format!("run{i}b")))?;
    }
    Ok(format!("{} commands run twice (1 and 4 workers), {files} output files byte-identical", runs.len()))
}

fn main() {
    let checks: [(&str, fn() -> Check); 11] = [
        ("query engine matches brute-force oracle", query_oracle),
        ("uct and backprop increments match high-precision oracle", numerics),
        ("selection equals brute-force argmax", selection),
        ("early stop counts only valid terminals", early_stop),
        ("one child per distinct execution result", dedup),
        ("toy end-to-end search", toy_end_to_end),
        ("rule scoring at least as good as random", rule_vs_random),
        ("metrics match hand-computed values", metrics),
        ("stability tables match hand-computed values", stability),
        ("annotator trajectories and budget skips", annotator),
        ("repeated CLI runs are byte-identical", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|e| {
            Err(e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", checks.len() - failed, checks.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
