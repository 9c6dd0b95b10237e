//! Generator for a small synthetic KB, a 50-question dataset over it, and a
//! matching agent script with planted gold paths and decoys.

use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::agent::scripted::{QuestionScript, ScriptFixture};
use crate::dataset::{write_dataset, DatasetRecord};
use crate::kb::{write_kb, KbBuilder, KnowledgeBase, Literal, NodeId, PredicateId, Statement, TermValue};
use crate::query::{canonical_answers, execute};

const COUNTRIES: [&str; 10] =
    ["Avalon", "Brevia", "Caldera", "Dunmore", "Elyria", "Fenwick", "Galdor", "Harrow", "Istria", "Jorvik"];
const CITIES: [&str; 10] =
    ["Port Avel", "Bravos", "Calden", "Dunhold", "Elys", "Fenmouth", "Galdin", "Harrowgate", "Istrin", "Jorholm"];
const GOVERNMENTS: [&str; 4] =
    ["federal republic", "constitutional monarchy", "parliamentary republic", "semi-presidential republic"];
const LANGUAGES: [&str; 4] = ["Avalonian", "Brevian", "Common Tongue", "Old Galdic"];
const FIRST: [&str; 10] = ["Ada", "Bram", "Cora", "Dov", "Enid", "Finn", "Greta", "Hugo", "Iris", "Jon"];
const LAST: [&str; 10] = ["Marsh", "Vale", "Thorn", "Reed", "Stone", "Wick", "Lowe", "Hart", "Frost", "Crane"];

pub struct ToyFixture {
    pub kb: KnowledgeBase,
    pub dataset: Vec<DatasetRecord>,
    pub script: ScriptFixture,
    /// Ids of questions whose decoy branches run deep before giving up.
    pub deep_decoys: Vec<String>,
}

fn person_name(i: usize) -> String {
    format!("{} {}", FIRST[i % 10], LAST[(i + (i / 10) * 5) % 10])
}

fn anchor(label: &str) -> String {
    format!("'SELECT ?e WHERE {{ ?e p:name \"{label}\" }}'")
}

fn step(thought: &str, call: String) -> String {
    format!("Thought: {thought}\nAction: {call}")
}

fn build_kb(rng: &mut ChaCha8Rng) -> KnowledgeBase {
    let mut b = KbBuilder::new();
    let ok = "toy KB construction";
    for (p, l) in [
        ("name", "name"),
        ("capital", "capital"),
        ("population", "population"),
        ("form_of_government", "form of government"),
        ("official_language", "official language"),
        ("founded", "founded"),
        ("borders", "shares border with"),
        ("head_of_state", "head of state"),
        ("start_time", "start time"),
        ("end_time", "end time"),
        ("citizen_of", "country of citizenship"),
    ] {
        b.predicate(p, l).expect(ok);
    }
    b.class("Country", "country").expect(ok);
    let lit = |s: &str| TermValue::Literal(Literal::string(s));
    let st = |s: &str, p: &str, o: TermValue| Statement::triple(NodeId::new(s), PredicateId::new(p), o);

    for (i, g) in GOVERNMENTS.iter().enumerate() {
        b.entity(&format!("G{i}"), g, None).expect(ok);
    }
    for (i, l) in LANGUAGES.iter().enumerate() {
        b.entity(&format!("L{i}"), l, Some("language")).expect(ok);
    }
    b.entity("MLK1", "Martin Luther King", Some("German theologian")).expect(ok);
    b.entity("MLK2", "Martin Luther King, Jr.", Some("American civil rights leader")).expect(ok);
    for i in 0..20 {
        b.entity(&format!("P{i}"), &person_name(i), Some("politician")).expect(ok);
    }
    let mut order: Vec<usize> = (0..10).collect();
    order.shuffle(rng);
    for i in 0..10 {
        b.entity(&format!("C{i}"), COUNTRIES[i], Some("country")).expect(ok);
        b.entity(&format!("T{i}"), CITIES[i], Some("city")).expect(ok);
    }
    for i in 0..10 {
        let c = format!("C{i}");
        b.statement(st(&c, "name", lit(COUNTRIES[i]))).expect(ok);
        b.statement(st(&format!("T{i}"), "name", lit(CITIES[i]))).expect(ok);
        b.statement(st(&c, "capital", TermValue::node(format!("T{i}")))).expect(ok);
        let pop = (order[i] as i64 + 1) * 1_234_567 + rng.gen_range(0..100_000);
        b.statement(st(&c, "population", TermValue::Literal(Literal::integer(pop)))).expect(ok);
        b.statement(st(&c, "form_of_government", TermValue::node(format!("G{}", rng.gen_range(0..4))))).expect(ok);
        b.statement(st(&c, "official_language", TermValue::node(format!("L{}", rng.gen_range(0..4))))).expect(ok);
        b.statement(st(&c, "founded", TermValue::Literal(Literal::year(1800 + rng.gen_range(0..200))))).expect(ok);
        let y1 = 1950 + rng.gen_range(0..30);
        let y2 = y1 + 4 + rng.gen_range(0..8);
        let mut first = st(&c, "head_of_state", TermValue::node(format!("P{}", 2 * i)));
        first.qualifiers.push((PredicateId::new("start_time"), TermValue::Literal(Literal::year(y1))));
        first.qualifiers.push((PredicateId::new("end_time"), TermValue::Literal(Literal::year(y2))));
        b.statement(first).expect(ok);
        let mut second = st(&c, "head_of_state", TermValue::node(format!("P{}", 2 * i + 1)));
        second.qualifiers.push((PredicateId::new("start_time"), TermValue::Literal(Literal::year(y2))));
        b.statement(second).expect(ok);
        for p in [2 * i, 2 * i + 1] {
            b.statement(st(&format!("P{p}"), "name", lit(&person_name(p)))).expect(ok);
            b.statement(st(&format!("P{p}"), "citizen_of", TermValue::node(c.clone()))).expect(ok);
        }
    }
    let mut edges: Vec<(usize, usize)> = (0..10).map(|i| (i, (i + 1) % 10)).collect();
    for _ in 0..4 {
        let (a, c) = (rng.gen_range(0..10), rng.gen_range(0..10));
        let e = (a.min(c), a.max(c));
        if a != c && !edges.iter().any(|&(x, y)| (x.min(y), x.max(y)) == e) {
            edges.push(e);
        }
    }
    for (a, c) in edges {
        b.statement(st(&format!("C{a}"), "borders", TermValue::node(format!("C{c}")))).expect(ok);
        b.statement(st(&format!("C{c}"), "borders", TermValue::node(format!("C{a}")))).expect(ok);
    }
    b.build()
}

struct Spec {
    qtype: &'static str,
    question: String,
    sparql: String,
    /// Label searched first.
    entity: String,
    hint: &'static str,
    country: usize,
}

fn specs() -> Vec<Spec> {
    let mut out = Vec::new();
    for i in 0..10 {
        out.push(Spec {
            qtype: "QA",
            question: format!("What is the capital of {}?", COUNTRIES[i]),
            sparql: format!("SELECT ?c WHERE {{ e:C{i} p:capital ?c }}"),
            entity: COUNTRIES[i].into(),
            hint: "capital",
            country: i,
        });
    }
    for i in 0..8 {
        out.push(Spec {
            qtype: "QN",
            question: format!("How many people live in {}?", COUNTRIES[i]),
            sparql: format!("SELECT ?n WHERE {{ e:C{i} p:population ?n }}"),
            entity: COUNTRIES[i].into(),
            hint: "population",
            country: i,
        });
        let j = (i + 2) % 10;
        out.push(Spec {
            qtype: "Ct",
            question: format!("How many countries border {}?", COUNTRIES[j]),
            sparql: format!("SELECT (COUNT(DISTINCT ?b) AS ?n) WHERE {{ e:C{j} p:borders ?b }}"),
            entity: COUNTRIES[j].into(),
            hint: "border",
            country: j,
        });
        let j = (i + 1) % 10;
        let city = if i % 2 == 0 { j } else { (j + 1) % 10 };
        out.push(Spec {
            qtype: "Vf",
            question: format!("Is {} the capital of {}?", CITIES[city], COUNTRIES[j]),
            sparql: format!("ASK WHERE {{ e:C{j} p:capital e:T{city} }}"),
            entity: COUNTRIES[j].into(),
            hint: "capital",
            country: j,
        });
        let j = (i + 3) % 10;
        out.push(Spec {
            qtype: "Super",
            question: format!("Which country bordering {} has the largest population?", COUNTRIES[j]),
            sparql: format!("SELECT ?b WHERE {{ e:C{j} p:borders ?b . ?b p:population ?p }} ORDER BY DESC(?p) LIMIT 1"),
            entity: COUNTRIES[j].into(),
            hint: "border",
            country: j,
        });
        let j = (i + 4) % 10;
        let p = 2 * j + (i % 2);
        out.push(Spec {
            qtype: "QAQ",
            question: format!("When did {} become head of state of {}?", person_name(p), COUNTRIES[j]),
            sparql: format!("SELECT ?t WHERE {{ e:C{j} p:head_of_state e:P{p} . e:C{j} pq:start_time ?t }}"),
            entity: person_name(p),
            hint: "head of state",
            country: j,
        });
    }
    out
}

/// Builds the fixture. Same seed, same bytes.
pub fn generate(seed: u64) -> ToyFixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kb = build_kb(&mut rng);
    let mut dataset = Vec::new();
    let mut questions = Vec::new();
    let mut deep_decoys = Vec::new();
    for (idx, s) in specs().into_iter().enumerate() {
        let id = format!("toy-{idx:02}");
        let answers = canonical_answers(&execute(&s.sparql, &kb).expect("toy queries are valid"));
        assert!(!answers.is_empty(), "toy gold for {id} is empty");
        dataset.push(DatasetRecord {
            id: id.clone(),
            question: s.question.clone(),
            sparql: s.sparql.clone(),
            answers: Some(answers),
            qtype: Some(s.qtype.into()),
        });

        let search = step(&format!("I need to find {}.", s.entity), format!("SearchNodes(\"{}\")", s.entity));
        let exec = step("This query answers the question.", format!("ExecuteSPARQL(\"{}\")", s.sparql));
        let done = step("The result answers the question.", "Done".into());
        let patterns = step(
            &format!("I should check how {} is connected.", s.entity),
            format!("SearchGraphPatterns({}, '{}')", anchor(&s.entity), s.hint),
        );
        let other = COUNTRIES[(s.country + 3) % 10];
        let c = s.country;
        let mut decoys = vec![
            step(&format!("Maybe {other} is relevant."), format!("SearchNodes(\"{other}\")")),
            step("Let me look at other relations.", format!("SearchGraphPatterns({}, 'founded')", anchor(COUNTRIES[c]))),
            step("The language might be the answer.", format!("ExecuteSPARQL(\"SELECT ?l WHERE {{ e:C{c} p:official_language ?l }}\")")),
            step("Try the reverse direction.", format!("ExecuteSPARQL(\"SELECT ?x WHERE {{ ?x p:capital e:C{c} }}\")")),
        ];
        let deep = idx % 5 < 3;
        if deep {
            deep_decoys.push(id);
        } else {
            decoys.push(step("I think I am finished.", "Done".into()));
        }
        questions.push(QuestionScript {
            question: s.question,
            gold_paths: vec![vec![search.clone(), exec.clone(), done.clone()], vec![search, patterns, exec, done]],
            decoys,
            gold_weight: 8.0,
            decoy_depth: Some(if deep { 6 } else { 2 }),
            rules: Vec::new(),
        });
    }
    ToyFixture { kb, dataset, script: ScriptFixture { questions }, deep_decoys }
}

/// Writes `kb.jsonl`, `dataset.jsonl` and `script.json` into `dir`.
pub fn write_toy(fixture: &ToyFixture, dir: impl AsRef<Path>) -> std::io::Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let mut kb = std::io::BufWriter::new(std::fs::File::create(dir.join("kb.jsonl"))?);
    write_kb(&fixture.kb, &mut kb)?;
    kb.flush()?;
    let mut ds = std::io::BufWriter::new(std::fs::File::create(dir.join("dataset.jsonl"))?);
    write_dataset(&fixture.dataset, &mut ds)?;
    ds.flush()?;
    let script = serde_json::to_string_pretty(&fixture.script).map_err(std::io::Error::other)?;
    std::fs::write(dir.join("script.json"), script + "\n")
}
