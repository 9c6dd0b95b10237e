use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::{bail, Context, Result};
use kbqa_core::agent::scripted::{Script, ScriptedAgent, ScriptedReward};
use kbqa_core::agent::{ChatBackend, EndpointBackend, RecordingBackend, ReplayBackend};
use kbqa_core::annotate::{
    annotate_question, default_boost, export_training, skip_report_csv, stratified_sample, Skip, Trajectory,
};
use kbqa_core::dataset::load_dataset;
use kbqa_core::kb::load_kb;
use kbqa_core::metrics::{aggregate, EvalRecord};
use kbqa_core::reward::{score_stability, NodeSamples};
use kbqa_core::search::SearchStats;
use kbqa_core::{AnswerSet, DatasetRecord, KnowledgeBase, Method, PromptAssets, SearchContext, VERSION};
use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::RunArgs;

struct Backends {
    agent: Box<dyn ChatBackend>,
    reward: Option<Box<dyn ChatBackend>>,
}

fn recorded(inner: Box<dyn ChatBackend>, dir: Option<&Path>, name: &str) -> Result<Box<dyn ChatBackend>> {
    Ok(match dir {
        Some(d) => Box::new(RecordingBackend::new(inner, d.join(name))?),
        None => inner,
    })
}

fn backends(spec: &str, cfg: &Config, record: Option<&Path>) -> Result<Backends> {
    if let Some(d) = record {
        fs::create_dir_all(d).with_context(|| format!("creating {}", d.display()))?;
    }
    let (agent, reward): (Box<dyn ChatBackend>, Box<dyn ChatBackend>) = if let Some(path) = spec.strip_prefix("scripted:") {
        let script = Script::load(path).with_context(|| format!("loading agent script {path}"))?;
        (Box::new(ScriptedAgent::new(script.clone())), Box::new(ScriptedReward::new(script)))
    } else if let Some(dir) = spec.strip_prefix("replay:") {
        let dir = Path::new(dir);
        let load = |f: &str| ReplayBackend::load(dir.join(f)).with_context(|| format!("loading {}", dir.join(f).display()));
        let reward = if dir.join("reward.jsonl").exists() { load("reward.jsonl")? } else { ReplayBackend::default() };
        (Box::new(load("agent.jsonl")?), Box::new(reward))
    } else if spec == "endpoint" {
        let agent_cfg = cfg.agent.clone().unwrap_or_default();
        let reward_cfg = cfg.reward.clone().unwrap_or_else(|| agent_cfg.clone());
        (Box::new(EndpointBackend::new(agent_cfg)?), Box::new(EndpointBackend::new(reward_cfg)?))
    } else {
        bail!("unknown agent {spec:?} (expected scripted:<script.json>, endpoint or replay:<dir>)");
    };
    Ok(Backends {
        agent: recorded(agent, record, "agent.jsonl")?,
        reward: Some(recorded(reward, record, "reward.jsonl")?),
    })
}

/// Everything a run reads, loaded once and shared by the workers.
struct Inputs {
    cfg: Config,
    kb: KnowledgeBase,
    dataset: Vec<DatasetRecord>,
    assets: PromptAssets,
    backends: Backends,
}

impl Inputs {
    fn load(args: &RunArgs) -> Result<Self> {
        let mut cfg = match &args.config {
            Some(p) => Config::load(p)?,
            None => Config::default(),
        };
        if let Some(s) = args.seed {
            cfg.search.seed = s;
        }
        if let Some(m) = args.reward_mode {
            cfg.search.reward_mode = m;
        }
        if args.workers == 0 {
            bail!("--workers must be positive");
        }
        let kb = load_kb(&args.kb).with_context(|| format!("loading KB {}", args.kb.display()))?;
        let dataset = load_dataset(&args.dataset).with_context(|| format!("loading dataset {}", args.dataset.display()))?;
        let assets = match &cfg.prompts_dir {
            Some(d) => PromptAssets::load_dir(d)?,
            None => PromptAssets::builtin(&cfg.prompt_flavor)?,
        };
        let backends = backends(&args.agent, &cfg, args.record.as_deref())?;
        fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
        Ok(Self { cfg, kb, dataset, assets, backends })
    }

    fn ctx(&self) -> SearchContext<'_> {
        SearchContext {
            kb: &self.kb,
            agent: self.backends.agent.as_ref(),
            reward: self.backends.reward.as_deref(),
            assets: &self.assets,
            config: &self.cfg.search,
        }
    }

    fn gold(&self, r: &DatasetRecord) -> AnswerSet {
        r.gold_answers(&self.kb).unwrap_or_else(|e| {
            log::warn!("{}: gold query failed: {e}", r.id);
            AnswerSet::new()
        })
    }
}

/// Runs `f` over `0..n` on `workers` threads; results come back in index
/// order regardless of scheduling.
fn par_map<T: Send>(n: usize, workers: usize, f: impl Fn(usize) -> T + Sync) -> Vec<T> {
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<T>>> = (0..n).map(|_| Mutex::new(None)).collect();
    std::thread::scope(|s| {
        for _ in 0..workers.min(n.max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let v = f(i);
                *slots[i].lock().unwrap_or_else(|e| e.into_inner()) = Some(v);
            });
        }
    });
    slots.into_iter().map(|m| m.into_inner().unwrap_or_else(|e| e.into_inner()).expect("every index ran")).collect()
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    strategy: Option<&'a str>,
    version: &'a str,
    config_digest: String,
    seed: u64,
    reward_mode: kbqa_core::RewardMode,
    agent: &'a str,
    questions: usize,
    config: &'a Config,
}

fn write_manifest(out: &Path, command: &str, strategy: Option<&str>, args: &RunArgs, inputs: &Inputs) -> Result<()> {
    let m = Manifest {
        command,
        strategy,
        version: VERSION,
        config_digest: inputs.cfg.digest(),
        seed: inputs.cfg.search.seed,
        reward_mode: inputs.cfg.search.reward_mode,
        agent: &args.agent,
        questions: inputs.dataset.len(),
        config: &inputs.cfg,
    };
    let text = serde_json::to_string_pretty(&m)?;
    fs::write(out.join("manifest.json"), text + "\n")?;
    Ok(())
}

/// One line of `predictions.jsonl`.
#[derive(Debug, Serialize, Deserialize)]
pub struct PredictionLine {
    pub id: String,
    pub question: String,
    #[serde(rename = "type")]
    pub qtype: String,
    pub strategy: String,
    pub answers: AnswerSet,
    pub sparql: Option<String>,
    /// Answers of every valid terminal, in creation order.
    pub branches: Vec<AnswerSet>,
    pub gold: AnswerSet,
    #[serde(default)]
    pub stats: Option<SearchStats>,
}

fn qtype(r: &DatasetRecord) -> String {
    r.qtype.clone().unwrap_or_else(|| "untyped".into())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

pub fn search(args: &RunArgs, method: Method) -> Result<()> {
    let inputs = Inputs::load(args)?;
    let ctx = inputs.ctx();
    let results = par_map(inputs.dataset.len(), args.workers, |i| {
        let r = &inputs.dataset[i];
        let result = method.run(ctx, &r.question);
        let mut trace = Vec::new();
        result.write_trace(&r.id, &mut trace).expect("writing to memory");
        log::info!("{}: {} nodes, stop {:?}", r.id, result.stats.node_count, result.stats.stop_reason);
        let line = PredictionLine {
            id: r.id.clone(),
            question: r.question.clone(),
            qtype: qtype(r),
            strategy: result.strategy.clone(),
            answers: result.answer.clone(),
            sparql: result.chosen_sparql.clone(),
            branches: result.predictions.iter().map(|p| p.answers.clone()).collect(),
            gold: inputs.gold(r),
            stats: Some(result.stats),
        };
        (line, trace)
    });

    let mut preds = create(&args.out.join("predictions.jsonl"))?;
    let mut traces = create(&args.out.join("traces.jsonl"))?;
    let mut records = Vec::new();
    for (line, trace) in &results {
        serde_json::to_writer(&mut preds, line)?;
        preds.write_all(b"\n")?;
        traces.write_all(trace)?;
        records.push(eval_record(line));
    }
    preds.flush()?;
    traces.flush()?;
    let report = aggregate(&records);
    fs::write(args.out.join("report.csv"), report.to_csv())?;
    let strategy = results.first().map(|r| r.0.strategy.clone());
    write_manifest(&args.out, "search", strategy.as_deref(), args, &inputs)?;
    print!("{}", report.to_csv());
    Ok(())
}

fn eval_record(line: &PredictionLine) -> EvalRecord {
    EvalRecord {
        id: line.id.clone(),
        qtype: line.qtype.clone(),
        pred: line.answers.clone(),
        gold: line.gold.clone(),
        branches: line.branches.clone(),
    }
}

pub fn eval(predictions: &Path, out: &Path) -> Result<()> {
    let text = fs::read_to_string(predictions).with_context(|| format!("reading {}", predictions.display()))?;
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let p: PredictionLine =
            serde_json::from_str(line).with_context(|| format!("{} line {}", predictions.display(), i + 1))?;
        records.push(eval_record(&p));
    }
    let report = aggregate(&records);
    fs::create_dir_all(out)?;
    fs::write(out.join("report.csv"), report.to_csv())?;
    if report.excluded > 0 {
        log::warn!("{} record(s) with empty gold excluded", report.excluded);
    }
    print!("{}", report.to_csv());
    Ok(())
}

pub fn annotate(args: &RunArgs, sample_fraction: Option<f64>) -> Result<()> {
    let mut inputs = Inputs::load(args)?;
    if let Some(f) = sample_fraction {
        if !(f > 0.0 && f <= 1.0) {
            bail!("--sample-fraction must be in (0, 1], got {f}");
        }
        inputs.dataset = stratified_sample(&inputs.dataset, f, &default_boost(), inputs.cfg.search.seed);
    }
    let ctx = inputs.ctx();
    let threshold = inputs.cfg.f1_threshold;
    let outcomes: Vec<Result<Trajectory, Skip>> = par_map(inputs.dataset.len(), args.workers, |i| {
        annotate_question(ctx, &inputs.dataset[i], threshold).and_then(|a| a.outcome)
    });
    let mut trajectories = Vec::new();
    let mut skips = Vec::new();
    for o in outcomes {
        match o {
            Ok(t) => trajectories.push(t),
            Err(s) => {
                log::info!("{}: skipped ({}): {}", s.id, s.reason.name(), s.detail);
                skips.push(s);
            }
        }
    }
    let mut raw = create(&args.out.join("trajectories.jsonl"))?;
    for t in &trajectories {
        serde_json::to_writer(&mut raw, t)?;
        raw.write_all(b"\n")?;
    }
    raw.flush()?;
    let mut training = create(&args.out.join("training.jsonl"))?;
    export_training(&trajectories, &mut training)?;
    training.flush()?;
    fs::write(args.out.join("skips.csv"), skip_report_csv(&skips))?;
    write_manifest(&args.out, "annotate", None, args, &inputs)?;
    println!("{} trajectories, {} skipped", trajectories.len(), skips.len());
    Ok(())
}

pub fn reward_stats(args: &RunArgs) -> Result<()> {
    let inputs = Inputs::load(args)?;
    if inputs.cfg.search.reward_mode == kbqa_core::RewardMode::Random {
        bail!("reward-stats needs backend-scored rewards; random mode draws no samples");
    }
    let ctx = inputs.ctx();
    let per_question: Vec<Vec<NodeSamples>> = par_map(inputs.dataset.len(), args.workers, |i| {
        let result = Method::Mcts.run(ctx, &inputs.dataset[i].question);
        result
            .tree
            .nodes
            .iter()
            .filter(|n| !n.reward_samples.is_empty())
            .map(|n| NodeSamples { depth: n.depth, values: n.reward_samples.iter().filter_map(|s| s.value).collect() })
            .collect()
    });
    let mut samples = create(&args.out.join("reward_samples.jsonl"))?;
    for (r, nodes) in inputs.dataset.iter().zip(&per_question) {
        for n in nodes {
            let line: BTreeMap<&str, serde_json::Value> = [
                ("id", serde_json::json!(r.id)),
                ("depth", serde_json::json!(n.depth)),
                ("values", serde_json::json!(n.values)),
            ]
            .into_iter()
            .collect();
            serde_json::to_writer(&mut samples, &line)?;
            samples.write_all(b"\n")?;
        }
    }
    samples.flush()?;
    let all: Vec<NodeSamples> = per_question.into_iter().flatten().collect();
    let table = score_stability(&all);
    fs::write(args.out.join("stability.csv"), table.to_csv())?;
    write_manifest(&args.out, "reward-stats", Some("mcts"), args, &inputs)?;
    print!("{}", table.to_csv());
    Ok(())
}

pub fn make_toy(out: &Path, seed: u64) -> Result<()> {
    let toy = kbqa_core::toy::generate(seed);
    kbqa_core::toy::write_toy(&toy, out).with_context(|| format!("writing toy fixture to {}", out.display()))?;
    println!("wrote {} questions to {}", toy.dataset.len(), out.display());
    Ok(())
}
