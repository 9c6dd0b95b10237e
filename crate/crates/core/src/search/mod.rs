//! Tree search over agent interactions: selection, expansion with
//! result-based dedup, immediate evaluation, decayed backpropagation,
//! early stopping on valid terminals, and answer voting.

mod tree;

use std::collections::HashSet;
use std::fmt;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::agent::{propose_actions, ChatBackend, Sampling};
use crate::answer::AnswerSet;
use crate::kb::KnowledgeBase;
use crate::reward::{score_state, PromptAssets, RewardConfig, RewardMode};
use crate::tools::{observation_fingerprint, Action, Fingerprint, Toolbox};

pub use tree::{decayed_increment, uct, DecayDepth, Prediction, SearchNode, Tree};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// Global UCT argmax over selectable nodes.
    Mcts,
    /// Shallowest unexpanded node, creation order within a depth.
    Bfs,
    /// Deepest unexpanded node, creation order within a depth.
    Dfs,
    /// Uniform over selectable nodes.
    RandomSelect,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::Mcts => "mcts",
            Strategy::Bfs => "bfs",
            Strategy::Dfs => "dfs",
            Strategy::RandomSelect => "random-select",
        }
    }

    /// Whether selection looks at rewards at all. BFS and DFS do not, so
    /// they skip evaluation calls.
    pub fn uses_rewards(self) -> bool {
        matches!(self, Strategy::Mcts | Strategy::RandomSelect)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Search hyperparameters. Field names follow the experiment config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    /// Completions requested per expansion.
    pub n_agent: usize,
    /// Stop once this many valid terminals exist.
    pub early_stop_k: usize,
    /// Backpropagation decay per level beyond `max_preferred_depth`.
    pub depth_penalty: f64,
    pub max_preferred_depth: usize,
    /// Iteration budget (select + expand rounds) per question.
    pub max_simulations: usize,
    /// Nodes at this depth are never expanded.
    pub max_rounds: usize,
    pub n_reward: usize,
    pub temperature_agent: f64,
    pub temperature_reward: f64,
    pub reward_mode: RewardMode,
    pub decay_depth: DecayDepth,
    /// Consecutive fruitless expansions before a node is retired.
    pub exhaust_after: usize,
    /// Chains per question for the linear-vote baseline.
    pub linear_runs: usize,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            n_agent: 5,
            early_stop_k: 5,
            depth_penalty: 0.1,
            max_preferred_depth: 5,
            max_simulations: 50,
            max_rounds: 12,
            n_reward: 10,
            temperature_agent: 1.0,
            temperature_reward: 0.7,
            reward_mode: RewardMode::Rule,
            decay_depth: DecayDepth::PerNode,
            exhaust_after: 2,
            linear_runs: 5,
            seed: 0,
        }
    }
}

impl SearchConfig {
    /// Every violated constraint, not just the first.
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        let positive = [
            ("n_agent", self.n_agent),
            ("early_stop_k", self.early_stop_k),
            ("max_simulations", self.max_simulations),
            ("max_rounds", self.max_rounds),
            ("n_reward", self.n_reward),
            ("exhaust_after", self.exhaust_after),
            ("linear_runs", self.linear_runs),
        ];
        for (name, v) in positive {
            if v == 0 {
                errs.push(format!("{name} must be positive"));
            }
        }
        if !(0.0..1.0).contains(&self.depth_penalty) {
            errs.push(format!("depth_penalty must be in [0, 1), got {}", self.depth_penalty));
        }
        for (name, t) in [("temperature_agent", self.temperature_agent), ("temperature_reward", self.temperature_reward)] {
            if !(t.is_finite() && t >= 0.0) {
                errs.push(format!("{name} must be a non-negative number, got {t}"));
            }
        }
        errs
    }

    pub fn reward_config(&self) -> RewardConfig {
        RewardConfig { mode: self.reward_mode, n_samples: self.n_reward, temperature: self.temperature_reward }
    }
}

/// Everything a search reads. All of it is shared and immutable.
#[derive(Clone, Copy)]
pub struct SearchContext<'a> {
    pub kb: &'a KnowledgeBase,
    pub agent: &'a dyn ChatBackend,
    pub reward: Option<&'a dyn ChatBackend>,
    pub assets: &'a PromptAssets,
    pub config: &'a SearchConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    /// Valid terminals reached `early_stop_k`.
    EarlyStop,
    /// `max_simulations` iterations used.
    Budget,
    /// No node is left to expand.
    Exhausted,
    /// The caller's stop hook fired.
    Hook,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchStats {
    pub node_count: usize,
    pub max_depth: usize,
    pub iterations: usize,
    pub parse_failures: usize,
    pub backend_errors: usize,
    pub reward_calls: usize,
    pub degraded_rewards: usize,
    pub valid_terminals: usize,
    pub invalid_terminals: usize,
    pub stop_reason: StopReason,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TerminalPrediction {
    pub node: usize,
    pub sparql: String,
    pub answers: AnswerSet,
    pub branch_reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub question: String,
    pub strategy: String,
    pub answer: AnswerSet,
    pub chosen_sparql: Option<String>,
    pub predictions: Vec<TerminalPrediction>,
    pub stats: SearchStats,
    pub tree: Tree,
}

impl SearchResult {
    /// One JSON line per node, tagged with the question id and strategy.
    pub fn write_trace(&self, question_id: &str, mut out: impl Write) -> std::io::Result<()> {
        #[derive(Serialize)]
        struct Line<'a> {
            question_id: &'a str,
            strategy: &'a str,
            #[serde(flatten)]
            node: &'a SearchNode,
        }
        for node in &self.tree.nodes {
            let line = Line { question_id, strategy: &self.strategy, node };
            serde_json::to_writer(&mut out, &line).map_err(std::io::Error::other)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Groups predictions by answer set. The largest group wins; ties go to the
/// higher mean branch reward, then to the group whose first prediction came
/// earliest. The representative query is the group's earliest.
pub fn vote(predictions: &[TerminalPrediction]) -> (AnswerSet, Option<String>) {
    let mut groups: Vec<(&AnswerSet, Vec<&TerminalPrediction>)> = Vec::new();
    for p in predictions {
        match groups.iter_mut().find(|g| *g.0 == p.answers) {
            Some(g) => g.1.push(p),
            None => groups.push((&p.answers, vec![p])),
        }
    }
    let mean = |g: &[&TerminalPrediction]| g.iter().map(|p| p.branch_reward).sum::<f64>() / g.len() as f64;
    let mut best: Option<&(&AnswerSet, Vec<&TerminalPrediction>)> = None;
    for g in &groups {
        let better = match best {
            None => true,
            Some(b) => g.1.len() > b.1.len() || (g.1.len() == b.1.len() && mean(&g.1) > mean(&b.1)),
        };
        if better {
            best = Some(g);
        }
    }
    match best {
        Some((answers, members)) => ((*answers).clone(), Some(members[0].sparql.clone())),
        None => (AnswerSet::new(), None),
    }
}

/// Per-question generator seed, so results do not depend on the order in
/// which questions are processed.
pub fn question_seed(seed: u64, question: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(question.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

pub(crate) struct Engine<'a> {
    pub ctx: SearchContext<'a>,
    pub toolbox: Toolbox<'a>,
    pub tree: Tree,
    pub rng: ChaCha8Rng,
    pub iteration: usize,
    pub parse_failures: usize,
    pub backend_errors: usize,
    pub reward_calls: usize,
    pub degraded_rewards: usize,
    reward_config: RewardConfig,
}

impl<'a> Engine<'a> {
    pub fn new(ctx: SearchContext<'a>, question: &str) -> Self {
        Self {
            toolbox: Toolbox::new(ctx.kb),
            tree: Tree::new(question),
            rng: ChaCha8Rng::seed_from_u64(question_seed(ctx.config.seed, question)),
            iteration: 0,
            parse_failures: 0,
            backend_errors: 0,
            reward_calls: 0,
            degraded_rewards: 0,
            reward_config: ctx.config.reward_config(),
            ctx,
        }
    }

    /// Samples `n` actions for the state at `node`.
    pub fn propose(&mut self, node: usize, n: usize) -> Vec<Action> {
        let state = self.tree.state(node);
        let sampling = Sampling { n, temperature: self.ctx.config.temperature_agent };
        let seed = self.rng.gen::<u64>();
        match propose_actions(self.ctx.agent, &state, sampling, seed) {
            Ok(p) => {
                self.parse_failures += p.parse_failures;
                p.actions
            }
            Err(e) => {
                log::warn!("agent backend failed at node {node}: {e}");
                self.backend_errors += 1;
                Vec::new()
            }
        }
    }

    /// Executes an action and adds it as a child unless its fingerprint is
    /// already among `node`'s children.
    pub fn add_action(&mut self, node: usize, action: Action, dedup: bool) -> Option<usize> {
        let obs = self.toolbox.execute(&action);
        let fp = observation_fingerprint(&action, obs.as_ref());
        if dedup && self.child_fingerprints(node).contains(&fp) {
            return None;
        }
        Some(self.tree.add_child(node, action, obs, fp, self.iteration))
    }

    fn child_fingerprints(&self, node: usize) -> HashSet<Fingerprint> {
        self.tree.nodes[node].children.iter().filter_map(|&c| self.tree.nodes[c].fingerprint.clone()).collect()
    }

    /// Scores a new non-terminal node and records the outcome on it.
    pub fn evaluate(&mut self, node: usize) -> f64 {
        let state = self.tree.state(node);
        let out = score_state(self.ctx.reward, &self.reward_config, self.ctx.assets, &state, &mut self.rng);
        if self.reward_config.mode != RewardMode::Random {
            self.reward_calls += 1;
        }
        if out.degraded {
            self.degraded_rewards += 1;
        }
        let n = &mut self.tree.nodes[node];
        n.reward = Some(out.value);
        n.reward_samples = out.samples;
        out.value
    }

    pub fn backpropagate(&mut self, node: usize, r: f64) {
        let c = self.ctx.config;
        self.tree.backpropagate(node, r, c.depth_penalty, c.max_preferred_depth, c.decay_depth);
    }

    pub fn finish(self, strategy: &str, stop_reason: StopReason) -> SearchResult {
        let predictions: Vec<TerminalPrediction> = self
            .tree
            .nodes
            .iter()
            .filter_map(|n| {
                n.prediction.as_ref().map(|p| TerminalPrediction {
                    node: n.id,
                    sparql: p.sparql.clone(),
                    answers: p.answers.clone(),
                    branch_reward: self.tree.branch_reward(n.id),
                })
            })
            .collect();
        let (answer, chosen_sparql) = vote(&predictions);
        let valid = self.tree.valid_terminals();
        let terminals = self.tree.nodes.iter().filter(|n| n.terminal).count();
        let stats = SearchStats {
            node_count: self.tree.nodes.len(),
            max_depth: self.tree.max_depth(),
            iterations: self.iteration,
            parse_failures: self.parse_failures,
            backend_errors: self.backend_errors,
            reward_calls: self.reward_calls,
            degraded_rewards: self.degraded_rewards,
            valid_terminals: valid,
            invalid_terminals: terminals - valid,
            stop_reason,
        };
        SearchResult {
            question: self.tree.question.clone(),
            strategy: strategy.to_owned(),
            answer,
            chosen_sparql,
            predictions,
            stats,
            tree: self.tree,
        }
    }
}

pub fn run_search(ctx: SearchContext<'_>, question: &str, strategy: Strategy) -> SearchResult {
    run_search_until(ctx, question, strategy, &mut |_, _| false)
}

/// Like [`run_search`], calling `stop(tree, node)` after every new valid
/// terminal; returning `true` ends the search at once.
pub fn run_search_until(
    ctx: SearchContext<'_>,
    question: &str,
    strategy: Strategy,
    stop: &mut dyn FnMut(&Tree, usize) -> bool,
) -> SearchResult {
    let config = ctx.config;
    let mut e = Engine::new(ctx, question);
    let scoring = strategy.uses_rewards();
    let reason = loop {
        if e.tree.valid_terminals() >= config.early_stop_k {
            break StopReason::EarlyStop;
        }
        if e.iteration >= config.max_simulations {
            break StopReason::Budget;
        }
        let Some(node) = e.tree.select(strategy, config.max_rounds, &mut e.rng) else {
            break StopReason::Exhausted;
        };
        let actions = e.propose(node, config.n_agent);
        let mut children = Vec::new();
        for a in actions {
            children.extend(e.add_action(node, a, true));
        }
        let parent = &mut e.tree.nodes[node];
        parent.expansions += 1;
        if children.is_empty() {
            parent.fruitless += 1;
            if parent.fruitless >= config.exhaust_after {
                parent.exhausted = true;
            }
        } else {
            parent.fruitless = 0;
        }
        let parent_reward = parent.reward.unwrap_or(0.0);

        let mut hook_fired = false;
        for child in children {
            if e.tree.nodes[child].terminal {
                // Done adds no observation; it carries its parent's score.
                e.backpropagate(child, parent_reward);
                if e.tree.nodes[child].valid_terminal && !hook_fired && stop(&e.tree, child) {
                    hook_fired = true;
                }
            } else {
                let r = if scoring { e.evaluate(child) } else { 0.0 };
                e.backpropagate(child, r);
            }
        }
        e.iteration += 1;
        if hook_fired {
            break StopReason::Hook;
        }
    };
    e.finish(strategy.name(), reason)
}
