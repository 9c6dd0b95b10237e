//! Comparison searches sharing the engine's tools, validity and voting.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::reward::RewardMode;
use crate::search::{run_search, Engine, SearchConfig, SearchContext, SearchResult, StopReason, Strategy};
use crate::tools::Tool;

/// `runs` independent single-action chains under one root, voted at the
/// end. Each agent step costs one iteration of `max_simulations`; the
/// search also stops once `early_stop_k` valid terminals exist.
pub fn run_linear(ctx: SearchContext<'_>, question: &str, runs: usize) -> SearchResult {
    let config = ctx.config;
    let mut e = Engine::new(ctx, question);
    let mut reason = StopReason::Exhausted;
    'runs: for _ in 0..runs {
        let mut cur = 0;
        loop {
            if e.tree.valid_terminals() >= config.early_stop_k {
                reason = StopReason::EarlyStop;
                break 'runs;
            }
            if e.iteration >= config.max_simulations {
                reason = StopReason::Budget;
                break 'runs;
            }
            if e.tree.nodes[cur].depth >= config.max_rounds {
                break;
            }
            let action = e.propose(cur, 1).into_iter().next();
            e.tree.nodes[cur].expansions += 1;
            e.iteration += 1;
            let Some(action) = action else { break };
            let done = action.tool == Tool::Done;
            let child = e.add_action(cur, action, false).expect("no dedup");
            e.backpropagate(child, 0.0);
            if done {
                break;
            }
            cur = child;
        }
    }
    if reason == StopReason::Exhausted && e.tree.valid_terminals() >= config.early_stop_k {
        reason = StopReason::EarlyStop;
    }
    let name = if runs == 1 { "linear" } else { "linear-vote" };
    e.finish(name, reason)
}

/// Search methods selectable from the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Mcts,
    Linear,
    LinearVote,
    Bfs,
    Dfs,
    /// The MCTS loop with random-mode rewards.
    Random,
    /// Uniform node selection, the alternative reading of the random
    /// baseline.
    RandomSelect,
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "mcts" => Method::Mcts,
            "linear" => Method::Linear,
            "linear-vote" => Method::LinearVote,
            "bfs" => Method::Bfs,
            "dfs" => Method::Dfs,
            "random" => Method::Random,
            "random-select" => Method::RandomSelect,
            other => {
                return Err(format!(
                    "unknown strategy {other:?} (expected mcts, linear, linear-vote, bfs, dfs, random or random-select)"
                ))
            }
        })
    }
}

impl Method {
    pub fn run(self, ctx: SearchContext<'_>, question: &str) -> SearchResult {
        match self {
            Method::Mcts => run_search(ctx, question, Strategy::Mcts),
            Method::Linear => run_linear(ctx, question, 1),
            Method::LinearVote => run_linear(ctx, question, ctx.config.linear_runs),
            Method::Bfs => run_search(ctx, question, Strategy::Bfs),
            Method::Dfs => run_search(ctx, question, Strategy::Dfs),
            Method::RandomSelect => run_search(ctx, question, Strategy::RandomSelect),
            Method::Random => {
                let config = SearchConfig { reward_mode: RewardMode::Random, ..ctx.config.clone() };
                let mut r = run_search(SearchContext { config: &config, ..ctx }, question, Strategy::Mcts);
                r.strategy = "random".into();
                r
            }
        }
    }
}
