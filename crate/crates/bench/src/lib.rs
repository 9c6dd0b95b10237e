//! Workloads shared by the benchmarks.

use kbqa_core::agent::scripted::{Script, ScriptedAgent, ScriptedReward};
use kbqa_core::kb::KnowledgeBase;
use kbqa_core::synth::{random_kb, random_query, KbShape};
use kbqa_core::toy::{generate, ToyFixture};
use kbqa_core::{PromptAssets, SearchConfig, SearchContext};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub struct QueryWorkload {
    pub kb: KnowledgeBase,
    pub queries: Vec<String>,
}

/// A random KB with `statements` statements and `count` query texts over it.
pub fn query_workload(seed: u64, statements: usize, count: usize) -> QueryWorkload {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shape = KbShape { entities: (statements / 8).max(4), predicates: 6, qualifier_keys: 2, statements };
    let kb = random_kb(&mut rng, shape);
    let queries = (0..count).map(|_| random_query(&mut rng, &shape).to_string()).collect();
    QueryWorkload { kb, queries }
}

/// The toy fixture with its scripted backends.
pub struct ToyWorkload {
    pub fixture: ToyFixture,
    pub agent: ScriptedAgent,
    pub reward: ScriptedReward,
    pub assets: PromptAssets,
}

impl ToyWorkload {
    pub fn new(seed: u64) -> Self {
        let fixture = generate(seed);
        let script = Script::new(fixture.script.clone()).expect("toy script is valid");
        Self {
            agent: ScriptedAgent::new(script.clone()),
            reward: ScriptedReward::new(script),
            assets: PromptAssets::builtin("wikidata").expect("builtin prompts"),
            fixture,
        }
    }

    pub fn ctx<'a>(&'a self, config: &'a SearchConfig) -> SearchContext<'a> {
        SearchContext { kb: &self.fixture.kb, agent: &self.agent, reward: Some(&self.reward), assets: &self.assets, config }
    }
}
