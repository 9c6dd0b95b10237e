#![allow(dead_code)]

use std::sync::Arc;

use kbqa_core::agent::scripted::{Script, ScriptedAgent, ScriptedReward};
use kbqa_core::answer::AnswerSet;
use kbqa_core::baselines::Method;
use kbqa_core::reward::PromptAssets;
use kbqa_core::search::{SearchConfig, SearchContext, SearchResult};
use kbqa_core::toy::{generate, ToyFixture};

pub const TOY_SEED: u64 = 11;

pub struct Toy {
    pub fixture: ToyFixture,
    pub agent: ScriptedAgent,
    pub reward: ScriptedReward,
    pub assets: PromptAssets,
}

impl Toy {
    pub fn new() -> Self {
        Self::from_fixture(generate(TOY_SEED))
    }

    pub fn from_fixture(fixture: ToyFixture) -> Self {
        let script: Arc<Script> = Script::new(fixture.script.clone()).expect("toy script is valid");
        Self {
            agent: ScriptedAgent::new(script.clone()),
            reward: ScriptedReward::new(script),
            assets: PromptAssets::builtin("wikidata").expect("builtin prompts"),
            fixture,
        }
    }

    pub fn ctx<'a>(&'a self, config: &'a SearchConfig) -> SearchContext<'a> {
        SearchContext {
            kb: &self.fixture.kb,
            agent: &self.agent,
            reward: Some(&self.reward),
            assets: &self.assets,
            config,
        }
    }

    pub fn run(&self, config: &SearchConfig, method: Method, idx: usize) -> SearchResult {
        method.run(self.ctx(config), &self.fixture.dataset[idx].question)
    }

    pub fn gold(&self, idx: usize) -> AnswerSet {
        self.fixture.dataset[idx].answers.clone().expect("toy answers are stored")
    }
}

/// The acceptance configuration for the toy set.
pub fn toy_config() -> SearchConfig {
    SearchConfig { early_stop_k: 2, max_simulations: 50, seed: 5, ..SearchConfig::default() }
}

pub fn step(thought: &str, call: &str) -> String {
    format!("Thought: {thought}\nAction: {call}")
}

pub fn done() -> String {
    step("That answers it.", "Done")
}

/// A single-question script over the toy KB.
pub fn planted(question: &str, gold: Vec<Vec<String>>, decoys: Vec<String>, decoy_depth: Option<usize>) -> Toy {
    use kbqa_core::agent::scripted::{QuestionScript, ScriptFixture};
    let mut fixture = generate(TOY_SEED);
    fixture.script = ScriptFixture {
        questions: vec![QuestionScript {
            question: question.into(),
            gold_paths: gold,
            decoys,
            gold_weight: 1.0,
            decoy_depth,
            rules: Vec::new(),
        }],
    };
    Toy::from_fixture(fixture)
}
