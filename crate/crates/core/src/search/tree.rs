use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::agent::{AgentState, Step};
use crate::answer::AnswerSet;
use crate::reward::RewardSample;
use crate::tools::{Action, Fingerprint, Observation, Tool};

use super::Strategy;

/// Exploration-exploitation score. Unvisited nodes score `+inf`.
pub fn uct(w: f64, n: u64, parent_visits: u64) -> f64 {
    if n == 0 {
        return f64::INFINITY;
    }
    let n = n as f64;
    w / n + (2.0 * (parent_visits as f64).ln() / n).sqrt()
}

/// Depth-decayed reward credit, clamped at zero.
pub fn decayed_increment(r: f64, gamma: f64, depth: usize, d_exp: usize) -> f64 {
    let excess = depth.saturating_sub(d_exp) as f64;
    // Single rounding of 1 - gamma * excess; the plain form cancels to 0
    // for products just below 1.
    (r * gamma.mul_add(-excess, 1.0)).max(0.0)
}

/// Which depth the backpropagation decay uses.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecayDepth {
    /// Each updated node decays by its own depth.
    #[default]
    PerNode,
    /// Every node on the path decays by the evaluated node's depth.
    EvaluatedNode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub sparql: String,
    pub answers: AnswerSet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchNode {
    pub id: usize,
    pub parent: Option<usize>,
    pub action: Option<Action>,
    pub observation: Option<Observation>,
    pub fingerprint: Option<Fingerprint>,
    pub w: f64,
    pub n: u64,
    pub depth: usize,
    pub terminal: bool,
    pub valid_terminal: bool,
    pub exhausted: bool,
    pub prediction: Option<Prediction>,
    pub children: Vec<usize>,
    /// Number of times this node was expanded.
    pub expansions: usize,
    /// Consecutive expansions that produced no new child.
    pub fruitless: usize,
    /// Reward of this node's own evaluation, if it was evaluated.
    pub reward: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub reward_samples: Vec<RewardSample>,
    /// Iteration in which the node was created (logical time).
    pub created_at: usize,
}

impl SearchNode {
    fn new(id: usize, parent: Option<usize>, depth: usize, created_at: usize) -> Self {
        Self {
            id,
            parent,
            action: None,
            observation: None,
            fingerprint: None,
            w: 0.0,
            n: 0,
            depth,
            terminal: false,
            valid_terminal: false,
            exhausted: false,
            prediction: None,
            children: Vec::new(),
            expansions: 0,
            fruitless: 0,
            reward: None,
            reward_samples: Vec::new(),
            created_at,
        }
    }
}

/// Arena of search nodes; index 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub question: String,
    pub nodes: Vec<SearchNode>,
}

impl Tree {
    pub fn new(question: impl Into<String>) -> Self {
        Self { question: question.into(), nodes: vec![SearchNode::new(0, None, 0, 0)] }
    }

    pub fn root(&self) -> &SearchNode {
        &self.nodes[0]
    }

    pub fn node(&self, id: usize) -> &SearchNode {
        &self.nodes[id]
    }

    /// Appends a child. Validity of a `Done` child follows from its parent:
    /// the parent must be an ExecuteSPARQL step with a non-empty,
    /// error-free result, whose query becomes the prediction.
    pub fn add_child(
        &mut self,
        parent: usize,
        action: Action,
        observation: Option<Observation>,
        fingerprint: Fingerprint,
        created_at: usize,
    ) -> usize {
        let id = self.nodes.len();
        let mut node = SearchNode::new(id, Some(parent), self.nodes[parent].depth + 1, created_at);
        if action.tool == Tool::Done {
            node.terminal = true;
            node.prediction = self.prediction_after(parent);
            node.valid_terminal = node.prediction.is_some();
        }
        node.action = Some(action);
        node.observation = observation;
        node.fingerprint = Some(fingerprint);
        self.nodes.push(node);
        self.nodes[parent].children.push(id);
        id
    }

    fn prediction_after(&self, parent: usize) -> Option<Prediction> {
        let p = &self.nodes[parent];
        let action = p.action.as_ref().filter(|a| a.tool == Tool::ExecuteSparql)?;
        let obs = p.observation.as_ref().filter(|o| o.is_valid_result())?;
        Some(Prediction { sparql: crate::tools::unquote_argument(&action.argument), answers: obs.answers.clone()? })
    }

    /// Root-to-node ids, root first.
    pub fn path(&self, id: usize) -> Vec<usize> {
        let mut out = vec![id];
        let mut cur = id;
        while let Some(p) = self.nodes[cur].parent {
            out.push(p);
            cur = p;
        }
        out.reverse();
        out
    }

    pub fn state(&self, id: usize) -> AgentState {
        let history = self
            .path(id)
            .into_iter()
            .filter_map(|i| {
                let n = &self.nodes[i];
                n.action.clone().map(|action| Step { action, observation: n.observation.clone() })
            })
            .collect();
        AgentState { question: self.question.clone(), history }
    }

    pub fn is_selectable(&self, id: usize, max_rounds: usize) -> bool {
        let n = &self.nodes[id];
        !n.terminal && !n.exhausted && n.depth < max_rounds
    }

    pub fn parent_visits(&self, id: usize) -> u64 {
        match self.nodes[id].parent {
            Some(p) => self.nodes[p].n,
            None => self.nodes[id].n,
        }
    }

    pub fn uct_of(&self, id: usize) -> f64 {
        let n = &self.nodes[id];
        uct(n.w, n.n, self.parent_visits(id))
    }

    /// Picks the next node to expand, or `None` when nothing is selectable.
    pub fn select(&self, strategy: Strategy, max_rounds: usize, rng: &mut impl Rng) -> Option<usize> {
        let candidates: Vec<usize> = (0..self.nodes.len()).filter(|&i| self.is_selectable(i, max_rounds)).collect();
        match strategy {
            Strategy::Mcts => {
                let mut best: Option<(f64, usize)> = None;
                for &i in &candidates {
                    let u = self.uct_of(i);
                    // Candidates are visited in creation order, so a strict
                    // improvement keeps the earlier node on ties of equal depth.
                    let better = match best {
                        None => true,
                        Some((bu, b)) => u > bu || (u == bu && self.nodes[i].depth < self.nodes[b].depth),
                    };
                    if better {
                        best = Some((u, i));
                    }
                }
                best.map(|b| b.1)
            }
            Strategy::Bfs => candidates.into_iter().min_by_key(|&i| (self.nodes[i].expansions > 0, self.nodes[i].depth, i)),
            Strategy::Dfs => candidates
                .into_iter()
                .min_by_key(|&i| (self.nodes[i].expansions > 0, std::cmp::Reverse(self.nodes[i].depth), i)),
            Strategy::RandomSelect => {
                (!candidates.is_empty()).then(|| candidates[rng.gen_range(0..candidates.len())])
            }
        }
    }

    /// Adds one visit and the decayed reward to every node on the path.
    pub fn backpropagate(&mut self, id: usize, r: f64, gamma: f64, d_exp: usize, decay: DecayDepth) {
        let evaluated_depth = self.nodes[id].depth;
        for i in self.path(id) {
            let node = &mut self.nodes[i];
            let d = match decay {
                DecayDepth::PerNode => node.depth,
                DecayDepth::EvaluatedNode => evaluated_depth,
            };
            node.n += 1;
            node.w += decayed_increment(r, gamma, d, d_exp);
        }
    }

    pub fn max_depth(&self) -> usize {
        self.nodes.iter().map(|n| n.depth).max().unwrap_or(0)
    }

    pub fn valid_terminals(&self) -> usize {
        self.nodes.iter().filter(|n| n.valid_terminal).count()
    }

    /// Mean evaluation reward along the branch ending at `id`.
    pub fn branch_reward(&self, id: usize) -> f64 {
        let rewards: Vec<f64> = self.path(id).into_iter().filter_map(|i| self.nodes[i].reward).collect();
        if rewards.is_empty() {
            0.0
        } else {
            rewards.iter().sum::<f64>() / rewards.len() as f64
        }
    }
}
