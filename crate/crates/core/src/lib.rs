//! Knowledge-base question answering by tree search over agent tool calls.
//!
//! An agent proposes tool calls (`SearchNodes`, `SearchGraphPatterns`,
//! `ExecuteSPARQL`, `Done`) against an in-memory KB; [`search`] grows a tree
//! of those interactions guided by model-scored rewards and votes over the
//! queries of completed branches.

pub mod agent;
pub mod annotate;
pub mod answer;
pub mod baselines;
pub mod dataset;
pub mod kb;
pub mod metrics;
pub mod query;
pub mod reward;
pub mod search;
pub mod synth;
pub mod tools;
pub mod toy;

pub use answer::AnswerSet;
pub use baselines::Method;
pub use dataset::DatasetRecord;
pub use kb::KnowledgeBase;
pub use reward::{PromptAssets, RewardMode};
pub use search::{SearchConfig, SearchContext, SearchResult, Strategy};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
