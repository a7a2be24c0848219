//! Training-free compression of video token sequences.
//!
//! Candidate tokens from every frame are linked into a forest: a token
//! connects to an earlier token when the two are semantically similar and
//! spatially close, and each chain of such links forms a tree rooted at the
//! earliest occurrence of a visual element. Pruning then removes orphans,
//! leaves, and tree tails, deepest trees first, until a global token budget
//! is met. Redundant content (long static chains) therefore gives up tokens
//! first while new content keeps its roots.
//!
//! ```
//! use forestprune::synth::{gen_video, Geometry, SceneSpec};
//! use forestprune::{prune_video, PruneConfig};
//!
//! let geo = Geometry { frames: 8, grid_h: 4, grid_w: 4, dim: 32 };
//! let video = gen_video(&SceneSpec::static_scene(8, 0.05), &geo, 1).unwrap();
//! let config = PruneConfig { budget_ratio: 0.75, ..Default::default() };
//! let result = prune_video(&video, &config).unwrap();
//! assert_eq!(result.retained.len(), 32);
//! ```

pub mod cli;
pub mod error;
pub mod forest;
pub mod io;
pub mod metrics;
pub mod oracle;
pub mod prune;
mod seeding;
pub mod select;
pub mod synth;
pub mod tokens;

pub use error::{Error, Result};
pub use forest::{build_forest, Forest, Tree};
pub use prune::{prune_to_budget, prune_video, prune_video_detailed, RemovalTrace};
pub use select::select_nodes;
pub use tokens::{
    compute_budget, NodeId, NodeSet, PruneConfig, PruneResult, SelectorKind, VideoTokens,
};
