//! Core data types shared by every stage of the pipeline: the raw video
//! token tensor, the candidate node set, pruning configuration and results,
//! and the token budget arithmetic.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Global token identifier: `frame * tokens_per_frame + grid_index`.
///
/// Ascending id order is ascending (frame, grid index) order.
pub type NodeId = usize;

/// Per-frame token embeddings with their grid geometry.
#[derive(Clone, Debug, PartialEq)]
pub struct VideoTokens {
    frames: usize,
    tokens_per_frame: usize,
    dim: usize,
    grid_h: usize,
    grid_w: usize,
    embeddings: Vec<f32>,
}

impl VideoTokens {
    /// Builds a video from a flat frame-major, grid-index-major,
    /// dimension-minor buffer.
    pub fn new(
        frames: usize,
        grid_h: usize,
        grid_w: usize,
        dim: usize,
        embeddings: Vec<f32>,
    ) -> Result<Self> {
        if frames == 0 || grid_h == 0 || grid_w == 0 || dim == 0 {
            return Err(Error::InvalidVideo(format!(
                "all dimensions must be >= 1 (frames={frames}, grid={grid_h}x{grid_w}, dim={dim})"
            )));
        }
        let tokens_per_frame = grid_h * grid_w;
        let expected = frames * tokens_per_frame * dim;
        if embeddings.len() != expected {
            return Err(Error::InvalidVideo(format!(
                "expected {expected} embedding values, got {}",
                embeddings.len()
            )));
        }
        if let Some(pos) = embeddings.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidVideo(format!(
                "non-finite embedding value at flat index {pos}"
            )));
        }
        Ok(Self {
            frames,
            tokens_per_frame,
            dim,
            grid_h,
            grid_w,
            embeddings,
        })
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn tokens_per_frame(&self) -> usize {
        self.tokens_per_frame
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn grid_h(&self) -> usize {
        self.grid_h
    }

    pub fn grid_w(&self) -> usize {
        self.grid_w
    }

    pub fn total_tokens(&self) -> usize {
        self.frames * self.tokens_per_frame
    }

    pub fn embeddings(&self) -> &[f32] {
        &self.embeddings
    }

    /// Embedding of a token addressed by its global id.
    pub fn token(&self, id: NodeId) -> &[f32] {
        &self.embeddings[id * self.dim..(id + 1) * self.dim]
    }

    pub fn frame_tokens(&self, frame: usize) -> impl Iterator<Item = &[f32]> {
        let start = frame * self.tokens_per_frame * self.dim;
        let end = start + self.tokens_per_frame * self.dim;
        self.embeddings[start..end].chunks_exact(self.dim)
    }

    /// Grid-cell center of `grid_index`, normalized to `[0,1]^2` as `(row, col)`.
    pub fn coord(&self, grid_index: usize) -> [f64; 2] {
        let row = grid_index / self.grid_w;
        let col = grid_index % self.grid_w;
        [
            (row as f64 + 0.5) / self.grid_h as f64,
            (col as f64 + 0.5) / self.grid_w as f64,
        ]
    }
}

/// L2 norm accumulated in f64, in index order.
pub fn l2_norm(v: &[f32]) -> f64 {
    v.iter()
        .map(|&x| f64::from(x) * f64::from(x))
        .sum::<f64>()
        .sqrt()
}

/// A candidate node: one selected token with its position in space and time.
#[derive(Clone, Debug, PartialEq)]
pub struct Node {
    pub id: NodeId,
    pub frame: usize,
    pub grid_index: usize,
    pub coord: [f64; 2],
    pub embedding: Vec<f32>,
    pub unit_embedding: Vec<f64>,
}

/// The selected candidate nodes, ordered by ascending id.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeSet {
    frames: usize,
    tokens_per_frame: usize,
    nodes: Vec<Node>,
}

impl NodeSet {
    /// Collects the given tokens of `video` as nodes. `ids` must be strictly
    /// ascending and every referenced token must have a non-zero embedding.
    pub fn from_tokens(video: &VideoTokens, ids: &[NodeId]) -> Result<Self> {
        if ids.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidVideo(
                "node ids must be strictly ascending".into(),
            ));
        }
        let n = video.tokens_per_frame();
        let mut nodes = Vec::with_capacity(ids.len());
        for &id in ids {
            if id >= video.total_tokens() {
                return Err(Error::InvalidVideo(format!("token id {id} out of range")));
            }
            let embedding = video.token(id).to_vec();
            let norm = l2_norm(&embedding);
            if norm == 0.0 {
                return Err(Error::ZeroEmbedding { token: id });
            }
            let unit_embedding = embedding.iter().map(|&x| f64::from(x) / norm).collect();
            nodes.push(Node {
                id,
                frame: id / n,
                grid_index: id % n,
                coord: video.coord(id % n),
                embedding,
                unit_embedding,
            });
        }
        Ok(Self {
            frames: video.frames(),
            tokens_per_frame: n,
            nodes,
        })
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn tokens_per_frame(&self) -> usize {
        self.tokens_per_frame
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes.iter().map(|n| n.id)
    }
}

/// How candidate nodes are chosen within each frame.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectorKind {
    Random,
    NormSaliency,
    All,
}

impl SelectorKind {
    pub fn name(self) -> &'static str {
        match self {
            SelectorKind::Random => "random",
            SelectorKind::NormSaliency => "norm_saliency",
            SelectorKind::All => "all",
        }
    }
}

impl fmt::Display for SelectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SelectorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(SelectorKind::Random),
            "norm_saliency" => Ok(SelectorKind::NormSaliency),
            "all" => Ok(SelectorKind::All),
            other => Err(Error::InvalidConfig(format!(
                "unknown selector {other:?} (expected random, norm_saliency or all)"
            ))),
        }
    }
}

pub const DEFAULT_TAU_S: f64 = 0.9;
pub const DEFAULT_TAU_P: f64 = 0.8;
pub const DEFAULT_LAMBDA: f64 = 0.5;
pub const DEFAULT_KEEP_RATIO: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PruneConfig {
    /// Minimum cosine similarity for two nodes to connect.
    pub tau_s: f64,
    /// Maximum normalized grid distance for two nodes to connect.
    pub tau_p: f64,
    /// Weight of the spatial distance penalty when ranking parents.
    pub lambda: f64,
    /// Fraction of each frame's tokens admitted as candidate nodes.
    pub keep_ratio: f64,
    pub selector: SelectorKind,
    /// Fraction of all tokens to remove.
    pub budget_ratio: f64,
    pub seed: u64,
}

impl Default for PruneConfig {
    fn default() -> Self {
        Self {
            tau_s: DEFAULT_TAU_S,
            tau_p: DEFAULT_TAU_P,
            lambda: DEFAULT_LAMBDA,
            keep_ratio: DEFAULT_KEEP_RATIO,
            selector: SelectorKind::Random,
            budget_ratio: 0.9,
            seed: 0,
        }
    }
}

impl PruneConfig {
    pub fn validate(&self) -> Result<()> {
        fn check(ok: bool, msg: String) -> Result<()> {
            if ok {
                Ok(())
            } else {
                Err(Error::InvalidConfig(msg))
            }
        }
        check(
            (-1.0..=1.0).contains(&self.tau_s),
            format!("tau_s must lie in [-1, 1], got {}", self.tau_s),
        )?;
        check(
            (0.0..=std::f64::consts::SQRT_2).contains(&self.tau_p),
            format!("tau_p must lie in [0, sqrt(2)], got {}", self.tau_p),
        )?;
        check(
            self.lambda.is_finite() && self.lambda >= 0.0,
            format!("lambda must be finite and >= 0, got {}", self.lambda),
        )?;
        check(
            self.keep_ratio > 0.0 && self.keep_ratio <= 1.0,
            format!("keep_ratio must lie in (0, 1], got {}", self.keep_ratio),
        )?;
        check(
            (0.0..1.0).contains(&self.budget_ratio),
            format!("budget_ratio must lie in [0, 1), got {}", self.budget_ratio),
        )
    }
}

/// Rounds half-way cases up (towards +inf).
pub fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor().max(0.0) as usize
}

/// Number of tokens kept when a fraction `budget_ratio` of the `frames *
/// tokens_per_frame` tokens is removed. Never less than one.
pub fn compute_budget(budget_ratio: f64, frames: usize, tokens_per_frame: usize) -> usize {
    let total = frames * tokens_per_frame;
    round_half_up((1.0 - budget_ratio) * total as f64).clamp(1, total.max(1))
}

/// Tokens retained after pruning.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PruneResult {
    /// Ascending token ids.
    pub retained: Vec<NodeId>,
    pub per_frame_counts: Vec<usize>,
    /// `retained.len() / (frames * tokens_per_frame)`.
    pub achieved_budget: f64,
    /// Set when the requested budget was larger than the nodes available.
    #[serde(default)]
    pub budget_unreachable: bool,
}

impl PruneResult {
    pub fn new(mut retained: Vec<NodeId>, frames: usize, tokens_per_frame: usize) -> Self {
        retained.sort_unstable();
        let mut per_frame_counts = vec![0; frames];
        for &id in &retained {
            per_frame_counts[id / tokens_per_frame] += 1;
        }
        let achieved_budget = retained.len() as f64 / (frames * tokens_per_frame) as f64;
        Self {
            retained,
            per_frame_counts,
            achieved_budget,
            budget_unreachable: false,
        }
    }
}
