//! Pruning quality metrics, norm-based baseline pruners and CSV reports.
//!
//! The baselines are proxies: norm top-K stands in for saliency-driven
//! pruning because no model is available to score tokens.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeding;
use crate::tokens::{l2_norm, NodeId, PruneResult, VideoTokens};

const BASELINE_STREAM: u64 = 0xba5e;

/// Mean over tokens of the highest cosine similarity to any other token.
pub fn redundancy_score<T: AsRef<[f32]>>(tokens: &[T]) -> Result<f64> {
    if tokens.len() < 2 {
        return Err(Error::TooFewTokens(tokens.len()));
    }
    let units: Vec<Vec<f64>> = tokens
        .iter()
        .map(|t| {
            let t = t.as_ref();
            let n = l2_norm(t);
            t.iter()
                .map(|&x| if n > 0.0 { f64::from(x) / n } else { 0.0 })
                .collect()
        })
        .collect();
    let mut total = 0.0;
    for (i, u) in units.iter().enumerate() {
        let best = units
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, v)| u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>())
            .fold(f64::NEG_INFINITY, f64::max);
        total += best;
    }
    Ok(total / units.len() as f64)
}

/// Redundancy of the tokens a result keeps.
pub fn result_redundancy(video: &VideoTokens, result: &PruneResult) -> Result<f64> {
    let tokens: Vec<&[f32]> = result.retained.iter().map(|&id| video.token(id)).collect();
    redundancy_score(&tokens)
}

/// Retained tokens per frame.
pub fn per_frame_counts(
    result: &PruneResult,
    frames: usize,
    tokens_per_frame: usize,
) -> Vec<usize> {
    let mut counts = vec![0; frames];
    for &id in &result.retained {
        counts[id / tokens_per_frame] += 1;
    }
    counts
}

/// Fraction of frames that keep at least one token.
pub fn frame_coverage(result: &PruneResult, frames: usize, tokens_per_frame: usize) -> f64 {
    let covered = per_frame_counts(result, frames, tokens_per_frame)
        .iter()
        .filter(|&&c| c > 0)
        .count();
    covered as f64 / frames as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineMethod {
    Random,
    PerFrameTopkNorm,
    GlobalTopkNorm,
}

impl BaselineMethod {
    pub fn name(self) -> &'static str {
        match self {
            BaselineMethod::Random => "random",
            BaselineMethod::PerFrameTopkNorm => "per_frame_topk",
            BaselineMethod::GlobalTopkNorm => "global_topk",
        }
    }
}

impl fmt::Display for BaselineMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BaselineMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(BaselineMethod::Random),
            "per_frame_topk" | "per_frame_topk_norm" => Ok(BaselineMethod::PerFrameTopkNorm),
            "global_topk" | "global_topk_norm" => Ok(BaselineMethod::GlobalTopkNorm),
            other => Err(Error::InvalidConfig(format!(
                "unknown baseline method {other:?}"
            ))),
        }
    }
}

/// Indices of the `k` largest norms, ties to the smaller index.
fn top_by_norm(norms: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..norms.len()).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]).then(a.cmp(&b)));
    order.truncate(k);
    order
}

/// Keeps `budget` tokens chosen by a baseline rule.
pub fn baseline_prune(
    video: &VideoTokens,
    budget: usize,
    method: BaselineMethod,
    seed: u64,
) -> Result<PruneResult> {
    let (t, n) = (video.frames(), video.tokens_per_frame());
    let total = video.total_tokens();
    if budget > total {
        return Err(Error::InvalidConfig(format!(
            "budget {budget} exceeds the {total} tokens of the video"
        )));
    }
    let retained: Vec<NodeId> = match method {
        BaselineMethod::Random => {
            let mut rng = seeding::stream(seed, &[BASELINE_STREAM]);
            index::sample(&mut rng, total, budget).into_vec()
        }
        BaselineMethod::PerFrameTopkNorm => {
            let (base, extra) = (budget / t, budget % t);
            (0..t)
                .flat_map(|f| {
                    let norms: Vec<f64> = video.frame_tokens(f).map(l2_norm).collect();
                    let k = base + usize::from(f < extra);
                    top_by_norm(&norms, k).into_iter().map(move |g| f * n + g)
                })
                .collect()
        }
        BaselineMethod::GlobalTopkNorm => {
            let norms: Vec<f64> = (0..total).map(|id| l2_norm(video.token(id))).collect();
            top_by_norm(&norms, budget)
        }
    };
    Ok(PruneResult::new(retained, t, n))
}

/// One line of a metrics report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub spec_id: String,
    pub method: String,
    pub ratio: f64,
    pub seed: u64,
    #[serde(rename = "K")]
    pub k: usize,
    pub redundancy: Option<f64>,
    pub coverage: f64,
    /// Left empty unless timing was requested, so reports stay reproducible.
    pub runtime_ms: Option<f64>,
}

impl MetricsRow {
    pub fn evaluate(
        spec_id: &str,
        method: &str,
        ratio: f64,
        seed: u64,
        video: &VideoTokens,
        result: &PruneResult,
    ) -> Self {
        Self {
            spec_id: spec_id.to_string(),
            method: method.to_string(),
            ratio,
            seed,
            k: result.retained.len(),
            redundancy: result_redundancy(video, result).ok(),
            coverage: frame_coverage(result, video.frames(), video.tokens_per_frame()),
            runtime_ms: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameCountRow {
    pub spec_id: String,
    pub method: String,
    pub seed: u64,
    pub frame: usize,
    pub count: usize,
}

impl FrameCountRow {
    pub fn from_result(spec_id: &str, method: &str, seed: u64, result: &PruneResult) -> Vec<Self> {
        result
            .per_frame_counts
            .iter()
            .enumerate()
            .map(|(frame, &count)| Self {
                spec_id: spec_id.to_string(),
                method: method.to_string(),
                seed,
                frame,
                count,
            })
            .collect()
    }
}

/// Writes rows as comma-delimited CSV with a header row.
pub fn write_csv<W: Write, R: Serialize>(out: W, rows: &[R]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
