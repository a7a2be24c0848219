//! Per-frame candidate node selection.

use rand::seq::index;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::seeding;
use crate::tokens::{l2_norm, round_half_up, NodeId, NodeSet, SelectorKind, VideoTokens};

const SELECT_STREAM: u64 = 0x005e_1ec7;

/// Number of nodes kept per frame: `max(1, round(keep_ratio * N))`, capped at N.
pub fn nodes_per_frame(keep_ratio: f64, tokens_per_frame: usize) -> usize {
    round_half_up(keep_ratio * tokens_per_frame as f64).clamp(1, tokens_per_frame)
}

/// Grid indices kept in one frame, ascending.
fn select_frame(
    video: &VideoTokens,
    frame: usize,
    keep: usize,
    selector: SelectorKind,
    seed: u64,
) -> Result<Vec<usize>> {
    let n = video.tokens_per_frame();
    let norms: Vec<f64> = video.frame_tokens(frame).map(l2_norm).collect();
    if norms.iter().all(|&x| x == 0.0) {
        return Err(Error::DegenerateFrame { frame });
    }
    let mut picked = match selector {
        SelectorKind::All => (0..n).collect::<Vec<_>>(),
        SelectorKind::Random => {
            let mut rng = seeding::stream(seed, &[SELECT_STREAM, frame as u64]);
            index::sample(&mut rng, n, keep).into_vec()
        }
        SelectorKind::NormSaliency => {
            let mut order: Vec<usize> = (0..n).collect();
            // descending norm, ties to the smaller grid index; zero norms land last
            order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]).then(a.cmp(&b)));
            order.truncate(keep);
            order
        }
    };
    picked.sort_unstable();
    Ok(picked)
}

/// Selects `nodes_per_frame(keep_ratio, N)` candidate nodes in every frame
/// (all of them for [`SelectorKind::All`]).
pub fn select_nodes(
    video: &VideoTokens,
    keep_ratio: f64,
    selector: SelectorKind,
    seed: u64,
) -> Result<NodeSet> {
    if !(keep_ratio > 0.0 && keep_ratio <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "keep_ratio must lie in (0, 1], got {keep_ratio}"
        )));
    }
    let n = video.tokens_per_frame();
    let keep = nodes_per_frame(keep_ratio, n);
    let per_frame = (0..video.frames())
        .into_par_iter()
        .map(|frame| select_frame(video, frame, keep, selector, seed))
        .collect::<Result<Vec<_>>>()?;
    let ids: Vec<NodeId> = per_frame
        .iter()
        .enumerate()
        .flat_map(|(frame, grid)| grid.iter().map(move |&g| frame * n + g))
        .collect();
    NodeSet::from_tokens(video, &ids)
}
