#![allow(dead_code)]

use forestprune::{select_nodes, NodeSet, PruneConfig, SelectorKind, VideoTokens};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A small random pruning problem.
pub struct Instance {
    pub video: VideoTokens,
    pub nodes: NodeSet,
    pub config: PruneConfig,
    pub budget: usize,
}

/// Clustered embeddings: every token is one of a few prototypes plus noise,
/// so thresholds anywhere in the tested range produce some connections.
pub fn random_video(
    rng: &mut ChaCha8Rng,
    max_frames: usize,
    max_tokens: usize,
    max_dim: usize,
) -> VideoTokens {
    let frames = rng.random_range(1..=max_frames);
    let (grid_h, grid_w) = loop {
        let h = rng.random_range(1..=4);
        let w = rng.random_range(1..=4);
        if h * w <= max_tokens {
            break (h, w);
        }
    };
    let dim = rng.random_range(1..=max_dim);
    let protos: Vec<Vec<f32>> = (0..rng.random_range(1..=4))
        .map(|_| (0..dim).map(|_| rng.random_range(-1.0f32..1.0)).collect())
        .collect();
    let noise = [0.0f32, 0.02, 0.1, 0.4][rng.random_range(0..4)];
    let mut data = Vec::with_capacity(frames * grid_h * grid_w * dim);
    for _ in 0..frames * grid_h * grid_w {
        let p = &protos[rng.random_range(0..protos.len())];
        let mut v: Vec<f32> = p
            .iter()
            .map(|x| x + noise * rng.random_range(-1.0f32..1.0))
            .collect();
        if v.iter().all(|x| *x == 0.0) {
            v[0] = 1.0;
        }
        data.extend(v);
    }
    VideoTokens::new(frames, grid_h, grid_w, dim, data).unwrap()
}

pub fn random_config(rng: &mut ChaCha8Rng) -> PruneConfig {
    PruneConfig {
        tau_s: rng.random_range(0.3..=0.99),
        tau_p: rng.random_range(0.1..=1.4),
        lambda: rng.random_range(0.0..=2.0),
        keep_ratio: rng.random_range(0.2..=1.0),
        selector: [
            SelectorKind::Random,
            SelectorKind::NormSaliency,
            SelectorKind::All,
        ][rng.random_range(0..3)],
        budget_ratio: 0.0,
        seed: rng.random(),
    }
}

pub fn random_instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let video = random_video(&mut rng, 8, 16, 8);
    let config = random_config(&mut rng);
    let nodes = select_nodes(&video, config.keep_ratio, config.selector, config.seed).unwrap();
    let budget = rng.random_range(1..=nodes.len());
    Instance {
        video,
        nodes,
        config,
        budget,
    }
}
