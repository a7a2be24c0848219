//! Cross-check the optimized forest builder and pruner against the slow
//! reference implementation on random small clips.
//!
//!     cargo run --example oracle_check [instances]

use forestprune::oracle::{oracle_forest, oracle_prune};
use forestprune::synth::{gen_video, Geometry, SceneSpec};
use forestprune::{build_forest, compute_budget, prune_to_budget, select_nodes, PruneConfig};

fn main() -> forestprune::Result<()> {
    let runs: u64 = std::env::args()
        .nth(1)
        .and_then(|a| a.parse().ok())
        .unwrap_or(200);
    let mut mismatches = 0;
    for seed in 0..runs {
        let frames = 2 + (seed % 7) as usize;
        let geo = Geometry {
            frames,
            grid_h: 3,
            grid_w: 4,
            dim: 8,
        };
        let video = gen_video(
            &SceneSpec::scene_change(frames, frames / 2, 0.2),
            &geo,
            seed,
        )?;
        let config = PruneConfig {
            tau_s: 0.7,
            budget_ratio: 0.5 + 0.04 * (seed % 10) as f64,
            seed,
            ..Default::default()
        };
        let nodes = select_nodes(&video, config.keep_ratio, config.selector, seed)?;
        let budget = compute_budget(config.budget_ratio, frames, 12).min(nodes.len());
        let forest = build_forest(&nodes, &config, budget)?;
        let same_forest = forest == oracle_forest(&nodes, &config, budget);
        let same_prune = prune_to_budget(&forest, budget).0 == oracle_prune(&forest, budget);
        if !(same_forest && same_prune) {
            mismatches += 1;
            println!("seed {seed}: forest {same_forest}, prune {same_prune}");
        }
    }
    println!("{runs} instances, {mismatches} mismatches");
    Ok(())
}
