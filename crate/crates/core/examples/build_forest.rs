//! Select nodes, build the spatial-temporal forest and print its shape.
//!
//!     cargo run --example build_forest

use forestprune::forest::{find_roots, ConnectionGraph};
use forestprune::synth::{gen_video, Geometry, SceneSpec};
use forestprune::{build_forest, compute_budget, select_nodes, PruneConfig};

fn main() -> forestprune::Result<()> {
    let geo = Geometry {
        frames: 12,
        grid_h: 6,
        grid_w: 6,
        dim: 32,
    };
    let video = gen_video(&SceneSpec::scene_change(12, 6, 0.05), &geo, 3)?;
    let config = PruneConfig {
        budget_ratio: 0.8,
        ..Default::default()
    };

    let nodes = select_nodes(&video, config.keep_ratio, config.selector, config.seed)?;
    let graph = ConnectionGraph::build(&nodes, config.tau_s, config.tau_p, config.lambda);
    let roots = find_roots(&graph);
    println!(
        "{} nodes, {} connections, {} roots, {} isolated",
        nodes.len(),
        graph.edge_count(),
        roots.roots.len(),
        roots.isolated.len()
    );

    let budget = compute_budget(
        config.budget_ratio,
        video.frames(),
        video.tokens_per_frame(),
    );
    let forest = build_forest(&nodes, &config, budget)?;
    println!(
        "budget {budget}: {} trees, {} orphans",
        forest.trees.len(),
        forest.orphans.len()
    );
    for tree in forest.trees.iter().take(8) {
        println!(
            "  root {:>4} (frame {:>2})  size {:>3}  depth {:>2}",
            tree.root,
            forest.timestep(tree.root),
            tree.len(),
            tree.depth
        );
    }
    Ok(())
}
