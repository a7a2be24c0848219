//! Prune a highly redundant static clip and show where the kept tokens land.
//!
//!     cargo run --example prune_static_scene

use forestprune::metrics::result_redundancy;
use forestprune::synth::{gen_video, Geometry, SceneSpec};
use forestprune::{prune_video, PruneConfig};

fn main() -> forestprune::Result<()> {
    let geo = Geometry {
        frames: 32,
        grid_h: 8,
        grid_w: 8,
        dim: 64,
    };
    let video = gen_video(&SceneSpec::static_scene(32, 0.05), &geo, 1)?;
    let result = prune_video(&video, &PruneConfig::default())?;

    println!(
        "kept {} of {} tokens",
        result.retained.len(),
        video.total_tokens()
    );
    println!("redundancy {:.4}", result_redundancy(&video, &result)?);
    for (frame, count) in result.per_frame_counts.iter().enumerate() {
        println!("frame {frame:>2} {count:>3} {}", "#".repeat(*count));
    }
    Ok(())
}
