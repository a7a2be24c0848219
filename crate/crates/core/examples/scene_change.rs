//! A cut in the middle of a clip starts new trees, so retained tokens spike
//! at the cut.
//!
//!     cargo run --example scene_change [change_frame]

use forestprune::synth::{gen_video, Geometry, SceneSpec};
use forestprune::{prune_video, PruneConfig};

fn main() -> forestprune::Result<()> {
    let change: usize = std::env::args()
        .nth(1)
        .and_then(|a| a.parse().ok())
        .unwrap_or(16);
    let geo = Geometry {
        frames: 32,
        grid_h: 8,
        grid_w: 8,
        dim: 64,
    };
    let video = gen_video(&SceneSpec::scene_change(32, change, 0.05), &geo, 7)?;
    let result = prune_video(
        &video,
        &PruneConfig {
            seed: 7,
            ..Default::default()
        },
    )?;

    for (frame, count) in result.per_frame_counts.iter().enumerate() {
        let mark = if frame == change { " <- cut" } else { "" };
        println!("frame {frame:>2} {count:>3} {}{mark}", "#".repeat(*count));
    }
    Ok(())
}
