//! Forest pruning against random and norm top-K baselines over a few seeds,
//! written as CSV to stdout.
//!
//!     cargo run --example compare_baselines

use forestprune::cli::compare;
use forestprune::metrics::write_csv;
use forestprune::synth::{gen_video, Geometry, SceneSpec, Segment};
use forestprune::PruneConfig;

fn main() -> forestprune::Result<()> {
    let geo = Geometry {
        frames: 32,
        grid_h: 8,
        grid_w: 8,
        dim: 64,
    };
    let spec = SceneSpec {
        noise: 0.05,
        segments: (0..4).map(|s| Segment::new(8, s)).collect(),
    };
    let video = gen_video(&spec, &geo, 0)?;
    let methods: Vec<String> = ["forest", "random", "per_frame_topk", "global_topk"]
        .map(String::from)
        .to_vec();
    let report = compare(
        &video,
        "four_segments",
        &PruneConfig::default(),
        &methods,
        &[0, 1, 2],
        false,
    )?;
    write_csv(std::io::stdout().lock(), &report.rows)
}
