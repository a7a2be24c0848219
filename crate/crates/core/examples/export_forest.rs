//! Export a forest as Graphviz DOT and JSON, plus the removal trace as CSV.
//!
//!     cargo run --example export_forest [out_dir]
//!     dot -Tsvg out/forest.dot > forest.svg

use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use forestprune::io::{write_dot, write_json, write_trace_csv, ForestExport};
use forestprune::synth::SceneFile;
use forestprune::{prune_video_detailed, PruneConfig};

fn main() -> forestprune::Result<()> {
    let out: PathBuf = std::env::args()
        .nth(1)
        .map_or_else(|| std::env::temp_dir().join("forest"), Into::into);
    std::fs::create_dir_all(&out)?;

    let scene = SceneFile::load(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/examples/scenes/recurring.toml"
    ))?;
    let video = scene.generate(2)?;
    let config = PruneConfig {
        budget_ratio: 0.85,
        ..Default::default()
    };
    let run = prune_video_detailed(&video, &config)?;

    write_dot(
        &run.forest,
        video.grid_w(),
        BufWriter::new(File::create(out.join("forest.dot"))?),
    )?;
    write_json(
        &ForestExport::new(&run.forest, Some(&config)),
        out.join("forest.json"),
    )?;
    write_trace_csv(
        &run.trace,
        BufWriter::new(File::create(out.join("trace.csv"))?),
    )?;
    println!(
        "{} trees, {} orphans, {} removals -> {}",
        run.forest.trees.len(),
        run.forest.orphans.len(),
        run.trace.removals.len(),
        out.display()
    );
    Ok(())
}
