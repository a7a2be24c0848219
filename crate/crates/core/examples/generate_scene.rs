//! Generate a clip from a TOML scene file and report how similar its frames
//! are to the first one.
//!
//!     cargo run --example generate_scene [scene.toml] [seed]

use forestprune::forest::dot;
use forestprune::synth::SceneFile;

fn unit(v: &[f32]) -> Vec<f64> {
    let n = forestprune::tokens::l2_norm(v);
    v.iter().map(|&x| f64::from(x) / n).collect()
}

fn main() -> forestprune::Result<()> {
    let mut args = std::env::args().skip(1);
    let path = args.next().unwrap_or_else(|| {
        concat!(
            env!("CARGO_MANIFEST_DIR"),
            "/examples/scenes/recurring.toml"
        )
        .into()
    });
    let seed = args.next().and_then(|s| s.parse().ok()).unwrap_or(0);
    let video = SceneFile::load(&path)?.generate(seed)?;

    let n = video.tokens_per_frame();
    println!(
        "{} frames of {} tokens, dim {}",
        video.frames(),
        n,
        video.dim()
    );
    for f in 0..video.frames() {
        let sim: f64 = (0..n)
            .map(|g| dot(&unit(video.token(g)), &unit(video.token(f * n + g))))
            .sum::<f64>()
            / n as f64;
        println!("frame {f:>2} mean cosine to frame 0: {sim:.3}");
    }
    Ok(())
}
