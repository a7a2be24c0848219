//! Write a clip as a VTOK file, read it back and check it is bit-identical.
//!
//!     cargo run --example vtok_roundtrip [path]

use forestprune::io::{read_vtok, write_vtok};
use forestprune::synth::{gen_video, Geometry, SceneSpec};

fn main() -> forestprune::Result<()> {
    let path = std::env::args()
        .nth(1)
        .map_or_else(|| std::env::temp_dir().join("example.vtok"), Into::into);
    let geo = Geometry {
        frames: 8,
        grid_h: 4,
        grid_w: 4,
        dim: 16,
    };
    let video = gen_video(&SceneSpec::static_scene(8, 0.1), &geo, 5)?;

    write_vtok(&video, &path)?;
    let back = read_vtok(&path)?;
    let bytes = std::fs::metadata(&path)?.len();
    println!(
        "{}: {} bytes, identical = {}",
        path.display(),
        bytes,
        back == video
    );
    Ok(())
}
