//! Synthetic video token streams with controllable redundancy.
//!
//! A scene is a sequence of segments. Each segment draws one unit prototype
//! per grid cell; its frames are the prototypes plus a linear drift and
//! per-token noise, renormalized to unit length. A new segment is a scene
//! change, `repeat_of` brings back an earlier segment's prototypes, and an
//! optional object replaces one cell per frame along a path.
//!
//! Scene files are TOML:
//!
//! ```toml
//! grid_h = 8
//! grid_w = 8
//! dim = 64
//! noise = 0.05          # expected L2 norm of per-token noise
//!
//! [[segments]]
//! frames = 16
//! seed = 1              # prototype seed
//! drift = 0.0           # drift magnitude per frame
//!
//! [[segments]]
//! frames = 8
//! repeat_of = 0         # reuse segment 0's prototypes
//!
//! [[segments]]
//! frames = 8
//! seed = 2
//! [segments.object]
//! seed = 9
//! path = [[0, 0], [0, 1], [1, 1]]   # (row, col), cycled
//! ```

use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeding;
use crate::tokens::VideoTokens;

const PROTOTYPE: u64 = 1;
const DRIFT: u64 = 2;
const NOISE: u64 = 3;
const OBJECT: u64 = 4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectSpec {
    pub seed: u64,
    /// Grid cells `(row, col)` visited on successive frames, cycled.
    pub path: Vec<[usize; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Segment {
    pub frames: usize,
    #[serde(default)]
    pub seed: u64,
    /// Drift magnitude added per frame along a fixed random direction per cell.
    #[serde(default)]
    pub drift: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repeat_of: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub object: Option<ObjectSpec>,
}

impl Segment {
    pub fn new(frames: usize, seed: u64) -> Self {
        Self {
            frames,
            seed,
            drift: 0.0,
            repeat_of: None,
            object: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    /// Expected L2 norm of the per-token noise vector.
    #[serde(default)]
    pub noise: f64,
    pub segments: Vec<Segment>,
}

impl SceneSpec {
    pub fn frames(&self) -> usize {
        self.segments.iter().map(|s| s.frames).sum()
    }

    /// One static segment.
    pub fn static_scene(frames: usize, noise: f64) -> Self {
        Self {
            noise,
            segments: vec![Segment::new(frames, 0)],
        }
    }

    /// Static scene that cuts to new content at frame `change_at`.
    pub fn scene_change(frames: usize, change_at: usize, noise: f64) -> Self {
        Self {
            noise,
            segments: vec![
                Segment::new(change_at, 0),
                Segment::new(frames - change_at, 1),
            ],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Geometry {
    pub frames: usize,
    pub grid_h: usize,
    pub grid_w: usize,
    pub dim: usize,
}

/// A scene file: geometry plus scene description. The frame count is the
/// sum of the segment lengths.
#[derive(Clone, Debug, PartialEq)]
pub struct SceneFile {
    pub grid_h: usize,
    pub grid_w: usize,
    pub dim: usize,
    pub scene: SceneSpec,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSceneFile {
    grid_h: usize,
    grid_w: usize,
    dim: usize,
    #[serde(default)]
    noise: f64,
    segments: Vec<Segment>,
}

impl SceneFile {
    pub fn parse(text: &str) -> Result<Self> {
        let raw: RawSceneFile = toml::from_str(text)?;
        Ok(Self {
            grid_h: raw.grid_h,
            grid_w: raw.grid_w,
            dim: raw.dim,
            scene: SceneSpec {
                noise: raw.noise,
                segments: raw.segments,
            },
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn geometry(&self) -> Geometry {
        Geometry {
            frames: self.scene.frames(),
            grid_h: self.grid_h,
            grid_w: self.grid_w,
            dim: self.dim,
        }
    }

    pub fn generate(&self, seed: u64) -> Result<VideoTokens> {
        gen_video(&self.scene, &self.geometry(), seed)
    }
}

fn unit_vector(rng: &mut impl Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

fn validate(spec: &SceneSpec, geo: &Geometry) -> Result<()> {
    let err = |m: String| Err(Error::SceneSpec(m));
    if geo.grid_h == 0 || geo.grid_w == 0 || geo.dim == 0 {
        return err("grid and embedding dimensions must be >= 1".into());
    }
    if spec.segments.is_empty() {
        return err("at least one segment is required".into());
    }
    if spec.frames() != geo.frames {
        return err(format!(
            "segment lengths sum to {} frames, expected {}",
            spec.frames(),
            geo.frames
        ));
    }
    if !(spec.noise.is_finite() && spec.noise >= 0.0) {
        return err(format!("noise must be finite and >= 0, got {}", spec.noise));
    }
    for (i, s) in spec.segments.iter().enumerate() {
        if s.frames == 0 {
            return err(format!("segment {i} has no frames"));
        }
        if !(s.drift.is_finite() && s.drift >= 0.0) {
            return err(format!("segment {i}: drift must be finite and >= 0"));
        }
        if let Some(r) = s.repeat_of {
            if r >= i {
                return err(format!(
                    "segment {i} can only repeat an earlier segment, got {r}"
                ));
            }
        }
        if let Some(obj) = &s.object {
            if obj.path.is_empty() {
                return err(format!("segment {i}: object path is empty"));
            }
            if let Some(p) = obj
                .path
                .iter()
                .find(|p| p[0] >= geo.grid_h || p[1] >= geo.grid_w)
            {
                return err(format!(
                    "segment {i}: object cell {p:?} lies outside the grid"
                ));
            }
        }
    }
    Ok(())
}

/// Generates a unit-norm synthetic video for the given scene.
pub fn gen_video(spec: &SceneSpec, geo: &Geometry, seed: u64) -> Result<VideoTokens> {
    validate(spec, geo)?;
    let cells = geo.grid_h * geo.grid_w;
    let dim = geo.dim;

    let draw_cells = |kind: u64, key: u64| -> Vec<Vec<f64>> {
        (0..cells)
            .map(|g| unit_vector(&mut seeding::stream(seed, &[kind, key, g as u64]), dim))
            .collect()
    };
    // prototype index per segment, after resolving repeats
    let mut source: Vec<usize> = Vec::with_capacity(spec.segments.len());
    for (i, s) in spec.segments.iter().enumerate() {
        source.push(s.repeat_of.map_or(i, |r| source[r]));
    }
    let prototypes: Vec<Option<Vec<Vec<f64>>>> = spec
        .segments
        .iter()
        .enumerate()
        .map(|(i, s)| (source[i] == i).then(|| draw_cells(PROTOTYPE, s.seed)))
        .collect();

    struct FramePlan<'a> {
        local: usize,
        proto: &'a [Vec<f64>],
        drift: f64,
        directions: Option<Vec<Vec<f64>>>,
        object: Option<(usize, Vec<f64>)>,
    }

    let mut plans = Vec::with_capacity(geo.frames);
    for (i, s) in spec.segments.iter().enumerate() {
        let proto = prototypes[source[i]]
            .as_deref()
            .expect("resolved prototype");
        let directions = (s.drift > 0.0).then(|| draw_cells(DRIFT, s.seed));
        let object_proto = s
            .object
            .as_ref()
            .map(|o| unit_vector(&mut seeding::stream(seed, &[OBJECT, o.seed]), dim));
        for local in 0..s.frames {
            let object = s.object.as_ref().map(|o| {
                let [r, c] = o.path[local % o.path.len()];
                (
                    r * geo.grid_w + c,
                    object_proto.clone().expect("object prototype"),
                )
            });
            plans.push(FramePlan {
                local,
                proto,
                drift: s.drift,
                directions: directions.clone(),
                object,
            });
        }
    }

    let noise_scale = spec.noise / (dim as f64).sqrt();
    let frames: Vec<Vec<f32>> = plans
        .par_iter()
        .enumerate()
        .map(|(t, plan)| {
            let mut rng = seeding::stream(seed, &[NOISE, t as u64]);
            let mut out = Vec::with_capacity(cells * dim);
            for g in 0..cells {
                let mut v: Vec<f64> = match &plan.object {
                    Some((cell, proto)) if *cell == g => proto.clone(),
                    _ => plan.proto[g].clone(),
                };
                if let Some(dirs) = &plan.directions {
                    let step = plan.drift * plan.local as f64;
                    for (x, d) in v.iter_mut().zip(&dirs[g]) {
                        *x += step * d;
                    }
                }
                if noise_scale > 0.0 {
                    for x in v.iter_mut() {
                        let z: f64 = rng.sample(StandardNormal);
                        *x += noise_scale * z;
                    }
                }
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                out.extend(v.iter().map(|x| (x / norm) as f32));
            }
            out
        })
        .collect();

    VideoTokens::new(geo.frames, geo.grid_h, geo.grid_w, dim, frames.concat())
}
