//! File formats.
//!
//! VTOK is the bulk embedding format, little-endian throughout:
//!
//! | offset | size        | field                                  |
//! |--------|-------------|----------------------------------------|
//! | 0      | 4           | magic `b"VTOK"`                        |
//! | 4      | 2           | version (`u16`, currently 1)           |
//! | 6      | 4 each      | T, N, d, grid_h, grid_w (`u32`)        |
//! | 26     | 4 · T·N·d   | `f32` values, frame / grid / dim order |
//!
//! Results, forests and traces are written as text (JSON, DOT, CSV) so they
//! can be diffed.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forest::{Forest, Tree};
use crate::prune::{RemovalReason, RemovalTrace};
use crate::tokens::{NodeId, PruneConfig, PruneResult, VideoTokens};

pub const VTOK_MAGIC: &[u8; 4] = b"VTOK";
pub const VTOK_VERSION: u16 = 1;
pub const VTOK_HEADER_LEN: usize = 26;

pub fn encode_vtok(video: &VideoTokens) -> Vec<u8> {
    let mut out = Vec::with_capacity(VTOK_HEADER_LEN + 4 * video.embeddings().len());
    out.extend_from_slice(VTOK_MAGIC);
    out.extend_from_slice(&VTOK_VERSION.to_le_bytes());
    for v in [
        video.frames(),
        video.tokens_per_frame(),
        video.dim(),
        video.grid_h(),
        video.grid_w(),
    ] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    for x in video.embeddings() {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out
}

pub fn decode_vtok(bytes: &[u8]) -> Result<VideoTokens> {
    if bytes.len() < 4 || &bytes[..4] != VTOK_MAGIC {
        return Err(Error::BadMagic);
    }
    if bytes.len() < VTOK_HEADER_LEN {
        return Err(Error::TruncatedPayload {
            expected: VTOK_HEADER_LEN as u64,
            actual: bytes.len() as u64,
        });
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VTOK_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let field = |i: usize| {
        let o = 6 + 4 * i;
        u32::from_le_bytes([bytes[o], bytes[o + 1], bytes[o + 2], bytes[o + 3]]) as u64
    };
    let (frames, tokens, dim, grid_h, grid_w) = (field(0), field(1), field(2), field(3), field(4));
    if grid_h * grid_w != tokens {
        return Err(Error::InvalidVideo(format!(
            "header grid {grid_h}x{grid_w} does not match {tokens} tokens per frame"
        )));
    }
    let expected = VTOK_HEADER_LEN as u64 + 4 * frames * tokens * dim;
    let actual = bytes.len() as u64;
    if actual < expected {
        return Err(Error::TruncatedPayload { expected, actual });
    }
    if actual > expected {
        return Err(Error::SizeMismatch { expected, actual });
    }
    let data = bytes[VTOK_HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    VideoTokens::new(
        frames as usize,
        grid_h as usize,
        grid_w as usize,
        dim as usize,
        data,
    )
}

pub fn read_vtok(path: impl AsRef<Path>) -> Result<VideoTokens> {
    let mut bytes = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
    decode_vtok(&bytes)
}

pub fn write_vtok(video: &VideoTokens, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&encode_vtok(video))?;
    w.flush()?;
    Ok(())
}

/// Serialized pruning result with enough context to evaluate it later.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultFile {
    pub method: String,
    pub frames: usize,
    pub tokens_per_frame: usize,
    pub budget: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<PruneConfig>,
    pub result: PruneResult,
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, to_json(value)?)?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: impl AsRef<Path>) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeExport {
    pub root: NodeId,
    pub members: Vec<NodeId>,
    /// `[child, parent]` pairs.
    pub parents: Vec<[NodeId; 2]>,
    pub depth: usize,
}

/// Structured-text form of a [`Forest`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestExport {
    pub frames: usize,
    pub tokens_per_frame: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<PruneConfig>,
    pub trees: Vec<TreeExport>,
    pub orphans: Vec<NodeId>,
    #[serde(default)]
    pub merge_halted: bool,
}

impl ForestExport {
    pub fn new(forest: &Forest, config: Option<&PruneConfig>) -> Self {
        Self {
            frames: forest.frames,
            tokens_per_frame: forest.tokens_per_frame,
            config: config.cloned(),
            trees: forest
                .trees
                .iter()
                .map(|t| TreeExport {
                    root: t.root,
                    members: t.members.iter().copied().collect(),
                    parents: t.parent.iter().map(|(&c, &p)| [c, p]).collect(),
                    depth: t.depth,
                })
                .collect(),
            orphans: forest.orphans.iter().copied().collect(),
            merge_halted: forest.merge_halted,
        }
    }

    /// Rebuilds the forest, rejecting documents that break its invariants.
    pub fn to_forest(&self) -> Result<Forest> {
        if self.tokens_per_frame == 0 {
            return Err(Error::MalformedForest(
                "tokens_per_frame must be >= 1".into(),
            ));
        }
        let forest = Forest {
            frames: self.frames,
            tokens_per_frame: self.tokens_per_frame,
            trees: self
                .trees
                .iter()
                .map(|t| Tree {
                    root: t.root,
                    members: t.members.iter().copied().collect(),
                    parent: t.parents.iter().map(|&[c, p]| (c, p)).collect(),
                    depth: t.depth,
                })
                .collect(),
            orphans: self.orphans.iter().copied().collect(),
            merge_halted: self.merge_halted,
        };
        forest.validate().map_err(Error::MalformedForest)?;
        Ok(forest)
    }
}

/// Graphviz rendering: one node per forest member with its frame and grid
/// cell, one edge per parent link.
pub fn write_dot<W: Write>(forest: &Forest, grid_w: usize, mut out: W) -> Result<()> {
    writeln!(out, "digraph forest {{")?;
    writeln!(out, "  rankdir=LR;")?;
    let node_line = |out: &mut W, id: NodeId, tree: Option<NodeId>| -> std::io::Result<()> {
        let g = id % forest.tokens_per_frame;
        let tree = tree.map_or_else(|| "none".to_string(), |r| r.to_string());
        writeln!(
            out,
            "  n{id} [label=\"{id}\", frame={}, row={}, col={}, tree=\"{tree}\"];",
            forest.timestep(id),
            g / grid_w,
            g % grid_w
        )
    };
    for t in &forest.trees {
        for &m in &t.members {
            node_line(&mut out, m, Some(t.root))?;
        }
    }
    for &o in &forest.orphans {
        node_line(&mut out, o, None)?;
    }
    for t in &forest.trees {
        for (c, p) in &t.parent {
            writeln!(out, "  n{p} -> n{c};")?;
        }
    }
    writeln!(out, "}}")?;
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct TraceRow {
    step: usize,
    node: NodeId,
    reason: RemovalReason,
    tree: Option<NodeId>,
}

pub fn write_trace_csv<W: Write>(trace: &RemovalTrace, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in &trace.removals {
        w.serialize(TraceRow {
            step: r.step,
            node: r.node,
            reason: r.reason,
            tree: r.tree,
        })?;
    }
    w.flush()?;
    Ok(())
}
