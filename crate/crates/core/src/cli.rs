//! Command-line surface: `gen`, `prune`, `eval` and `compare`.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::io::{
    read_json, read_vtok, write_dot, write_json, write_trace_csv, write_vtok, ForestExport,
    ResultFile,
};
use crate::metrics::{baseline_prune, write_csv, BaselineMethod, FrameCountRow, MetricsRow};
use crate::prune::prune_video_detailed;
use crate::synth::SceneFile;
use crate::tokens::{
    compute_budget, PruneConfig, PruneResult, SelectorKind, VideoTokens, DEFAULT_KEEP_RATIO,
    DEFAULT_LAMBDA, DEFAULT_TAU_P, DEFAULT_TAU_S,
};

#[derive(Debug, Parser)]
#[command(
    name = "forestprune",
    version,
    about = "Spatial-temporal forest pruning of video tokens"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic video from a scene file.
    Gen {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Prune a video and write the retained token ids as JSON.
    Prune {
        #[arg(long = "in")]
        input: PathBuf,
        #[command(flatten)]
        params: PruneArgs,
        #[arg(long)]
        out: PathBuf,
        /// Write the removal trace as CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Write the forest; `.dot` paths get Graphviz, anything else JSON.
        #[arg(long)]
        export_forest: Option<PathBuf>,
    },
    /// Score a pruning result.
    Eval {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        result: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write per-frame retained counts.
        #[arg(long)]
        per_frame: Option<PathBuf>,
    },
    /// Run several pruning methods over a list of seeds.
    Compare {
        #[arg(long = "in")]
        input: PathBuf,
        #[command(flatten)]
        params: PruneArgs,
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "forest,random,per_frame_topk,global_topk"
        )]
        methods: Vec<String>,
        #[arg(long, value_delimiter = ',', default_value = "0")]
        seeds: Vec<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Also write per-frame retained counts.
        #[arg(long)]
        per_frame: Option<PathBuf>,
        /// Record wall-clock runtimes (makes the report non-reproducible).
        #[arg(long)]
        timing: bool,
    },
}

#[derive(Debug, Clone, Args)]
pub struct PruneArgs {
    /// Fraction of tokens to remove, in [0, 1).
    #[arg(long, default_value_t = 0.9)]
    pub ratio: f64,
    /// Semantic similarity threshold.
    #[arg(long, default_value_t = DEFAULT_TAU_S)]
    pub tau_s: f64,
    /// Spatial distance threshold on normalized grid coordinates.
    #[arg(long, default_value_t = DEFAULT_TAU_P)]
    pub tau_p: f64,
    /// Spatial penalty weight when ranking parents (unanchored default: no published value).
    #[arg(long, default_value_t = DEFAULT_LAMBDA)]
    pub lambda: f64,
    /// Fraction of each frame's tokens admitted as candidate nodes.
    #[arg(long, default_value_t = DEFAULT_KEEP_RATIO)]
    pub keep_ratio: f64,
    /// Node selector: random, norm_saliency or all.
    #[arg(long, default_value = "random")]
    pub selector: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl PruneArgs {
    pub fn config(&self) -> Result<PruneConfig> {
        let cfg = PruneConfig {
            tau_s: self.tau_s,
            tau_p: self.tau_p,
            lambda: self.lambda,
            keep_ratio: self.keep_ratio,
            selector: self.selector.parse::<SelectorKind>()?,
            budget_ratio: self.ratio,
            seed: self.seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen { spec, out, seed } => {
            let video = SceneFile::load(&spec)?.generate(seed)?;
            write_vtok(&video, out)
        }
        Command::Prune {
            input,
            params,
            out,
            trace,
            export_forest,
        } => {
            let config = params.config()?;
            let video = read_vtok(&input)?;
            let run = prune_video_detailed(&video, &config)?;
            write_json(
                &ResultFile {
                    method: "forest".into(),
                    frames: video.frames(),
                    tokens_per_frame: video.tokens_per_frame(),
                    budget: run.budget,
                    config: Some(config.clone()),
                    result: run.result,
                },
                &out,
            )?;
            if let Some(path) = trace {
                write_trace_csv(&run.trace, BufWriter::new(File::create(path)?))?;
            }
            if let Some(path) = export_forest {
                if path.extension().is_some_and(|e| e == "dot") {
                    write_dot(
                        &run.forest,
                        video.grid_w(),
                        BufWriter::new(File::create(path)?),
                    )?;
                } else {
                    write_json(&ForestExport::new(&run.forest, Some(&config)), path)?;
                }
            }
            Ok(())
        }
        Command::Eval {
            input,
            result,
            out,
            per_frame,
        } => {
            let video = read_vtok(&input)?;
            let file: ResultFile = read_json(&result)?;
            check_result(&video, &file)?;
            let (ratio, seed) = file
                .config
                .as_ref()
                .map_or((f64::NAN, 0), |c| (c.budget_ratio, c.seed));
            let id = spec_id(&input);
            let row = MetricsRow::evaluate(&id, &file.method, ratio, seed, &video, &file.result);
            write_csv(BufWriter::new(File::create(out)?), &[row])?;
            if let Some(path) = per_frame {
                let rows = FrameCountRow::from_result(&id, &file.method, seed, &file.result);
                write_csv(BufWriter::new(File::create(path)?), &rows)?;
            }
            Ok(())
        }
        Command::Compare {
            input,
            params,
            methods,
            seeds,
            out,
            per_frame,
            timing,
        } => {
            let base = params.config()?;
            let video = read_vtok(&input)?;
            let report = compare(&video, &spec_id(&input), &base, &methods, &seeds, timing)?;
            write_csv(BufWriter::new(File::create(out)?), &report.rows)?;
            if let Some(path) = per_frame {
                write_csv(BufWriter::new(File::create(path)?), &report.frame_counts)?;
            }
            Ok(())
        }
    }
}

fn spec_id(path: &Path) -> String {
    path.file_stem()
        .map_or_else(|| "input".to_string(), |s| s.to_string_lossy().into_owned())
}

fn check_result(video: &VideoTokens, file: &ResultFile) -> Result<()> {
    if file.frames != video.frames() || file.tokens_per_frame != video.tokens_per_frame() {
        return Err(Error::InvalidVideo(format!(
            "result was produced for {}x{} tokens, video has {}x{}",
            file.frames,
            file.tokens_per_frame,
            video.frames(),
            video.tokens_per_frame()
        )));
    }
    if let Some(&bad) = file
        .result
        .retained
        .iter()
        .find(|&&id| id >= video.total_tokens())
    {
        return Err(Error::InvalidVideo(format!(
            "retained id {bad} is out of range"
        )));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompareReport {
    pub rows: Vec<MetricsRow>,
    pub frame_counts: Vec<FrameCountRow>,
}

enum Method {
    Forest,
    Baseline(BaselineMethod),
}

/// Runs every `(method, seed)` cell. Cells run concurrently; rows come back
/// in method-major, seed-minor order.
pub fn compare(
    video: &VideoTokens,
    spec_id: &str,
    base: &PruneConfig,
    methods: &[String],
    seeds: &[u64],
    timing: bool,
) -> Result<CompareReport> {
    let parsed = methods
        .iter()
        .map(|m| match m.as_str() {
            "forest" => Ok(Method::Forest),
            other => other.parse().map(Method::Baseline),
        })
        .collect::<Result<Vec<_>>>()?;
    let budget = compute_budget(base.budget_ratio, video.frames(), video.tokens_per_frame());
    let cells: Vec<(usize, u64)> = (0..parsed.len())
        .flat_map(|m| seeds.iter().map(move |&s| (m, s)))
        .collect();
    let results = cells
        .par_iter()
        .map(|&(m, seed)| -> Result<(MetricsRow, Vec<FrameCountRow>)> {
            let start = Instant::now();
            let result: PruneResult = match parsed[m] {
                Method::Forest => {
                    let cfg = PruneConfig {
                        seed,
                        ..base.clone()
                    };
                    prune_video_detailed(video, &cfg)?.result
                }
                Method::Baseline(b) => baseline_prune(video, budget, b, seed)?,
            };
            let elapsed = start.elapsed().as_secs_f64() * 1e3;
            let mut row = MetricsRow::evaluate(
                spec_id,
                &methods[m],
                base.budget_ratio,
                seed,
                video,
                &result,
            );
            if timing {
                row.runtime_ms = Some(elapsed);
            }
            let counts = FrameCountRow::from_result(spec_id, &methods[m], seed, &result);
            Ok((row, counts))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut report = CompareReport {
        rows: Vec::with_capacity(results.len()),
        frame_counts: Vec::new(),
    };
    for (row, counts) in results {
        report.rows.push(row);
        report.frame_counts.extend(counts);
    }
    Ok(report)
}
