//! Acceptance criteria. Every criterion prints one PASS/FAIL line (straight
//! to stdout, so it shows up even when test output is captured) and the
//! test fails if any criterion does.

#![allow(clippy::needless_range_loop)]

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use forestprune::forest::{find_roots, ConnectionGraph, PairMatrices};
use forestprune::io::{decode_vtok, encode_vtok, ForestExport};
use forestprune::metrics::{baseline_prune, result_redundancy, BaselineMethod};
use forestprune::oracle::{oracle_forest, oracle_prune};
use forestprune::prune::{RemovalReason, RemovalTrace};
use forestprune::synth::{gen_video, Geometry, SceneSpec, Segment};
use forestprune::{
    build_forest, compute_budget, prune_to_budget, prune_video, prune_video_detailed, select_nodes,
    Forest, NodeId, PruneConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{random_config, random_instance, random_video};

/// Seeds for the statistical criteria.
const STAT_SEEDS: std::ops::RangeInclusive<u64> = 1..=100;
const STAT_REQUIRED: usize = 95;

type Criterion = fn() -> Outcome;

struct Outcome {
    pass: bool,
    detail: String,
}

fn report(id: usize, name: &str, outcome: &Outcome) {
    let line = format!(
        "[{}] criterion {id}: {name}: {}\n",
        if outcome.pass { "PASS" } else { "FAIL" },
        outcome.detail
    );
    let mut out = std::io::stdout();
    out.write_all(line.as_bytes()).unwrap();
    out.flush().unwrap();
}

// ---------------------------------------------------------------------------
// structural checks, written independently of the library's own validation

fn frame_of(forest: &Forest, id: NodeId) -> usize {
    id / forest.tokens_per_frame
}

/// Longest root-to-leaf path by explicit recursion over children.
fn longest_path(root: NodeId, parent: &BTreeMap<NodeId, NodeId>) -> usize {
    parent
        .iter()
        .filter(|(_, &p)| p == root)
        .map(|(&c, _)| 1 + longest_path(c, parent))
        .max()
        .unwrap_or(0)
}

fn check_forest(forest: &Forest, node_ids: &BTreeSet<NodeId>) -> Result<(), String> {
    let mut covered: BTreeSet<NodeId> = BTreeSet::new();
    for &o in &forest.orphans {
        if !covered.insert(o) {
            return Err(format!("orphan {o} listed twice"));
        }
    }
    for t in &forest.trees {
        for &m in &t.members {
            if !covered.insert(m) {
                return Err(format!("node {m} belongs to two groups"));
            }
        }
        if t.parent.contains_key(&t.root) {
            return Err(format!("root {} has a parent", t.root));
        }
        for &m in &t.members {
            if m == t.root {
                continue;
            }
            let Some(&p) = t.parent.get(&m) else {
                return Err(format!("member {m} lacks a parent"));
            };
            if frame_of(forest, p) >= frame_of(forest, m) {
                return Err(format!("edge {p}->{m} is not forward in time"));
            }
            // reachability of the root
            let mut cur = m;
            let mut hops = 0;
            while let Some(&up) = t.parent.get(&cur) {
                cur = up;
                hops += 1;
                if hops > t.members.len() {
                    return Err(format!("cycle above {m}"));
                }
            }
            if cur != t.root {
                return Err(format!("member {m} does not reach root {}", t.root));
            }
        }
        if t.parent.keys().any(|c| !t.members.contains(c))
            || t.parent.values().any(|p| !t.members.contains(p))
        {
            return Err(format!("tree {} has edges outside its members", t.root));
        }
        let lp = longest_path(t.root, &t.parent);
        if t.depth != lp {
            return Err(format!(
                "tree {} depth {} != longest path {lp}",
                t.root, t.depth
            ));
        }
        let max_frame = t
            .members
            .iter()
            .map(|&m| frame_of(forest, m))
            .max()
            .unwrap();
        if t.depth > max_frame - frame_of(forest, t.root) {
            return Err(format!("tree {} deeper than its time span", t.root));
        }
        if (t.depth == 0) != (t.members.len() == 1) {
            return Err(format!("tree {}: depth 0 must mean singleton", t.root));
        }
    }
    if &covered != node_ids {
        return Err("trees and orphans do not partition the node set".into());
    }
    Ok(())
}

/// Role ordering of a removal trace against the forest it was taken from.
fn check_roles(forest: &Forest, trace: &RemovalTrace) -> Result<(), String> {
    let mut alive = forest.all_nodes();
    let mut pending_leaves: BTreeMap<NodeId, BTreeSet<NodeId>> = BTreeMap::new();
    let mut tree_of: BTreeMap<NodeId, NodeId> = BTreeMap::new();
    let roots: BTreeSet<NodeId> = forest.trees.iter().map(|t| t.root).collect();
    for t in &forest.trees {
        let parents: BTreeSet<NodeId> = t.parent.values().copied().collect();
        let leaves = t
            .members
            .iter()
            .copied()
            .filter(|m| *m != t.root && !parents.contains(m))
            .collect();
        pending_leaves.insert(t.root, leaves);
        for &m in &t.members {
            tree_of.insert(m, t.root);
        }
    }
    let mut orphans_left = forest.orphans.len();
    for r in &trace.removals {
        if !alive.remove(&r.node) {
            return Err(format!("node {} removed twice or unknown", r.node));
        }
        if forest.orphans.contains(&r.node) {
            orphans_left -= 1;
            continue;
        }
        if orphans_left > 0 {
            return Err(format!("tree node {} removed before the orphans", r.node));
        }
        let tree = tree_of[&r.node];
        let leaves = pending_leaves.get_mut(&tree).unwrap();
        if leaves.remove(&r.node) {
            continue;
        }
        if !leaves.is_empty() {
            return Err(format!(
                "trunk/root {} removed while tree {tree} still has leaves",
                r.node
            ));
        }
        if roots.contains(&r.node) {
            if alive.iter().any(|n| !roots.contains(n)) {
                return Err(format!(
                    "root {} removed while non-root nodes remain",
                    r.node
                ));
            }
            if r.reason != RemovalReason::RootFallback {
                return Err(format!(
                    "root {} removed outside the fallback phase",
                    r.node
                ));
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------

fn criterion_oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut mismatches = Vec::new();
    for seed in 0..1000u64 {
        let inst = random_instance(seed);
        let main = build_forest(&inst.nodes, &inst.config, inst.budget).unwrap();
        let oracle = oracle_forest(&inst.nodes, &inst.config, inst.budget);
        if main != oracle {
            mismatches.push(format!("forest seed {seed}"));
            continue;
        }
        let (res, _) = prune_to_budget(&main, inst.budget);
        if res != oracle_prune(&oracle, inst.budget) {
            mismatches.push(format!("prune seed {seed}"));
        }
    }
    let elapsed = start.elapsed();
    Outcome {
        pass: mismatches.is_empty() && elapsed < Duration::from_secs(60),
        detail: format!(
            "1000 instances, {} mismatches {:?}, {:.2}s (limit 60s)",
            mismatches.len(),
            mismatches.iter().take(5).collect::<Vec<_>>(),
            elapsed.as_secs_f64()
        ),
    }
}

fn criterion_structural_fuzz() -> Outcome {
    let mut violations = Vec::new();
    for seed in 0..10_000u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(0xf022 ^ seed);
        let video = random_video(&mut rng, 8, 16, 8);
        let cfg = random_config(&mut rng);
        let nodes = select_nodes(&video, cfg.keep_ratio, cfg.selector, cfg.seed).unwrap();
        let k = nodes.len();
        let frames: Vec<usize> = nodes.nodes().iter().map(|n| n.frame).collect();
        let m = PairMatrices::compute(&nodes, cfg.tau_s, cfg.tau_p, cfg.lambda);
        let c = |i: usize, j: usize| m.connections.get(i, j);

        // acyclicity via Kahn's algorithm
        let mut indeg: Vec<usize> = (0..k)
            .map(|j| (0..k).filter(|&i| c(i, j)).count())
            .collect();
        let mut queue: Vec<usize> = (0..k).filter(|&j| indeg[j] == 0).collect();
        let mut seen = 0;
        while let Some(i) = queue.pop() {
            seen += 1;
            for j in 0..k {
                if c(i, j) {
                    indeg[j] -= 1;
                    if indeg[j] == 0 {
                        queue.push(j);
                    }
                }
            }
        }
        if seen != k {
            violations.push(format!("seed {seed}: cycle in C"));
            continue;
        }
        for i in 0..k {
            for j in 0..k {
                if c(i, j) && frames[i] >= frames[j] {
                    violations.push(format!("seed {seed}: C[{i}][{j}] against time"));
                }
                if m.ranks.get(i, j) != 0.0 && !c(i, j) {
                    violations.push(format!("seed {seed}: P nonzero off C"));
                }
            }
        }

        // root degree conditions, checked literally on the columns and rows of C
        let graph = ConnectionGraph::from_matrices(frames.clone(), &m.connections, &m.ranks);
        let roots = find_roots(&graph);
        let expected: Vec<usize> = (0..k)
            .filter(|&j| (0..k).all(|i| !c(i, j)) && (0..k).any(|x| c(j, x)))
            .collect();
        if roots.roots != expected {
            violations.push(format!(
                "seed {seed}: roots {:?} != {:?}",
                roots.roots, expected
            ));
        }

        let budget = rng.random_range(1..=k);
        let forest = build_forest(&nodes, &cfg, budget).unwrap();
        let ids: BTreeSet<NodeId> = nodes.ids().collect();
        if let Err(e) = check_forest(&forest, &ids) {
            violations.push(format!("seed {seed}: {e}"));
        }
    }
    Outcome {
        pass: violations.is_empty(),
        detail: format!(
            "10000 instances, {} violations {:?}",
            violations.len(),
            violations.iter().take(5).collect::<Vec<_>>()
        ),
    }
}

fn criterion_budget_and_nesting() -> Outcome {
    let mut violations = Vec::new();
    let mut cases = 0;
    for seed in 0..200u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(0xb0d6 ^ seed);
        let video = random_video(&mut rng, 16, 16, 16);
        let cfg = random_config(&mut rng);
        let nodes = select_nodes(&video, cfg.keep_ratio, cfg.selector, cfg.seed).unwrap();
        if nodes.len() < 3 {
            continue;
        }
        let mut ladder: Vec<usize> = Vec::new();
        while ladder.len() < 3 {
            let k = rng.random_range(1..=nodes.len());
            if !ladder.contains(&k) {
                ladder.push(k);
            }
        }
        ladder.sort_unstable();
        cases += 1;
        let forest = build_forest(&nodes, &cfg, ladder[0]).unwrap();
        let sets: Vec<BTreeSet<NodeId>> = ladder
            .iter()
            .map(|&k| {
                let (res, trace) = prune_to_budget(&forest, k);
                if res.retained.len() != k {
                    violations.push(format!(
                        "seed {seed}: |retained|={} for K={k}",
                        res.retained.len()
                    ));
                }
                if trace.replay(&forest) != res.retained.iter().copied().collect() {
                    violations.push(format!("seed {seed}: trace replay differs"));
                }
                res.retained.into_iter().collect()
            })
            .collect();
        if !(sets[0].is_subset(&sets[1]) && sets[1].is_subset(&sets[2])) {
            violations.push(format!(
                "seed {seed}: retained sets not nested for {ladder:?}"
            ));
        }
    }
    Outcome {
        pass: violations.is_empty() && cases >= 190,
        detail: format!(
            "{cases} ladders, {} violations {:?}",
            violations.len(),
            violations.iter().take(5).collect::<Vec<_>>()
        ),
    }
}

fn criterion_role_ordering() -> Outcome {
    let mut violations = Vec::new();
    let mut traces = 0;
    for seed in 0..1000u64 {
        let inst = random_instance(seed);
        let forest = build_forest(&inst.nodes, &inst.config, inst.budget).unwrap();
        // the full removal sequence covers every truncation point
        let (_, trace) = prune_to_budget(&forest, 1);
        traces += 1;
        if let Err(e) = check_roles(&forest, &trace) {
            violations.push(format!("seed {seed}: {e}"));
        }
    }
    Outcome {
        pass: violations.is_empty(),
        detail: format!(
            "{traces} traces, {} violations {:?}",
            violations.len(),
            violations.iter().take(5).collect::<Vec<_>>()
        ),
    }
}

fn stat_geometry(frames: usize) -> Geometry {
    Geometry {
        frames,
        grid_h: 8,
        grid_w: 8,
        dim: 64,
    }
}

fn criterion_directional_redundancy() -> Outcome {
    let geo = stat_geometry(32);
    let spec = SceneSpec::static_scene(32, 0.05);
    let mut wins = 0;
    let mut gaps = Vec::new();
    for seed in STAT_SEEDS {
        let video = gen_video(&spec, &geo, seed).unwrap();
        let cfg = PruneConfig {
            budget_ratio: 0.9,
            seed,
            ..Default::default()
        };
        let forest = prune_video(&video, &cfg).unwrap();
        let k = compute_budget(0.9, geo.frames, 64);
        let topk = baseline_prune(&video, k, BaselineMethod::PerFrameTopkNorm, seed).unwrap();
        let rf = result_redundancy(&video, &forest).unwrap();
        let rt = result_redundancy(&video, &topk).unwrap();
        gaps.push(rt - rf);
        if rf < rt {
            wins += 1;
        }
    }
    let mean_gap = gaps.iter().sum::<f64>() / gaps.len() as f64;
    Outcome {
        pass: wins >= STAT_REQUIRED,
        detail: format!("forest less redundant on {wins}/100 seeds (need {STAT_REQUIRED}), mean gap {mean_gap:.4}"),
    }
}

fn criterion_scene_change_spike() -> Outcome {
    let geo = stat_geometry(32);
    let change = 16;
    let spec = SceneSpec::scene_change(32, change, 0.05);
    let mut hits = 0;
    let mut example = String::new();
    for seed in STAT_SEEDS {
        let video = gen_video(&spec, &geo, seed).unwrap();
        let cfg = PruneConfig {
            budget_ratio: 0.9,
            seed,
            ..Default::default()
        };
        let counts = prune_video(&video, &cfg).unwrap().per_frame_counts;
        let before = counts[change - 5..change].iter().sum::<usize>() as f64 / 5.0;
        if counts[change] as f64 > before {
            hits += 1;
        }
        if seed == *STAT_SEEDS.start() {
            example = format!("seed 1 counts {counts:?}");
        }
    }
    Outcome {
        pass: hits >= STAT_REQUIRED,
        detail: format!(
            "spike at frame {change} on {hits}/100 seeds (need {STAT_REQUIRED}); {example}"
        ),
    }
}

fn run_cli(args: &[&str], threads: Option<&str>) -> bool {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_forestprune"));
    cmd.args(args);
    if let Some(t) = threads {
        cmd.env("RAYON_NUM_THREADS", t);
    }
    cmd.status().map(|s| s.success()).unwrap_or(false)
}

fn criterion_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name).to_string_lossy().into_owned();
    let video = gen_video(
        &SceneSpec {
            noise: 0.05,
            segments: vec![Segment::new(6, 0), Segment::new(6, 1)],
        },
        &Geometry {
            frames: 12,
            grid_h: 6,
            grid_w: 6,
            dim: 32,
        },
        5,
    )
    .unwrap();
    forestprune::io::write_vtok(&video, p("in.vtok")).unwrap();
    let input = p("in.vtok");

    let mut problems = Vec::new();
    let mut outputs: Vec<Vec<Vec<u8>>> = Vec::new();
    for (run, threads) in [None, None, Some("1"), Some("3")].into_iter().enumerate() {
        let tag = |s: &str| p(&format!("{s}{run}"));
        let ok_prune = run_cli(
            &[
                "prune",
                "--in",
                &input,
                "--ratio",
                "0.8",
                "--seed",
                "9",
                "--out",
                &tag("result"),
                "--trace",
                &tag("trace"),
                "--export-forest",
                &tag("forest"),
            ],
            threads,
        );
        let ok_compare = run_cli(
            &[
                "compare",
                "--in",
                &input,
                "--ratio",
                "0.8",
                "--seeds",
                "1,2,3",
                "--out",
                &tag("compare"),
                "--per-frame",
                &tag("frames"),
            ],
            threads,
        );
        if !(ok_prune && ok_compare) {
            problems.push(format!("run {run} failed"));
            continue;
        }
        outputs.push(
            ["result", "trace", "forest", "compare", "frames"]
                .iter()
                .map(|s| std::fs::read(tag(s)).unwrap())
                .collect(),
        );
    }
    if outputs.windows(2).any(|w| w[0] != w[1]) {
        problems.push("outputs differ between runs".into());
    }
    Outcome {
        pass: problems.is_empty() && outputs.len() == 4,
        detail: format!(
            "4 runs of prune+compare (default, default, 1 thread, 3 threads): {}",
            if problems.is_empty() {
                "byte-identical".to_string()
            } else {
                problems.join("; ")
            }
        ),
    }
}

fn peak_rss_bytes() -> Option<u64> {
    let status = std::fs::read_to_string(Path::new("/proc/self/status")).ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    let kb: u64 = line.split_whitespace().nth(1)?.parse().ok()?;
    Some(kb * 1024)
}

fn criterion_performance() -> Outcome {
    let geo = Geometry {
        frames: 64,
        grid_h: 13,
        grid_w: 13,
        dim: 64,
    };
    let spec = SceneSpec {
        noise: 0.05,
        segments: (0..4).map(|s| Segment::new(16, s)).collect(),
    };
    let video = gen_video(&spec, &geo, 42).unwrap();
    let cfg = PruneConfig {
        budget_ratio: 0.9,
        seed: 42,
        ..Default::default()
    };
    let start = Instant::now();
    let run = prune_video_detailed(&video, &cfg).unwrap();
    let elapsed = start.elapsed();
    let rss = peak_rss_bytes();
    let mem_ok = rss.is_none_or(|b| b < 2 << 30);
    Outcome {
        pass: elapsed < Duration::from_secs(5) && mem_ok && run.result.retained.len() == 1082,
        detail: format!(
            "{} nodes, K={}, {:.3}s (limit 5s), peak RSS {} (limit 2 GiB)",
            run.nodes.len(),
            run.result.retained.len(),
            elapsed.as_secs_f64(),
            rss.map_or("unavailable".into(), |b| format!(
                "{:.0} MiB",
                b as f64 / (1 << 20) as f64
            ))
        ),
    }
}

fn criterion_round_trip() -> Outcome {
    let mut failures = Vec::new();
    for seed in 0..100u64 {
        let inst = random_instance(0x7007 + seed);
        let bytes = encode_vtok(&inst.video);
        match decode_vtok(&bytes) {
            Ok(back) => {
                let same_bits = back
                    .embeddings()
                    .iter()
                    .zip(inst.video.embeddings())
                    .all(|(a, b)| a.to_bits() == b.to_bits());
                if !same_bits || back != inst.video || encode_vtok(&back) != bytes {
                    failures.push(format!("vtok seed {seed}"));
                }
            }
            Err(e) => failures.push(format!("vtok seed {seed}: {e}")),
        }
        let forest = build_forest(&inst.nodes, &inst.config, inst.budget).unwrap();
        let text = serde_json::to_string(&ForestExport::new(&forest, Some(&inst.config))).unwrap();
        let parsed: ForestExport = serde_json::from_str(&text).unwrap();
        if parsed.to_forest().ok().as_ref() != Some(&forest)
            || parsed.config.as_ref() != Some(&inst.config)
        {
            failures.push(format!("forest seed {seed}"));
        }
    }
    Outcome {
        pass: failures.is_empty(),
        detail: format!(
            "100 instances, {} failures {:?}",
            failures.len(),
            failures.iter().take(5).collect::<Vec<_>>()
        ),
    }
}

#[test]
fn acceptance_criteria() {
    let criteria: [(&str, Criterion); 9] = [
        ("oracle equivalence", criterion_oracle_equivalence),
        ("structural invariant fuzz", criterion_structural_fuzz),
        (
            "budget exactness and nestedness",
            criterion_budget_and_nesting,
        ),
        ("role ordering", criterion_role_ordering),
        (
            "directional redundancy vs per-frame top-k",
            criterion_directional_redundancy,
        ),
        ("scene-change spike", criterion_scene_change_spike),
        ("determinism of prune and compare", criterion_determinism),
        ("performance on a 64x169x64 input", criterion_performance),
        ("format round-trip", criterion_round_trip),
    ];
    let mut failed = Vec::new();
    for (i, (name, f)) in criteria.iter().enumerate() {
        let outcome = f();
        report(i + 1, name, &outcome);
        if !outcome.pass {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
