//! Brute-force reference implementations of forest construction and
//! pruning, for cross-checking the main path on small inputs.
//!
//! Everything here is written as plain nested loops over dense matrices and
//! literal list scans: no sparse graph, no precomputed orderings, no
//! shared helpers with [`crate::forest`] or [`crate::prune`]. Floating
//! point values are produced by the same arithmetic in the same order, so
//! comparisons against thresholds agree exactly.

#![allow(clippy::needless_range_loop)]

use std::collections::{BTreeMap, BTreeSet};

use crate::forest::{Forest, Tree};
use crate::tokens::{NodeId, NodeSet, PruneConfig, PruneResult};

/// Largest node set the oracle accepts.
pub const MAX_ORACLE_NODES: usize = 256;

struct Dense {
    frame: Vec<usize>,
    a: Vec<Vec<f64>>,
    c: Vec<Vec<bool>>,
    p: Vec<Vec<f64>>,
}

fn dense(nodes: &NodeSet, config: &PruneConfig) -> Dense {
    let ns = nodes.nodes();
    let k = ns.len();
    let frame: Vec<usize> = ns.iter().map(|n| n.frame).collect();
    let mut a = vec![vec![0.0; k]; k];
    let mut d = vec![vec![0.0; k]; k];
    let mut c = vec![vec![false; k]; k];
    let mut p = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in 0..k {
            let mut s = 0.0;
            for x in 0..ns[i].unit_embedding.len() {
                s += ns[i].unit_embedding[x] * ns[j].unit_embedding[x];
            }
            a[i][j] = s;
        }
    }
    for i in 0..k {
        for j in 0..k {
            let dr = ns[i].coord[0] - ns[j].coord[0];
            let dc = ns[i].coord[1] - ns[j].coord[1];
            d[i][j] = (dr * dr + dc * dc).sqrt();
        }
    }
    for i in 0..k {
        for j in 0..k {
            let semantic = a[i][j] >= config.tau_s;
            let spatial = d[i][j] <= config.tau_p;
            let temporal = frame[i] < frame[j];
            c[i][j] = semantic && spatial && temporal;
        }
    }
    for i in 0..k {
        for j in 0..k {
            if c[i][j] {
                let score = a[i][j] - config.lambda * d[i][j];
                p[i][j] = if score > 0.0 { score } else { 1e-9 };
            }
        }
    }
    Dense { frame, a, c, p }
}

/// Whether candidate parent `x` beats `y` as the parent of some node.
fn beats(m: &Dense, j: usize, x: usize, y: usize) -> bool {
    if m.p[x][j] != m.p[y][j] {
        return m.p[x][j] > m.p[y][j];
    }
    if m.frame[x] != m.frame[y] {
        return m.frame[x] > m.frame[y];
    }
    x < y
}

/// Longest root-to-leaf path by depth-first search over the child lists.
fn dfs_depth(root: NodeId, parent: &BTreeMap<NodeId, NodeId>) -> usize {
    let mut best = 0;
    let mut stack = vec![(root, 0usize)];
    while let Some((node, depth)) = stack.pop() {
        if depth > best {
            best = depth;
        }
        for (&c, &p) in parent {
            if p == node {
                stack.push((c, depth + 1));
            }
        }
    }
    best
}

/// Reference forest: dense matrices, exhaustive best-parent search, then
/// greedy root merging by rescanning every root pair after each merge.
pub fn oracle_forest(nodes: &NodeSet, config: &PruneConfig, budget: usize) -> Forest {
    assert!(
        nodes.len() <= MAX_ORACLE_NODES,
        "oracle is limited to {MAX_ORACLE_NODES} nodes"
    );
    let ns = nodes.nodes();
    let k = ns.len();
    let m = dense(nodes, config);

    let in_deg = |j: usize| (0..k).filter(|&i| m.c[i][j]).count();
    let out_deg = |i: usize| (0..k).filter(|&j| m.c[i][j]).count();

    // best incoming link of every connected node
    let mut best: Vec<Option<usize>> = vec![None; k];
    for j in 0..k {
        for i in 0..k {
            if m.c[i][j] && best[j].is_none_or(|b| beats(&m, j, i, b)) {
                best[j] = Some(i);
            }
        }
    }

    let mut orphans: BTreeSet<NodeId> = BTreeSet::new();
    let mut members: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for j in 0..k {
        if in_deg(j) == 0 {
            if out_deg(j) == 0 {
                orphans.insert(ns[j].id);
            } else {
                members.entry(j).or_default().push(j);
            }
            continue;
        }
        let mut top = j;
        while let Some(b) = best[top] {
            top = b;
        }
        members.entry(top).or_default().push(j);
    }

    let mut trees: Vec<Tree> = Vec::new();
    for (root, group) in members {
        let mut attached = vec![root];
        let mut parent = BTreeMap::new();
        let mut sorted = group.clone();
        sorted.sort_by_key(|&x| (m.frame[x], x));
        for &x in &sorted {
            if x == root {
                continue;
            }
            let mut choice: Option<usize> = None;
            for &cand in &attached {
                if m.c[cand][x] && choice.is_none_or(|b| beats(&m, x, cand, b)) {
                    choice = Some(cand);
                }
            }
            match choice {
                Some(p) => {
                    attached.push(x);
                    parent.insert(ns[x].id, ns[p].id);
                }
                None => {
                    orphans.insert(ns[x].id);
                }
            }
        }
        let parent: BTreeMap<NodeId, NodeId> = parent;
        trees.push(Tree {
            root: ns[root].id,
            members: attached.iter().map(|&x| ns[x].id).collect(),
            depth: dfs_depth(ns[root].id, &parent),
            parent,
        });
    }

    // merging; similarities come from the dense matrix
    let index_of = |id: NodeId| ns.iter().position(|n| n.id == id).expect("known id");
    let mut halted = false;
    while trees.len() > budget {
        let mut pick: Option<(f64, usize, usize)> = None;
        for x in 0..trees.len() {
            for y in 0..trees.len() {
                let (ra, rb) = (trees[x].root, trees[y].root);
                if ra >= rb {
                    continue;
                }
                let (ia, ib) = (index_of(ra), index_of(rb));
                if m.frame[ia] == m.frame[ib] {
                    continue;
                }
                let s = m.a[ia][ib];
                let better = match pick {
                    None => true,
                    Some((bs, bx, by)) => {
                        s > bs || (s == bs && (ra, rb) < (trees[bx].root, trees[by].root))
                    }
                };
                if better {
                    pick = Some((s, x, y));
                }
            }
        }
        match pick {
            Some((s, x, y)) if s >= config.tau_s / 2.0 => {
                let (ix, iy) = (index_of(trees[x].root), index_of(trees[y].root));
                let (host, guest) = if m.frame[ix] < m.frame[iy] {
                    (x, y)
                } else {
                    (y, x)
                };
                let g = trees[guest].clone();
                let h = &mut trees[host];
                h.members.extend(g.members.iter().copied());
                h.parent.extend(g.parent.iter().map(|(&a, &b)| (a, b)));
                h.parent.insert(g.root, h.root);
                h.depth = dfs_depth(h.root, &h.parent);
                trees.remove(guest);
            }
            _ => {
                halted = true;
                break;
            }
        }
    }
    trees.sort_by_key(|t| t.root);

    Forest {
        frames: nodes.frames(),
        tokens_per_frame: nodes.tokens_per_frame(),
        trees,
        orphans,
        merge_halted: halted,
    }
}

/// Reference pruning: at every step, scan the live state for the next node
/// to remove according to the phase rules.
pub fn oracle_prune(forest: &Forest, budget: usize) -> PruneResult {
    let frame = |id: NodeId| id / forest.tokens_per_frame;
    let later = |x: NodeId, y: NodeId| (frame(x), x) > (frame(y), y);

    let mut orphans: Vec<NodeId> = forest.orphans.iter().copied().collect();
    // (root, members, parent) per tree
    let mut trees: Vec<(NodeId, Vec<NodeId>, BTreeMap<NodeId, NodeId>)> = forest
        .trees
        .iter()
        .map(|t| {
            (
                t.root,
                t.members.iter().copied().collect(),
                t.parent.clone(),
            )
        })
        .collect();
    let mut first_leaves: Vec<Vec<NodeId>> = Vec::new();
    for (root, mem, parent) in &trees {
        let leaves = mem
            .iter()
            .copied()
            .filter(|x| x != root && !parent.values().any(|p| p == x))
            .collect();
        first_leaves.push(leaves);
    }
    let rank =
        |depth: usize, size: usize, root: NodeId| (usize::MAX - depth, usize::MAX - size, root);
    let mut leaf_order: Vec<usize> = (0..trees.len()).collect();
    leaf_order.sort_by_key(|&t| {
        rank(
            forest.trees[t].depth,
            forest.trees[t].len(),
            forest.trees[t].root,
        )
    });
    let mut tail_order: Option<Vec<usize>> = None;

    let mut count = forest.node_count();
    let mut removed: BTreeSet<NodeId> = BTreeSet::new();
    while count > budget {
        // orphans
        if !orphans.is_empty() {
            let mut pick = 0;
            for x in 1..orphans.len() {
                if later(orphans[x], orphans[pick]) {
                    pick = x;
                }
            }
            removed.insert(orphans.remove(pick));
            count -= 1;
            continue;
        }
        // leaves present when pruning began
        if let Some(&t) = leaf_order.iter().find(|&&t| !first_leaves[t].is_empty()) {
            let leaves = &mut first_leaves[t];
            let mut pick = 0;
            for x in 1..leaves.len() {
                if later(leaves[x], leaves[pick]) {
                    pick = x;
                }
            }
            let leaf = leaves.remove(pick);
            let (_, mem, parent) = &mut trees[t];
            mem.retain(|&x| x != leaf);
            parent.remove(&leaf);
            removed.insert(leaf);
            count -= 1;
            continue;
        }
        // tails
        let order = tail_order.get_or_insert_with(|| {
            let mut o: Vec<usize> = (0..trees.len()).collect();
            o.sort_by_key(|&t| {
                rank(
                    dfs_depth(trees[t].0, &trees[t].2),
                    trees[t].1.len(),
                    trees[t].0,
                )
            });
            o
        });
        if let Some(&t) = order.iter().find(|&&t| trees[t].1.len() > 1) {
            let (_, mem, parent) = &mut trees[t];
            let last = mem.iter().map(|&x| frame(x)).max().expect("non-empty");
            let node = mem
                .iter()
                .copied()
                .filter(|&x| frame(x) == last)
                .max()
                .expect("non-empty");
            let up = parent.remove(&node);
            for p in parent.values_mut() {
                if *p == node {
                    *p = up.expect("tail node has a parent");
                }
            }
            mem.retain(|&x| x != node);
            removed.insert(node);
            count -= 1;
            continue;
        }
        // roots
        let mut pick: Option<usize> = None;
        for (t, (root, mem, _)) in trees.iter().enumerate() {
            if mem.is_empty() {
                continue;
            }
            if pick.is_none_or(|p| later(*root, trees[p].0)) {
                pick = Some(t);
            }
        }
        let t = pick.expect("nodes remain while count > budget");
        let root = trees[t].0;
        trees[t].1.clear();
        removed.insert(root);
        count -= 1;
    }

    let retained: Vec<NodeId> = forest
        .all_nodes()
        .into_iter()
        .filter(|x| !removed.contains(x))
        .collect();
    let mut result = PruneResult::new(retained, forest.frames, forest.tokens_per_frame);
    result.budget_unreachable = budget > forest.node_count();
    result
}
