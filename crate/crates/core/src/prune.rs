//! Budgeted pruning of a token forest.
//!
//! Nodes are removed one at a time in a single total order that does not
//! depend on the budget, so pruning to `K` tokens keeps exactly the nodes
//! that survive the first `total - K` removals:
//!
//! 0. orphans, latest frame first;
//! 1. the forest's leaves, visiting trees from deepest to shallowest;
//! 2. tail groups (the members in a tree's last frame), again from the
//!    deepest remaining tree, each tree cut back to its root before the
//!    next one is touched;
//! 3. roots, latest frame first, so the earliest roots survive.

use std::cmp::Reverse;
use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forest::{build_forest, Forest, Tree};
use crate::select::select_nodes;
use crate::tokens::{compute_budget, NodeId, NodeSet, PruneConfig, PruneResult, VideoTokens};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RemovalReason {
    Orphan,
    Leaf,
    Tail,
    RootFallback,
}

impl fmt::Display for RemovalReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RemovalReason::Orphan => "orphan",
            RemovalReason::Leaf => "leaf",
            RemovalReason::Tail => "tail",
            RemovalReason::RootFallback => "root_fallback",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Removal {
    pub step: usize,
    pub node: NodeId,
    pub reason: RemovalReason,
    /// Root of the tree the node belonged to; `None` for orphans.
    pub tree: Option<NodeId>,
}

/// Removals in the order they were applied.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RemovalTrace {
    pub removals: Vec<Removal>,
}

impl RemovalTrace {
    /// Nodes of `forest` left after applying every removal in the trace.
    pub fn replay(&self, forest: &Forest) -> BTreeSet<NodeId> {
        let mut nodes = forest.all_nodes();
        for r in &self.removals {
            nodes.remove(&r.node);
        }
        nodes
    }
}

/// Non-root members without children. Roots are never leaves.
pub fn find_leaves(tree: &Tree) -> BTreeSet<NodeId> {
    let parents: BTreeSet<NodeId> = tree.parent.values().copied().collect();
    tree.members
        .iter()
        .copied()
        .filter(|m| *m != tree.root && !parents.contains(m))
        .collect()
}

/// Removes every member in the tree's last frame and returns them
/// (ascending). Children of removed nodes move up to the removed node's
/// parent. A singleton tree is left alone and an empty set returned.
pub fn remove_tail(tree: &mut Tree, timestep: impl Fn(NodeId) -> usize) -> Vec<NodeId> {
    if tree.members.len() <= 1 {
        return Vec::new();
    }
    let last = tree
        .members
        .iter()
        .map(|&m| timestep(m))
        .max()
        .expect("non-empty");
    let tail: Vec<NodeId> = tree
        .members
        .iter()
        .copied()
        .filter(|&m| timestep(m) == last)
        .collect();
    for &t in &tail {
        tree.members.remove(&t);
        let up = tree.parent.remove(&t);
        for p in tree.parent.values_mut() {
            if *p == t {
                *p = up.expect("root never sits in the tail of a multi-node tree");
            }
        }
    }
    tree.depth = tree.longest_path();
    tail
}

/// Removes a childless member from a tree.
fn detach_leaf(tree: &mut Tree, leaf: NodeId) {
    tree.members.remove(&leaf);
    tree.parent.remove(&leaf);
}

/// Tree visiting order: deepest first, then larger, then smaller root id.
fn visit_order(trees: &[Tree]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..trees.len()).collect();
    order.sort_by_key(|&i| {
        (
            Reverse(trees[i].depth),
            Reverse(trees[i].len()),
            trees[i].root,
        )
    });
    order
}

/// The complete removal sequence for a forest, ending with its last node.
pub fn removal_order(forest: &Forest) -> Vec<Removal> {
    let ts = |id: NodeId| forest.timestep(id);
    let latest_first = |id: &NodeId| Reverse((ts(*id), *id));
    let mut out: Vec<Removal> = Vec::with_capacity(forest.node_count());
    let mut push = |node, reason, tree| {
        let step = out.len();
        out.push(Removal {
            step,
            node,
            reason,
            tree,
        });
    };

    let mut orphans: Vec<NodeId> = forest.orphans.iter().copied().collect();
    orphans.sort_by_key(latest_first);
    for o in orphans {
        push(o, RemovalReason::Orphan, None);
    }

    let mut trees = forest.trees.clone();
    for i in visit_order(&trees) {
        let mut leaves: Vec<NodeId> = find_leaves(&trees[i]).into_iter().collect();
        leaves.sort_by_key(latest_first);
        for leaf in leaves {
            detach_leaf(&mut trees[i], leaf);
            push(leaf, RemovalReason::Leaf, Some(trees[i].root));
        }
        trees[i].depth = trees[i].longest_path();
    }

    for i in visit_order(&trees) {
        loop {
            let mut tail = remove_tail(&mut trees[i], ts);
            if tail.is_empty() {
                break;
            }
            tail.sort_by_key(|&id| Reverse(id));
            for node in tail {
                push(node, RemovalReason::Tail, Some(trees[i].root));
            }
        }
    }

    let mut roots: Vec<NodeId> = trees.iter().map(|t| t.root).collect();
    roots.sort_by_key(latest_first);
    for r in roots {
        push(r, RemovalReason::RootFallback, Some(r));
    }
    out
}

/// Prunes the forest down to `budget` nodes.
///
/// A budget above the forest's node count keeps every node and sets
/// [`PruneResult::budget_unreachable`].
pub fn prune_to_budget(forest: &Forest, budget: usize) -> (PruneResult, RemovalTrace) {
    let total = forest.node_count();
    let all = forest.all_nodes();
    if budget >= total {
        let mut result = PruneResult::new(
            all.into_iter().collect(),
            forest.frames,
            forest.tokens_per_frame,
        );
        if budget > total {
            log::warn!("budget of {budget} exceeds the {total} nodes in the forest");
            result.budget_unreachable = true;
        }
        return (result, RemovalTrace::default());
    }
    let mut removals = removal_order(forest);
    removals.truncate(total - budget);
    let trace = RemovalTrace { removals };
    let retained = trace.replay(forest);
    let result = PruneResult::new(
        retained.into_iter().collect(),
        forest.frames,
        forest.tokens_per_frame,
    );
    (result, trace)
}

/// Everything produced by one run of the pruning pipeline.
#[derive(Clone, Debug)]
pub struct PruneRun {
    pub budget: usize,
    pub nodes: NodeSet,
    pub forest: Forest,
    pub trace: RemovalTrace,
    pub result: PruneResult,
}

/// Selection, forest construction and pruning, keeping the intermediate
/// products.
pub fn prune_video_detailed(video: &VideoTokens, config: &PruneConfig) -> Result<PruneRun> {
    config.validate()?;
    let budget = compute_budget(
        config.budget_ratio,
        video.frames(),
        video.tokens_per_frame(),
    );
    let nodes = select_nodes(video, config.keep_ratio, config.selector, config.seed)?;
    if nodes.len() < budget {
        return Err(Error::BudgetExceedsNodes {
            budget,
            nodes: nodes.len(),
        });
    }
    let forest = build_forest(&nodes, config, budget)?;
    let (result, trace) = prune_to_budget(&forest, budget);
    Ok(PruneRun {
        budget,
        nodes,
        forest,
        trace,
        result,
    })
}

/// Prunes a video to the token budget implied by `config.budget_ratio`.
/// Tokens not selected as candidate nodes are always dropped.
pub fn prune_video(video: &VideoTokens, config: &PruneConfig) -> Result<PruneResult> {
    prune_video_detailed(video, config).map(|run| run.result)
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;

    /// Tree from `(child, parent)` edges.
    fn tree(root: NodeId, edges: &[(NodeId, NodeId)]) -> Tree {
        let mut t = Tree::singleton(root);
        for &(c, p) in edges {
            t.members.insert(c);
            t.parent.insert(c, p);
        }
        t.depth = t.longest_path();
        t
    }

    /// One token per frame, so ids double as frames.
    fn forest(trees: Vec<Tree>, orphans: &[NodeId], frames: usize) -> Forest {
        Forest {
            trees,
            orphans: orphans.iter().copied().collect(),
            ..Forest::empty(frames, 1)
        }
    }

    #[test]
    fn leaves_examples() {
        assert_eq!(
            find_leaves(&tree(0, &[(1, 0), (2, 1)])),
            BTreeSet::from([2])
        );
        assert_eq!(
            find_leaves(&tree(0, &[(1, 0), (2, 0), (3, 0)])),
            BTreeSet::from([1, 2, 3])
        );
        assert!(find_leaves(&Tree::singleton(0)).is_empty());
    }

    #[test]
    fn tail_examples() {
        let mut chain = tree(0, &[(1, 0), (2, 1)]);
        assert_eq!(remove_tail(&mut chain, |id| id), vec![2]);
        assert_eq!(chain.depth, 1);

        // members at timesteps {0, 3, 3}: ids 0, 6, 7 with two tokens per frame
        let mut t = tree(0, &[(6, 0), (7, 0)]);
        assert_eq!(remove_tail(&mut t, |id| id / 2), vec![6, 7]);
        assert_eq!(t, Tree::singleton(0));

        let mut single = Tree::singleton(4);
        assert!(remove_tail(&mut single, |id| id).is_empty());
    }

    #[test]
    fn tail_splices_children_to_grandparent() {
        // chain 0 -> 3 -> 4 under a frame function that puts 3 last
        let mut t = tree(0, &[(3, 0), (4, 3)]);
        let frame = |id: NodeId| if id == 3 { 9 } else { id };
        assert_eq!(remove_tail(&mut t, frame), vec![3]);
        assert_eq!(t.parent, BTreeMap::from([(4, 0)]));
    }

    #[test]
    fn deeper_tree_loses_a_leaf_first() {
        // tree A: 0 -> 2 -> 4 -> 6 (depth 3), tree B: 1 -> 3 (depth 1)
        let f = forest(
            vec![tree(0, &[(2, 0), (4, 2), (6, 4)]), tree(1, &[(3, 1)])],
            &[],
            7,
        );
        let (res, trace) = prune_to_budget(&f, 5);
        assert_eq!(trace.removals.len(), 1);
        assert_eq!(trace.removals[0].node, 6);
        assert_eq!(trace.removals[0].reason, RemovalReason::Leaf);
        assert_eq!(res.retained, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn identity_at_full_budget() {
        let f = forest(vec![tree(0, &[(1, 0)])], &[2], 3);
        let (res, trace) = prune_to_budget(&f, 3);
        assert_eq!(res.retained, vec![0, 1, 2]);
        assert!(trace.removals.is_empty());
        assert!(!res.budget_unreachable);

        let (res, _) = prune_to_budget(&f, 10);
        assert_eq!(res.retained.len(), 3);
        assert!(res.budget_unreachable);
    }

    #[test]
    fn root_fallback_keeps_earliest() {
        let f = forest((0..5).map(Tree::singleton).collect(), &[], 5);
        let (res, trace) = prune_to_budget(&f, 2);
        assert_eq!(res.retained, vec![0, 1]);
        assert!(trace
            .removals
            .iter()
            .all(|r| r.reason == RemovalReason::RootFallback));
        assert_eq!(res.per_frame_counts, vec![1, 1, 0, 0, 0]);
    }

    #[test]
    fn chain_to_single_root() {
        let f = forest(vec![tree(0, &[(1, 0), (2, 1), (3, 2)])], &[], 4);
        let (res, trace) = prune_to_budget(&f, 1);
        assert_eq!(res.retained, vec![0]);
        let reasons: Vec<_> = trace.removals.iter().map(|r| (r.node, r.reason)).collect();
        assert_eq!(
            reasons,
            vec![
                (3, RemovalReason::Leaf),
                (2, RemovalReason::Tail),
                (1, RemovalReason::Tail)
            ]
        );
    }

    #[test]
    fn orphans_go_first_latest_frame_first() {
        let f = forest(vec![tree(0, &[(3, 0)])], &[1, 2], 4);
        let order: Vec<_> = removal_order(&f).iter().map(|r| r.node).collect();
        assert_eq!(order, vec![2, 1, 3, 0]);
    }

    #[test]
    fn tail_group_stops_mid_group_largest_id_first() {
        // two tokens per frame; root 0@0, trunk 2@1 with leaves 4@2, 5@2 and
        // a second trunk 3@1 with leaf 7@3
        let f = Forest {
            trees: vec![tree(0, &[(2, 0), (3, 0), (4, 2), (5, 2), (7, 3)])],
            ..Forest::empty(4, 2)
        };
        let order = removal_order(&f);
        let seq: Vec<_> = order.iter().map(|r| (r.node, r.reason)).collect();
        assert_eq!(
            seq,
            vec![
                (7, RemovalReason::Leaf),
                (5, RemovalReason::Leaf),
                (4, RemovalReason::Leaf),
                (3, RemovalReason::Tail),
                (2, RemovalReason::Tail),
                (0, RemovalReason::RootFallback),
            ]
        );
        let (res, _) = prune_to_budget(&f, 2);
        assert_eq!(res.retained, vec![0, 2]);
    }

    #[test]
    fn trace_replays_to_retained_and_is_nested() {
        let f = forest(
            vec![
                tree(0, &[(2, 0), (5, 2), (6, 2)]),
                tree(1, &[(3, 1), (4, 3), (8, 4)]),
            ],
            &[7, 9],
            10,
        );
        let mut prev: Option<BTreeSet<NodeId>> = None;
        for k in (1..=10).rev() {
            let (res, trace) = prune_to_budget(&f, k);
            assert_eq!(res.retained.len(), k);
            let replayed = trace.replay(&f);
            assert_eq!(replayed.iter().copied().collect::<Vec<_>>(), res.retained);
            if let Some(p) = &prev {
                assert!(replayed.is_subset(p));
            }
            prev = Some(replayed);
        }
    }

    #[test]
    fn roots_survive_when_budget_covers_trees() {
        let f = forest(
            vec![tree(0, &[(2, 0), (4, 2)]), tree(1, &[(3, 1), (5, 3)])],
            &[6],
            7,
        );
        let (res, _) = prune_to_budget(&f, 2);
        assert_eq!(res.retained, vec![0, 1]);
    }
}
