//! Spatial-temporal forest construction.
//!
//! Nodes are linked from earlier to later frames when they are semantically
//! similar (`cos >= tau_s`) and spatially close (`dist <= tau_p`). Sources of
//! the resulting DAG become tree roots; every other connected node follows
//! its best-ranked incoming link, which fixes both its tree and its parent.
//!
//! Internally nodes are addressed by their position in the [`NodeSet`]
//! ("index"); the public [`Forest`] speaks in global token ids. Both orders
//! agree, so tie-breaking on the smaller index is tie-breaking on the
//! smaller id.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::tokens::{NodeId, NodeSet, PruneConfig};

/// Score given to a connected pair whose `a - lambda * d` is not positive, so
/// that a connection is never lost to the ranking.
pub const MIN_RANK_SCORE: f64 = 1e-9;

/// Dot product accumulated in index order.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn coord_distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    let dr = a[0] - b[0];
    let dc = a[1] - b[1];
    (dr * dr + dc * dc).sqrt()
}

pub fn rank_score(similarity: f64, distance: f64, lambda: f64) -> f64 {
    let p = similarity - lambda * distance;
    if p > 0.0 {
        p
    } else {
        MIN_RANK_SCORE
    }
}

/// Dense row-major `n x n` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SquareMatrix<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Copy + Default> SquareMatrix<T> {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![T::default(); n * n],
        }
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> T + Sync) -> Self
    where
        T: Send,
    {
        let data = (0..n * n)
            .into_par_iter()
            .map(|idx| f(idx / n, idx % n))
            .collect();
        Self { n, data }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.n + j] = v;
    }
}

/// Cosine similarity of every node pair (dot product of unit embeddings).
pub fn cosine_adjacency(nodes: &NodeSet) -> SquareMatrix<f64> {
    let n = nodes.nodes();
    SquareMatrix::from_fn(n.len(), |i, j| {
        dot(&n[i].unit_embedding, &n[j].unit_embedding)
    })
}

/// Euclidean distance between normalized grid coordinates of every node pair.
pub fn spatial_distance(nodes: &NodeSet) -> SquareMatrix<f64> {
    let n = nodes.nodes();
    SquareMatrix::from_fn(n.len(), |i, j| coord_distance(n[i].coord, n[j].coord))
}

/// `C[i][j]` holds iff `i` is similar and close enough to `j` and lies in an
/// earlier frame.
pub fn connection_matrix(
    similarity: &SquareMatrix<f64>,
    distance: &SquareMatrix<f64>,
    nodes: &NodeSet,
    tau_s: f64,
    tau_p: f64,
) -> SquareMatrix<bool> {
    let n = nodes.nodes();
    SquareMatrix::from_fn(n.len(), |i, j| {
        similarity.get(i, j) >= tau_s && distance.get(i, j) <= tau_p && n[i].frame < n[j].frame
    })
}

/// `P = C ⊙ (A − λD)`, with connected pairs clamped to a positive score.
pub fn rank_matrix(
    connections: &SquareMatrix<bool>,
    similarity: &SquareMatrix<f64>,
    distance: &SquareMatrix<f64>,
    lambda: f64,
) -> SquareMatrix<f64> {
    SquareMatrix::from_fn(connections.size(), |i, j| {
        if connections.get(i, j) {
            rank_score(similarity.get(i, j), distance.get(i, j), lambda)
        } else {
            0.0
        }
    })
}

/// The four dense pair matrices for a node set.
#[derive(Clone, Debug)]
pub struct PairMatrices {
    pub similarity: SquareMatrix<f64>,
    pub distance: SquareMatrix<f64>,
    pub connections: SquareMatrix<bool>,
    pub ranks: SquareMatrix<f64>,
}

impl PairMatrices {
    pub fn compute(nodes: &NodeSet, tau_s: f64, tau_p: f64, lambda: f64) -> Self {
        let similarity = cosine_adjacency(nodes);
        let distance = spatial_distance(nodes);
        let connections = connection_matrix(&similarity, &distance, nodes, tau_s, tau_p);
        let ranks = rank_matrix(&connections, &similarity, &distance, lambda);
        Self {
            similarity,
            distance,
            connections,
            ranks,
        }
    }
}

/// Sparse form of the connection matrix `C` carrying the rank score `P` of
/// each connected pair.
#[derive(Clone, Debug, PartialEq)]
pub struct ConnectionGraph {
    frames: Vec<usize>,
    /// Per target node: `(source, score)` with ascending source.
    incoming: Vec<Vec<(usize, f64)>>,
    out_degree: Vec<usize>,
}

impl ConnectionGraph {
    /// Computes the connected pairs directly from the nodes, one target
    /// column at a time, without materializing any dense matrix.
    pub fn build(nodes: &NodeSet, tau_s: f64, tau_p: f64, lambda: f64) -> Self {
        let n = nodes.nodes();
        let frames: Vec<usize> = n.iter().map(|x| x.frame).collect();
        // first index of each node's frame; nodes are sorted by frame
        let mut frame_start = vec![0; n.len()];
        for j in 1..n.len() {
            frame_start[j] = if frames[j] == frames[j - 1] {
                frame_start[j - 1]
            } else {
                j
            };
        }
        let incoming: Vec<Vec<(usize, f64)>> = (0..n.len())
            .into_par_iter()
            .map(|j| {
                let target = &n[j];
                (0..frame_start[j])
                    .filter_map(|i| {
                        let a = dot(&n[i].unit_embedding, &target.unit_embedding);
                        if a < tau_s {
                            return None;
                        }
                        let d = coord_distance(n[i].coord, target.coord);
                        (d <= tau_p).then(|| (i, rank_score(a, d, lambda)))
                    })
                    .collect()
            })
            .collect();
        Self::from_incoming(frames, incoming)
    }

    /// Sparse view of dense `C` and `P` matrices.
    pub fn from_matrices(
        frames: Vec<usize>,
        connections: &SquareMatrix<bool>,
        ranks: &SquareMatrix<f64>,
    ) -> Self {
        let k = connections.size();
        let incoming = (0..k)
            .map(|j| {
                (0..k)
                    .filter(|&i| connections.get(i, j))
                    .map(|i| (i, ranks.get(i, j)))
                    .collect()
            })
            .collect();
        Self::from_incoming(frames, incoming)
    }

    fn from_incoming(frames: Vec<usize>, incoming: Vec<Vec<(usize, f64)>>) -> Self {
        let mut out_degree = vec![0; frames.len()];
        for edges in &incoming {
            for &(i, _) in edges {
                out_degree[i] += 1;
            }
        }
        Self {
            frames,
            incoming,
            out_degree,
        }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frame(&self, node: usize) -> usize {
        self.frames[node]
    }

    pub fn incoming(&self, node: usize) -> &[(usize, f64)] {
        &self.incoming[node]
    }

    pub fn in_degree(&self, node: usize) -> usize {
        self.incoming[node].len()
    }

    pub fn out_degree(&self, node: usize) -> usize {
        self.out_degree[node]
    }

    pub fn edge_count(&self) -> usize {
        self.incoming.iter().map(Vec::len).sum()
    }

    /// Every connected pair `(source, target, score)` in target-major order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.incoming
            .iter()
            .enumerate()
            .flat_map(|(j, e)| e.iter().map(move |&(i, p)| (i, j, p)))
    }
}

/// Sources of the connection DAG, split into roots (some outgoing link) and
/// isolated nodes (no link at all).
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RootSet {
    pub roots: Vec<usize>,
    pub isolated: Vec<usize>,
}

pub fn find_roots(graph: &ConnectionGraph) -> RootSet {
    let mut set = RootSet::default();
    for j in 0..graph.len() {
        if graph.in_degree(j) == 0 {
            if graph.out_degree(j) > 0 {
                set.roots.push(j);
            } else {
                set.isolated.push(j);
            }
        }
    }
    set
}

/// Ordering of candidate parents: higher score wins, then the later frame,
/// then the smaller index. Returns `Greater` when `a` is the better parent.
pub fn compare_parents(
    a: (usize, f64),
    b: (usize, f64),
    frames: &dyn Fn(usize) -> usize,
) -> Ordering {
    a.1.total_cmp(&b.1)
        .then_with(|| frames(a.0).cmp(&frames(b.0)))
        .then_with(|| b.0.cmp(&a.0))
}

fn best_parent(
    candidates: impl Iterator<Item = (usize, f64)>,
    graph: &ConnectionGraph,
) -> Option<usize> {
    let frame = |i: usize| graph.frame(i);
    candidates
        .max_by(|&a, &b| compare_parents(a, b, &frame))
        .map(|(i, _)| i)
}

/// Tree membership for each root, plus the nodes that reach no listed root.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Assignment {
    pub trees: BTreeMap<usize, BTreeSet<usize>>,
    pub orphans: BTreeSet<usize>,
}

/// Each connected node picks its best incoming link; following those links
/// upwards ends at a source, whose tree the node joins.
pub fn assign_children(graph: &ConnectionGraph, roots: &[usize]) -> Assignment {
    let root_set: HashSet<usize> = roots.iter().copied().collect();
    let mut owner: Vec<Option<usize>> = vec![None; graph.len()];
    let mut out = Assignment::default();
    for &r in roots {
        out.trees.entry(r).or_default().insert(r);
    }
    // parents always precede their children in index order
    for j in 0..graph.len() {
        if root_set.contains(&j) {
            owner[j] = Some(j);
            continue;
        }
        owner[j] = best_parent(graph.incoming(j).iter().copied(), graph).and_then(|p| owner[p]);
        match owner[j] {
            Some(r) => {
                out.trees.get_mut(&r).expect("owner is a root").insert(j);
            }
            None => {
                out.orphans.insert(j);
            }
        }
    }
    out
}

/// Parent links of one tree and its depth.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LinkedTree {
    pub parent: BTreeMap<usize, usize>,
    pub depth: usize,
    /// Members that found no eligible parent inside the tree.
    pub demoted: Vec<usize>,
}

/// Walks the members in frame order and gives every non-root member its
/// best-ranked connection to an already attached member of an earlier frame.
pub fn link_nodes(root: usize, members: &BTreeSet<usize>, graph: &ConnectionGraph) -> LinkedTree {
    let mut attached_depth: BTreeMap<usize, usize> = BTreeMap::new();
    attached_depth.insert(root, 0);
    let mut linked = LinkedTree::default();
    let mut order: Vec<usize> = members.iter().copied().filter(|&m| m != root).collect();
    order.sort_by_key(|&m| (graph.frame(m), m));
    for m in order {
        let candidates = graph
            .incoming(m)
            .iter()
            .copied()
            .filter(|(i, _)| attached_depth.contains_key(i));
        match best_parent(candidates, graph) {
            Some(p) => {
                let d = attached_depth[&p] + 1;
                attached_depth.insert(m, d);
                linked.parent.insert(m, p);
                linked.depth = linked.depth.max(d);
            }
            None => linked.demoted.push(m),
        }
    }
    if !linked.demoted.is_empty() {
        log::warn!(
            "tree rooted at node {root}: {} member(s) could not attach and were demoted to orphans",
            linked.demoted.len()
        );
    }
    linked
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tree {
    pub root: NodeId,
    pub members: BTreeSet<NodeId>,
    /// child -> parent
    pub parent: BTreeMap<NodeId, NodeId>,
    pub depth: usize,
}

impl Tree {
    pub fn singleton(root: NodeId) -> Self {
        Self {
            root,
            members: BTreeSet::from([root]),
            parent: BTreeMap::new(),
            depth: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Longest root-to-leaf path in edges, computed from the parent map.
    ///
    /// Parents always carry a smaller id than their children.
    pub fn longest_path(&self) -> usize {
        let mut depth: BTreeMap<NodeId, usize> = BTreeMap::new();
        depth.insert(self.root, 0);
        let mut max = 0;
        for &m in &self.members {
            if let Some(p) = self.parent.get(&m) {
                let d = depth.get(p).copied().unwrap_or(0) + 1;
                depth.insert(m, d);
                max = max.max(d);
            }
        }
        max
    }

    pub fn children(&self) -> BTreeMap<NodeId, Vec<NodeId>> {
        let mut out: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
        for (&c, &p) in &self.parent {
            out.entry(p).or_default().push(c);
        }
        out
    }
}

/// Rooted trees over the candidate nodes of one video.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Forest {
    pub frames: usize,
    pub tokens_per_frame: usize,
    /// Sorted by root id.
    pub trees: Vec<Tree>,
    pub orphans: BTreeSet<NodeId>,
    /// Set when tree merging stopped above the budget because no remaining
    /// root pair was similar enough.
    #[serde(default)]
    pub merge_halted: bool,
}

impl Forest {
    pub fn empty(frames: usize, tokens_per_frame: usize) -> Self {
        Self {
            frames,
            tokens_per_frame,
            trees: Vec::new(),
            orphans: BTreeSet::new(),
            merge_halted: false,
        }
    }

    pub fn timestep(&self, id: NodeId) -> usize {
        id / self.tokens_per_frame
    }

    pub fn node_count(&self) -> usize {
        self.orphans.len() + self.trees.iter().map(Tree::len).sum::<usize>()
    }

    pub fn all_nodes(&self) -> BTreeSet<NodeId> {
        let mut all = self.orphans.clone();
        for t in &self.trees {
            all.extend(t.members.iter().copied());
        }
        all
    }

    /// Checks the structural invariants, reporting the first violation.
    pub fn validate(&self) -> std::result::Result<(), String> {
        let mut seen: BTreeSet<NodeId> = BTreeSet::new();
        for &o in &self.orphans {
            seen.insert(o);
        }
        for t in &self.trees {
            if !t.members.contains(&t.root) {
                return Err(format!("root {} is not a member of its tree", t.root));
            }
            if t.parent.contains_key(&t.root) {
                return Err(format!("root {} has a parent", t.root));
            }
            for &m in &t.members {
                if !seen.insert(m) {
                    return Err(format!("node {m} appears more than once"));
                }
                if m != t.root && !t.parent.contains_key(&m) {
                    return Err(format!("member {m} of tree {} has no parent", t.root));
                }
            }
            for (&c, &p) in &t.parent {
                if !t.members.contains(&c) || !t.members.contains(&p) {
                    return Err(format!("edge {p}->{c} leaves tree {}", t.root));
                }
                if self.timestep(p) >= self.timestep(c) {
                    return Err(format!("edge {p}->{c} does not move forward in time"));
                }
            }
            if t.depth != t.longest_path() {
                return Err(format!(
                    "tree {} records depth {} but its longest path is {}",
                    t.root,
                    t.depth,
                    t.longest_path()
                ));
            }
        }
        Ok(())
    }
}

/// Greedily merges the most similar pair of roots, hanging the later root
/// under the earlier one, until at most `budget` trees remain. Merging
/// stops early, with `merge_halted` set, once the best remaining pair falls
/// below `tau_s / 2`. Roots in the same frame are never merged since no
/// edge may join nodes of one frame.
pub fn merge_trees(
    mut forest: Forest,
    budget: usize,
    tau_s: f64,
    similarity: impl Fn(NodeId, NodeId) -> f64 + Sync,
) -> Forest {
    if forest.trees.len() <= budget {
        return forest;
    }
    let floor = tau_s / 2.0;
    let roots: Vec<NodeId> = forest.trees.iter().map(|t| t.root).collect();
    let mut pairs: Vec<(f64, NodeId, NodeId)> = (0..roots.len())
        .into_par_iter()
        .flat_map_iter(|a| {
            let roots = &roots;
            let forest = &forest;
            let similarity = &similarity;
            (a + 1..roots.len()).filter_map(move |b| {
                let (ra, rb) = (roots[a], roots[b]);
                if forest.timestep(ra) == forest.timestep(rb) {
                    return None;
                }
                let s = similarity(ra, rb);
                (s >= floor).then_some((s, ra, rb))
            })
        })
        .collect();
    // most similar first, ties to the lexicographically smallest root pair
    pairs.sort_by(|x, y| y.0.total_cmp(&x.0).then((x.1, x.2).cmp(&(y.1, y.2))));

    let mut trees: BTreeMap<NodeId, Tree> = forest.trees.drain(..).map(|t| (t.root, t)).collect();
    for (_, ra, rb) in pairs {
        if trees.len() <= budget {
            break;
        }
        if !trees.contains_key(&ra) || !trees.contains_key(&rb) {
            continue;
        }
        let (upper, lower) = if forest.timestep(ra) < forest.timestep(rb) {
            (ra, rb)
        } else {
            (rb, ra)
        };
        let absorbed = trees.remove(&lower).expect("checked above");
        let host = trees.get_mut(&upper).expect("checked above");
        host.members.extend(absorbed.members);
        host.parent.extend(absorbed.parent);
        host.parent.insert(lower, upper);
        host.depth = host.longest_path();
    }
    forest.merge_halted = trees.len() > budget;
    forest.trees = trees.into_values().collect();
    forest
}

/// Builds the forest for a node set: connection graph, roots, membership,
/// parent links, then merging down to `budget` trees when needed.
pub fn build_forest(nodes: &NodeSet, config: &PruneConfig, budget: usize) -> Result<Forest> {
    config.validate()?;
    let graph = ConnectionGraph::build(nodes, config.tau_s, config.tau_p, config.lambda);
    Ok(forest_from_graph(nodes, &graph, config.tau_s, budget))
}

/// The part of [`build_forest`] that follows the connection graph.
pub fn forest_from_graph(
    nodes: &NodeSet,
    graph: &ConnectionGraph,
    tau_s: f64,
    budget: usize,
) -> Forest {
    let n = nodes.nodes();
    let id = |i: usize| n[i].id;
    let roots = find_roots(graph);
    let assignment = assign_children(graph, &roots.roots);

    let mut forest = Forest::empty(nodes.frames(), nodes.tokens_per_frame());
    forest.orphans.extend(roots.isolated.iter().map(|&i| id(i)));
    forest
        .orphans
        .extend(assignment.orphans.iter().map(|&i| id(i)));
    for (&root, members) in &assignment.trees {
        let linked = link_nodes(root, members, graph);
        let demoted: BTreeSet<usize> = linked.demoted.iter().copied().collect();
        forest.orphans.extend(demoted.iter().map(|&i| id(i)));
        forest.trees.push(Tree {
            root: id(root),
            members: members
                .iter()
                .filter(|m| !demoted.contains(m))
                .map(|&m| id(m))
                .collect(),
            parent: linked
                .parent
                .iter()
                .map(|(&c, &p)| (id(c), id(p)))
                .collect(),
            depth: linked.depth,
        });
    }

    let index_of = |node: NodeId| {
        n.binary_search_by_key(&node, |x| x.id)
            .expect("forest ids come from the node set")
    };
    merge_trees(forest, budget, tau_s, |a, b| {
        dot(
            &n[index_of(a)].unit_embedding,
            &n[index_of(b)].unit_embedding,
        )
    })
}
