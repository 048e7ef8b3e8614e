//! Master semantic tree: a minimum spanning tree over embedded codebook
//! vectors under hyperbolic distance, plus the leaf-pruning order on it.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::format::fmt_g17;
use crate::geometry::{charge_distance_evaluations, PoincarePointSet};

/// Frontier sizes below this are scanned on the calling thread.
const PARALLEL_SCAN_MIN: usize = 4096;

/// Rooted spanning tree over node indices `0..node_count`.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticTree {
    root: usize,
    parent: Vec<Option<usize>>,
    weight: Vec<f64>,
    children: Vec<Vec<usize>>,
}

impl SemanticTree {
    /// Builds a tree from an explicit parent table. `weights[root]` is ignored.
    pub fn from_parents(parent: Vec<Option<usize>>, weights: Vec<f64>) -> Result<Self> {
        let n = parent.len();
        if n == 0 {
            return Err(Error::invalid("tree must have at least one node"));
        }
        if weights.len() != n {
            return Err(Error::invalid("weights and parents differ in length"));
        }
        let roots: Vec<usize> = (0..n).filter(|&i| parent[i].is_none()).collect();
        let &[root] = roots.as_slice() else {
            return Err(Error::invalid(format!(
                "expected exactly one root, found {}",
                roots.len()
            )));
        };
        let mut children = vec![Vec::new(); n];
        for (child, p) in parent.iter().enumerate() {
            if let Some(p) = *p {
                if p >= n || p == child {
                    return Err(Error::invalid(format!("node {child} has bad parent {p}")));
                }
                children[p].push(child);
            }
        }
        // Every node must reach the root without revisiting anything.
        let mut depth_known = vec![false; n];
        depth_known[root] = true;
        for start in 0..n {
            let mut path = Vec::new();
            let mut cur = start;
            while !depth_known[cur] {
                if path.len() > n {
                    return Err(Error::invalid("parent table contains a cycle"));
                }
                path.push(cur);
                cur = parent[cur].expect("only the root lacks a parent");
            }
            for v in path {
                depth_known[v] = true;
            }
        }
        let mut weight = weights;
        weight[root] = 0.0;
        Ok(Self {
            root,
            parent,
            weight,
            children,
        })
    }

    pub fn node_count(&self) -> usize {
        self.parent.len()
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn parent_of(&self, node: usize) -> Option<usize> {
        self.parent[node]
    }

    /// Hyperbolic length of the edge to the parent (0 for the root).
    pub fn edge_weight(&self, node: usize) -> f64 {
        self.weight[node]
    }

    /// Children in ascending index order.
    pub fn children_of(&self, node: usize) -> &[usize] {
        &self.children[node]
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.parent
            .iter()
            .enumerate()
            .filter_map(|(c, p)| p.map(|p| (c, p, self.weight[c])))
    }

    pub fn total_weight(&self) -> f64 {
        self.edges().map(|(_, _, w)| w).sum()
    }

    /// True when `nodes` contains the root and the parent of every other member.
    pub fn induces_rooted_subtree(&self, nodes: &[usize]) -> bool {
        let mut member = vec![false; self.node_count()];
        for &v in nodes {
            match member.get_mut(v) {
                Some(m) => *m = true,
                None => return false,
            }
        }
        member[self.root]
            && nodes
                .iter()
                .all(|&v| v == self.root || self.parent[v].is_some_and(|p| member[p]))
    }

    /// One `child parent weight` line per non-root node, weights to 17
    /// significant digits.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        for (c, p, w) in self.edges() {
            writeln!(out, "{c} {p} {}", fmt_g17(w)).unwrap();
        }
        out
    }

    /// Graphviz description of the tree with the root highlighted.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph semantic_tree {\n");
        writeln!(out, "  {} [shape=doublecircle];", self.root).unwrap();
        for (c, p, w) in self.edges() {
            writeln!(out, "  {p} -> {c} [label=\"{}\"];", fmt_g17(w)).unwrap();
        }
        out.push_str("}\n");
        out
    }
}

/// Index of the point closest to the origin; ties go to the smaller index.
pub fn select_root(points: &PoincarePointSet) -> Result<usize> {
    // d(0, p) = 2·artanh(‖p‖) is increasing in ‖p‖.
    points
        .norms()
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1).then(a.0.cmp(&b.0)))
        .map(|(i, _)| i)
        .ok_or_else(|| Error::invalid("cannot select a root from an empty point set"))
}

#[derive(Clone, Copy)]
struct Frontier {
    ratio: f64,
    attach: usize,
    done: bool,
}

/// Dense Prim's algorithm: O(n²) time, O(n) memory, no distance matrix.
///
/// Candidates are compared by the argument of `arccosh`, which is monotone in
/// the distance. Ties pick the smaller candidate index, attached to the
/// smallest-index tree node at that distance.
pub fn build_mst(points: &PoincarePointSet) -> Result<SemanticTree> {
    let n = points.len();
    let root = select_root(points)?;
    let mut parent = vec![None; n];
    let mut weight = vec![0.0; n];
    let mut frontier: Vec<Frontier> = (0..n)
        .map(|j| Frontier {
            ratio: points.distance_ratio(root, j),
            attach: root,
            done: j == root,
        })
        .collect();
    charge_distance_evaluations((n - 1) as u64);

    for _ in 1..n {
        let mut next = usize::MAX;
        let mut best = f64::INFINITY;
        for (j, f) in frontier.iter().enumerate() {
            if !f.done && (f.ratio < best || next == usize::MAX) {
                best = f.ratio;
                next = j;
            }
        }
        let f = &mut frontier[next];
        f.done = true;
        parent[next] = Some(f.attach);
        weight[next] = PoincarePointSet::ratio_to_distance(f.ratio);

        let relax = |k: usize, f: &mut Frontier| -> u64 {
            if f.done {
                return 0;
            }
            let r = points.distance_ratio(next, k);
            if r < f.ratio || (r == f.ratio && next < f.attach) {
                f.ratio = r;
                f.attach = next;
            }
            1
        };
        let evals: u64 = if n >= PARALLEL_SCAN_MIN {
            frontier
                .par_iter_mut()
                .enumerate()
                .map(|(k, f)| relax(k, f))
                .sum()
        } else {
            frontier
                .iter_mut()
                .enumerate()
                .map(|(k, f)| relax(k, f))
                .sum()
        };
        charge_distance_evaluations(evals);
    }

    SemanticTree::from_parents(parent, weight)
}

/// Non-root nodes in the order leaf pruning removes them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RemovalOrder {
    pub sequence: Vec<usize>,
    pub root: usize,
}

/// Why a removal sequence cannot be replayed on a tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReplayError {
    WrongLength { expected: usize, found: usize },
    OutOfRange { step: usize, node: usize },
    RootRemoved { step: usize },
    Repeated { step: usize, node: usize },
    NotALeaf { step: usize, node: usize },
}

impl RemovalOrder {
    /// Checks that every entry is a current leaf when it is removed.
    pub fn replay(&self, tree: &SemanticTree) -> Result<(), ReplayError> {
        let n = tree.node_count();
        if self.sequence.len() + 1 != n {
            return Err(ReplayError::WrongLength {
                expected: n - 1,
                found: self.sequence.len(),
            });
        }
        let mut live_children: Vec<usize> = (0..n).map(|v| tree.children_of(v).len()).collect();
        let mut removed = vec![false; n];
        for (step, &node) in self.sequence.iter().enumerate() {
            if node >= n {
                return Err(ReplayError::OutOfRange { step, node });
            }
            if node == tree.root() {
                return Err(ReplayError::RootRemoved { step });
            }
            if removed[node] {
                return Err(ReplayError::Repeated { step, node });
            }
            if live_children[node] != 0 {
                return Err(ReplayError::NotALeaf { step, node });
            }
            removed[node] = true;
            if let Some(p) = tree.parent_of(node) {
                live_children[p] -= 1;
            }
        }
        Ok(())
    }
}

#[derive(PartialEq)]
struct LeafKey {
    norm: f64,
    node: usize,
}

impl Eq for LeafKey {}

impl Ord for LeafKey {
    fn cmp(&self, other: &Self) -> Ordering {
        self.norm
            .total_cmp(&other.norm)
            .then(self.node.cmp(&other.node))
    }
}

impl PartialOrd for LeafKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Repeatedly removes the current leaf farthest from the origin (larger index
/// on ties) until only the root remains.
pub fn compute_removal_order(
    tree: &SemanticTree,
    points: &PoincarePointSet,
) -> Result<RemovalOrder> {
    let n = tree.node_count();
    if points.len() != n {
        return Err(Error::invalid(format!(
            "tree has {n} nodes but point set has {}",
            points.len()
        )));
    }
    let root = tree.root();
    let mut live_children: Vec<usize> = (0..n).map(|v| tree.children_of(v).len()).collect();
    let mut heap: BinaryHeap<LeafKey> = (0..n)
        .filter(|&v| v != root && live_children[v] == 0)
        .map(|v| LeafKey {
            norm: points.norm(v),
            node: v,
        })
        .collect();
    let mut sequence = Vec::with_capacity(n.saturating_sub(1));
    while let Some(LeafKey { node, .. }) = heap.pop() {
        sequence.push(node);
        let p = tree.parent_of(node).expect("non-root node has a parent");
        live_children[p] -= 1;
        if live_children[p] == 0 && p != root {
            heap.push(LeafKey {
                norm: points.norm(p),
                node: p,
            });
        }
    }
    Ok(RemovalOrder { sequence, root })
}

/// Nodes left after removing the first `n − k` entries of `order`, ascending.
pub fn prune_to_size(tree: &SemanticTree, order: &RemovalOrder, k: usize) -> Result<Vec<usize>> {
    let n = tree.node_count();
    if k == 0 || k > n {
        return Err(Error::invalid(format!("target size {k} outside 1..={n}")));
    }
    if order.sequence.len() + 1 != n {
        return Err(Error::invalid("removal order does not match tree size"));
    }
    let mut keep = vec![true; n];
    for &v in &order.sequence[..n - k] {
        keep[v] = false;
    }
    Ok((0..n).filter(|&v| keep[v]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::PoincareVector;

    fn set(points: &[&[f64]]) -> PoincarePointSet {
        let pts: Vec<_> = points
            .iter()
            .map(|p| PoincareVector::new(p.to_vec()).unwrap())
            .collect();
        PoincarePointSet::from_points(&pts).unwrap()
    }

    #[test]
    fn root_selection() {
        assert_eq!(select_root(&set(&[&[0.9], &[0.1], &[0.5]])).unwrap(), 1);
        assert_eq!(select_root(&set(&[&[0.4, 0.2]])).unwrap(), 0);
        assert_eq!(select_root(&set(&[&[0.5, 0.0], &[0.0, -0.5]])).unwrap(), 0);
        assert!(select_root(&PoincarePointSet::from_points(&[]).unwrap()).is_err());
    }

    #[test]
    fn collinear_points_form_a_path() {
        let pts = set(&[&[0.1, 0.0], &[0.2, 0.0], &[0.3, 0.0]]);
        let tree = build_mst(&pts).unwrap();
        assert_eq!(tree.root(), 0);
        assert_eq!(tree.parent_of(1), Some(0));
        assert_eq!(tree.parent_of(2), Some(1));
        let order = compute_removal_order(&tree, &pts).unwrap();
        assert_eq!(order.sequence, vec![2, 1]);
        assert_eq!(prune_to_size(&tree, &order, 2).unwrap(), vec![0, 1]);
        assert_eq!(prune_to_size(&tree, &order, 3).unwrap(), vec![0, 1, 2]);
        assert_eq!(prune_to_size(&tree, &order, 1).unwrap(), vec![0]);
        assert!(prune_to_size(&tree, &order, 0).is_err());
        assert!(prune_to_size(&tree, &order, 4).is_err());
    }

    #[test]
    fn single_node_tree() {
        let pts = set(&[&[0.3, 0.3]]);
        let tree = build_mst(&pts).unwrap();
        assert_eq!(tree.node_count(), 1);
        assert_eq!(tree.edges().count(), 0);
        let order = compute_removal_order(&tree, &pts).unwrap();
        assert!(order.sequence.is_empty());
        assert_eq!(prune_to_size(&tree, &order, 1).unwrap(), vec![0]);
    }

    #[test]
    fn star_leaves_go_outermost_first() {
        // Root 0 at the origin; leaves at norms 0.6, 0.3, 0.9 in distinct directions.
        let pts = set(&[&[0.0, 0.0], &[0.6, 0.0], &[0.0, 0.3], &[-0.9, 0.0]]);
        let tree = SemanticTree::from_parents(vec![None, Some(0), Some(0), Some(0)], vec![0.0; 4])
            .unwrap();
        let order = compute_removal_order(&tree, &pts).unwrap();
        assert_eq!(order.sequence, vec![3, 1, 2]);
    }

    #[test]
    fn equal_norm_leaves_remove_larger_index_first() {
        let pts = set(&[&[0.0, 0.0], &[0.5, 0.0], &[0.0, 0.5]]);
        let tree = SemanticTree::from_parents(vec![None, Some(0), Some(0)], vec![0.0; 3]).unwrap();
        assert_eq!(
            compute_removal_order(&tree, &pts).unwrap().sequence,
            vec![2, 1]
        );
    }

    #[test]
    fn duplicates_make_zero_weight_edges() {
        let pts = set(&[&[0.2, 0.1], &[0.2, 0.1], &[0.2, 0.1]]);
        let tree = build_mst(&pts).unwrap();
        assert_eq!(tree.root(), 0);
        assert_eq!(tree.parent_of(1), Some(0));
        assert_eq!(tree.parent_of(2), Some(0));
        assert_eq!(tree.total_weight(), 0.0);
    }

    #[test]
    fn from_parents_rejects_malformed_tables() {
        assert!(SemanticTree::from_parents(vec![None, None], vec![0.0; 2]).is_err());
        assert!(SemanticTree::from_parents(vec![Some(1), Some(0)], vec![0.0; 2]).is_err());
        assert!(SemanticTree::from_parents(vec![None, Some(2), Some(1)], vec![0.0; 3]).is_err());
        assert!(SemanticTree::from_parents(vec![None, Some(7)], vec![0.0; 2]).is_err());
    }

    #[test]
    fn replay_reports_first_bad_step() {
        let tree = SemanticTree::from_parents(vec![None, Some(0), Some(1)], vec![0.0; 3]).unwrap();
        let good = RemovalOrder {
            sequence: vec![2, 1],
            root: 0,
        };
        assert_eq!(good.replay(&tree), Ok(()));
        let bad = RemovalOrder {
            sequence: vec![1, 2],
            root: 0,
        };
        assert_eq!(
            bad.replay(&tree),
            Err(ReplayError::NotALeaf { step: 0, node: 1 })
        );
        let bad = RemovalOrder {
            sequence: vec![2, 0],
            root: 0,
        };
        assert_eq!(bad.replay(&tree), Err(ReplayError::RootRemoved { step: 1 }));
    }

    #[test]
    fn exports() {
        let pts = set(&[&[0.0, 0.0], &[0.5, 0.0]]);
        let tree = build_mst(&pts).unwrap();
        let list = tree.to_edge_list();
        let fields: Vec<&str> = list.trim_end().split(' ').collect();
        assert_eq!(&fields[..2], &["1", "0"]);
        let w: f64 = fields[2].parse().unwrap();
        assert_eq!(w, tree.edge_weight(1));
        assert!((w - 3f64.ln()).abs() < 1e-15);
        let dot = tree.to_dot();
        assert!(dot.starts_with("digraph semantic_tree {"));
        assert!(dot.contains(&format!("0 -> 1 [label=\"{}\"];", fields[2])));
    }

    #[test]
    fn mst_charges_distance_counter() {
        let pts = set(&[&[0.1], &[0.2], &[0.3], &[0.4]]);
        let before = crate::geometry::distance_evaluations();
        build_mst(&pts).unwrap();
        assert_eq!(crate::geometry::distance_evaluations() - before, 3 + 2 + 1);
    }
}
