//! Known DAG structure with a validated topological order.
//!
//! Node indices are 0-based throughout the library. Error messages print
//! them 1-based, matching the file formats.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashSet};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("graph must have at least one node")]
    Empty,
    /// `label` is the offending index in 1-based form.
    #[error("node index {label} out of range 1..={p}")]
    IndexOutOfRange { label: usize, p: usize },
    #[error("self loop on node {}", .0 + 1)]
    SelfLoop(usize),
    #[error("duplicate edge ({},{})", .0 + 1, .1 + 1)]
    DuplicateEdge(usize, usize),
    #[error("edge set contains a directed cycle through nodes {}", fmt_nodes(.0))]
    Cycle(Vec<usize>),
}

fn fmt_nodes(nodes: &[usize]) -> String {
    nodes
        .iter()
        .map(|n| (n + 1).to_string())
        .collect::<Vec<_>>()
        .join(",")
}

/// A directed edge `parent -> child`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Edge {
    pub parent: usize,
    pub child: usize,
}

impl Edge {
    pub fn new(parent: usize, child: usize) -> Self {
        Self { parent, child }
    }
}

/// Names one scalar parameter of the model. Displays 1-based, e.g. `w1,2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParamId {
    Weight { parent: usize, child: usize },
    Sigma(usize),
    Intercept(usize),
}

impl std::fmt::Display for ParamId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match *self {
            ParamId::Weight { parent, child } => write!(f, "w{},{}", parent + 1, child + 1),
            ParamId::Sigma(j) => write!(f, "sigma{}", j + 1),
            ParamId::Intercept(j) => write!(f, "m{}", j + 1),
        }
    }
}

/// Node count, edge set and topological order of a DAG.
///
/// Edges are kept sorted by `(child, parent)`; that order is the canonical
/// order of the edge-weight parameters everywhere in the crate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DagStructure {
    p: usize,
    edges: Vec<Edge>,
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
    /// `position[node]` = place of `node` in the topological order.
    position: Vec<usize>,
    /// Nodes listed in topological order.
    topo: Vec<usize>,
    /// Per child, the range of its incoming edges in `edges`.
    edge_ranges: Vec<(usize, usize)>,
}

impl DagStructure {
    /// Validates `edges` (0-based `(parent, child)` pairs) and derives a
    /// topological order by Kahn's method with smallest-index tie breaking,
    /// so input already satisfying `parent < child` keeps the identity order.
    pub fn new(p: usize, edges: &[(usize, usize)]) -> Result<Self, GraphError> {
        if p == 0 {
            return Err(GraphError::Empty);
        }
        let mut seen = HashSet::with_capacity(edges.len());
        let mut list = Vec::with_capacity(edges.len());
        for &(i, j) in edges {
            for idx in [i, j] {
                if idx >= p {
                    return Err(GraphError::IndexOutOfRange { label: idx + 1, p });
                }
            }
            if i == j {
                return Err(GraphError::SelfLoop(i));
            }
            if !seen.insert((i, j)) {
                return Err(GraphError::DuplicateEdge(i, j));
            }
            list.push(Edge::new(i, j));
        }
        list.sort_by_key(|e| (e.child, e.parent));

        let mut parents = vec![Vec::new(); p];
        let mut children = vec![Vec::new(); p];
        for e in &list {
            parents[e.child].push(e.parent);
            children[e.parent].push(e.child);
        }
        children.iter_mut().for_each(|c| c.sort_unstable());

        let mut indegree: Vec<usize> = parents.iter().map(Vec::len).collect();
        let mut ready: BinaryHeap<Reverse<usize>> = (0..p)
            .filter(|&v| indegree[v] == 0)
            .map(Reverse)
            .collect();
        let mut topo = Vec::with_capacity(p);
        while let Some(Reverse(v)) = ready.pop() {
            topo.push(v);
            for &c in &children[v] {
                indegree[c] -= 1;
                if indegree[c] == 0 {
                    ready.push(Reverse(c));
                }
            }
        }
        if topo.len() < p {
            let stuck = (0..p).filter(|&v| indegree[v] > 0).collect();
            return Err(GraphError::Cycle(stuck));
        }
        let mut position = vec![0; p];
        for (pos, &v) in topo.iter().enumerate() {
            position[v] = pos;
        }

        let mut edge_ranges = vec![(0, 0); p];
        let mut start = 0;
        for (j, range) in edge_ranges.iter_mut().enumerate() {
            let end = start + parents[j].len();
            *range = (start, end);
            start = end;
        }

        Ok(Self {
            p,
            edges: list,
            parents,
            children,
            position,
            topo,
            edge_ranges,
        })
    }

    /// Same as [`DagStructure::new`] with 1-based pairs.
    pub fn from_one_based(p: usize, edges: &[(usize, usize)]) -> Result<Self, GraphError> {
        let mut zero = Vec::with_capacity(edges.len());
        for &(i, j) in edges {
            for idx in [i, j] {
                if idx == 0 || idx > p {
                    return Err(GraphError::IndexOutOfRange { label: idx, p });
                }
            }
            zero.push((i - 1, j - 1));
        }
        Self::new(p, &zero)
    }

    /// The complete DAG on `p` nodes: every pair `i < j` is an edge.
    pub fn full(p: usize) -> Result<Self, GraphError> {
        let edges: Vec<_> = (0..p)
            .flat_map(|j| (0..j).map(move |i| (i, j)))
            .collect();
        Self::new(p, &edges)
    }

    #[inline]
    pub fn p(&self) -> usize {
        self.p
    }

    /// Edges in canonical `(child, parent)` order.
    #[inline]
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    #[inline]
    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Length of the `(w, σ)` parameter vector.
    #[inline]
    pub fn num_params(&self) -> usize {
        self.edges.len() + self.p
    }

    /// Canonical `(w, σ)` parameter order: edge weights by `(child, parent)`,
    /// then `σ_1 … σ_p`.
    pub fn param_order(&self) -> Vec<ParamId> {
        self.edges
            .iter()
            .map(|e| ParamId::Weight {
                parent: e.parent,
                child: e.child,
            })
            .chain((0..self.p).map(ParamId::Sigma))
            .collect()
    }

    /// Parents of `j`, ascending.
    pub fn parents(&self, j: usize) -> Result<&[usize], GraphError> {
        self.parents
            .get(j)
            .map(Vec::as_slice)
            .ok_or(GraphError::IndexOutOfRange { label: j + 1, p: self.p })
    }

    #[inline]
    pub(crate) fn parents_of(&self, j: usize) -> &[usize] {
        &self.parents[j]
    }

    pub fn children(&self, j: usize) -> Result<&[usize], GraphError> {
        self.children
            .get(j)
            .map(Vec::as_slice)
            .ok_or(GraphError::IndexOutOfRange { label: j + 1, p: self.p })
    }

    /// Indices into [`edges`](Self::edges) of the edges pointing into `j`;
    /// they are contiguous and follow the order of [`parents`](Self::parents).
    #[inline]
    pub fn incoming(&self, j: usize) -> std::ops::Range<usize> {
        let (s, e) = self.edge_ranges[j];
        s..e
    }

    pub fn edge_index(&self, parent: usize, child: usize) -> Option<usize> {
        if child >= self.p {
            return None;
        }
        let r = self.incoming(child);
        self.parents[child]
            .binary_search(&parent)
            .ok()
            .map(|k| r.start + k)
    }

    /// `order[node]` = the node's position in the topological order.
    #[inline]
    pub fn order(&self) -> &[usize] {
        &self.position
    }

    /// Nodes in topological order.
    #[inline]
    pub fn topological(&self) -> &[usize] {
        &self.topo
    }

    /// True when every edge already satisfies `parent < child`.
    pub fn is_identity_order(&self) -> bool {
        self.topo.iter().enumerate().all(|(i, &v)| i == v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> DagStructure {
        DagStructure::from_one_based(3, &[(1, 2), (1, 3), (2, 3)]).unwrap()
    }

    #[test]
    fn toy_graph_parents_and_order() {
        let g = toy();
        assert!(g.is_identity_order());
        assert_eq!(g.parents(2).unwrap(), &[0, 1]);
        assert!(g.parents(0).unwrap().is_empty());
        assert_eq!(
            g.edges(),
            &[Edge::new(0, 1), Edge::new(0, 2), Edge::new(1, 2)]
        );
        assert_eq!(g.edge_index(1, 2), Some(2));
        assert_eq!(g.edge_index(2, 1), None);
    }

    #[test]
    fn empty_graph() {
        let g = DagStructure::new(4, &[]).unwrap();
        assert!(g.is_identity_order());
        for j in 0..4 {
            assert!(g.parents(j).unwrap().is_empty());
        }
    }

    #[test]
    fn errors() {
        assert!(matches!(
            DagStructure::from_one_based(2, &[(1, 2), (2, 1)]),
            Err(GraphError::Cycle(_))
        ));
        assert_eq!(
            DagStructure::new(3, &[(0, 1), (0, 1)]),
            Err(GraphError::DuplicateEdge(0, 1))
        );
        assert_eq!(
            DagStructure::from_one_based(3, &[(1, 4)]),
            Err(GraphError::IndexOutOfRange { label: 4, p: 3 })
        );
        assert_eq!(
            DagStructure::from_one_based(3, &[(0, 2)]).unwrap_err().to_string(),
            "node index 0 out of range 1..=3"
        );
        assert_eq!(DagStructure::new(2, &[(1, 1)]), Err(GraphError::SelfLoop(1)));
        assert!(DagStructure::new(2, &[]).unwrap().parents(2).is_err());
    }

    #[test]
    fn unordered_labels_get_smallest_index_order() {
        // 2 -> 0 -> 1, plus isolated 3.
        let g = DagStructure::new(4, &[(2, 0), (0, 1)]).unwrap();
        assert_eq!(g.topological(), &[2, 0, 1, 3]);
        assert_eq!(g.order(), &[1, 2, 0, 3]);
        for e in g.edges() {
            assert!(g.order()[e.parent] < g.order()[e.child]);
        }
    }
}
