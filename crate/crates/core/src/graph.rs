//! Directed multigraphs, incidence algebra, connectivity and positive circuits.
//!
//! Vertices and edges are indexed from zero in the API. File formats and
//! reports use one-based ids.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::rational::Q;
use num_traits::Zero;

/// Default bound on the number of positive circuits `enumerate_positive_circuits` will produce.
pub const DEFAULT_MAX_CYCLES: usize = 1_000_000;

/// Environment variable overriding [`DEFAULT_MAX_CYCLES`].
pub const MAX_CYCLES_ENV: &str = "FLOWNET_MAX_CYCLES";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct Edge {
    pub tail: usize,
    pub head: usize,
}

/// Loopless directed multigraph. Parallel and antiparallel edges are allowed.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DirectedGraph {
    vertex_count: usize,
    edges: Vec<Edge>,
}

impl DirectedGraph {
    pub fn new(vertex_count: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        let edges: Vec<Edge> = edges
            .into_iter()
            .map(|(tail, head)| Edge { tail, head })
            .collect();
        for (i, e) in edges.iter().enumerate() {
            for v in [e.tail, e.head] {
                if v >= vertex_count {
                    return Err(Error::VertexOutOfRange {
                        edge: i + 1,
                        vertex: v + 1,
                        vertex_count,
                    });
                }
            }
            if e.tail == e.head {
                return Err(Error::SelfLoop {
                    edge: i + 1,
                    vertex: e.tail + 1,
                });
            }
        }
        Ok(Self {
            vertex_count,
            edges,
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, e: usize) -> Edge {
        self.edges[e]
    }

    /// Dense `n x m` incidence matrix: `+1` at the head, `-1` at the tail.
    pub fn incidence_matrix(&self) -> Vec<Vec<i64>> {
        let mut b = vec![vec![0i64; self.edges.len()]; self.vertex_count];
        for (j, e) in self.edges.iter().enumerate() {
            b[e.head][j] += 1;
            b[e.tail][j] -= 1;
        }
        b
    }

    /// `B z` for an exact edge vector.
    pub fn divergence(&self, z: &[Q]) -> Vec<Q> {
        let mut out = vec![Q::zero(); self.vertex_count];
        for (e, &flow) in self.edges.iter().zip(z) {
            out[e.head] += flow;
            out[e.tail] -= flow;
        }
        out
    }

    pub fn is_circulation(&self, z: &[Q]) -> bool {
        z.len() == self.edges.len() && self.divergence(z).iter().all(Zero::is_zero)
    }

    /// `B z` in floating point.
    pub fn divergence_f64(&self, z: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (e, &flow) in self.edges.iter().zip(z) {
            out[e.head] += flow;
            out[e.tail] -= flow;
        }
    }

    /// `B^T p`: the head-minus-tail difference of a vertex potential on every edge.
    pub fn edge_differences(&self, p: &[f64], out: &mut [f64]) {
        for (o, e) in out.iter_mut().zip(&self.edges) {
            *o = p[e.head] - p[e.tail];
        }
    }

    pub fn reversed_edge(&self, e: usize) -> Self {
        let mut g = self.clone();
        let Edge { tail, head } = g.edges[e];
        g.edges[e] = Edge {
            tail: head,
            head: tail,
        };
        g
    }

    /// Weakly connected components of `(V, subset)`; `subset[e]` selects edge `e`.
    pub fn weakly_connected_components(&self, subset: &[bool]) -> Components {
        let mut uf = UnionFind::new(self.vertex_count);
        for (e, &keep) in self.edges.iter().zip(subset) {
            if keep {
                uf.union(e.tail, e.head);
            }
        }
        Components::from_roots((0..self.vertex_count).map(|v| uf.find(v)))
    }

    pub fn all_edges(&self) -> Vec<bool> {
        vec![true; self.edges.len()]
    }

    pub fn is_weakly_connected(&self) -> bool {
        self.weakly_connected_components(&self.all_edges()).count() <= 1
    }

    /// True iff `(V, subset)` with orientation ignored is connected and spans every vertex.
    pub fn contains_spanning_tree(&self, subset: &[bool]) -> bool {
        self.weakly_connected_components(subset).count() == 1
    }

    pub fn is_strongly_connected(&self) -> bool {
        let n = self.vertex_count;
        if n <= 1 {
            return true;
        }
        let forward = self.reach_from(0, false);
        let backward = self.reach_from(0, true);
        forward.iter().all(|&r| r) && backward.iter().all(|&r| r)
    }

    fn reach_from(&self, start: usize, reversed: bool) -> Vec<bool> {
        let adj = self.adjacency(reversed);
        let mut seen = vec![false; self.vertex_count];
        seen[start] = true;
        let mut stack = vec![start];
        while let Some(v) = stack.pop() {
            for &(_, w) in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen
    }

    /// Out-adjacency as `(edge, neighbour)` lists in edge order.
    fn adjacency(&self, reversed: bool) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.vertex_count];
        for (i, e) in self.edges.iter().enumerate() {
            if reversed {
                adj[e.head].push((i, e.tail));
            } else {
                adj[e.tail].push((i, e.head));
            }
        }
        adj
    }

    /// All simple directed cycles as `{0,1}` edge vectors, sorted by their edge supports.
    pub fn enumerate_positive_circuits(&self) -> Result<Vec<CircuitVector>> {
        self.enumerate_positive_circuits_capped(max_cycles_from_env())
    }

    /// Johnson-style elementary circuit search over edges, so parallel edges
    /// yield distinct circuits.
    pub fn enumerate_positive_circuits_capped(&self, cap: usize) -> Result<Vec<CircuitVector>> {
        let n = self.vertex_count;
        let adj = self.adjacency(false);
        let mut supports: Vec<Vec<usize>> = Vec::new();
        for start in 0..n {
            let mut search = CircuitSearch {
                adj: &adj,
                start,
                blocked: vec![false; n],
                block_map: vec![Vec::new(); n],
                path: Vec::new(),
                found: &mut supports,
                cap,
            };
            search.circuit(start)?;
        }
        for s in &mut supports {
            s.sort_unstable();
        }
        supports.sort();
        let m = self.edges.len();
        Ok(supports
            .into_iter()
            .map(|s| CircuitVector::from_support(m, &s))
            .collect())
    }
}

struct CircuitSearch<'a> {
    adj: &'a [Vec<(usize, usize)>],
    start: usize,
    blocked: Vec<bool>,
    block_map: Vec<Vec<usize>>,
    path: Vec<usize>,
    found: &'a mut Vec<Vec<usize>>,
    cap: usize,
}

impl CircuitSearch<'_> {
    fn circuit(&mut self, v: usize) -> Result<bool> {
        let mut closed = false;
        self.blocked[v] = true;
        for &(e, w) in &self.adj[v] {
            if w < self.start {
                continue;
            }
            if w == self.start {
                if self.found.len() >= self.cap {
                    return Err(Error::CycleCapExceeded { cap: self.cap });
                }
                let mut cycle = self.path.clone();
                cycle.push(e);
                self.found.push(cycle);
                closed = true;
            } else if !self.blocked[w] {
                self.path.push(e);
                let sub = self.circuit(w)?;
                self.path.pop();
                closed |= sub;
            }
        }
        if closed {
            self.unblock(v);
        } else {
            for &(_, w) in &self.adj[v] {
                if w >= self.start && !self.block_map[w].contains(&v) {
                    self.block_map[w].push(v);
                }
            }
        }
        Ok(closed)
    }

    fn unblock(&mut self, v: usize) {
        let mut stack = vec![v];
        while let Some(u) = stack.pop() {
            if self.blocked[u] {
                self.blocked[u] = false;
                stack.append(&mut self.block_map[u]);
            }
        }
    }
}

pub fn max_cycles_from_env() -> usize {
    std::env::var(MAX_CYCLES_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(DEFAULT_MAX_CYCLES)
}

/// Signed incidence vector of a cycle of the underlying undirected graph.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CircuitVector {
    entries: Vec<i8>,
}

impl CircuitVector {
    pub fn from_support(m: usize, support: &[usize]) -> Self {
        let mut entries = vec![0i8; m];
        for &e in support {
            entries[e] = 1;
        }
        Self { entries }
    }

    pub fn from_entries(entries: Vec<i8>) -> Self {
        Self { entries }
    }

    pub fn entries(&self) -> &[i8] {
        &self.entries
    }

    pub fn support(&self) -> Vec<usize> {
        self.entries
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn is_positive(&self) -> bool {
        self.entries.iter().all(|&v| v == 0 || v == 1)
    }

    pub fn as_rational(&self) -> Vec<Q> {
        self.entries
            .iter()
            .map(|&v| Q::from_integer(v as i128))
            .collect()
    }

    /// `B c = 0` and the support is a single cycle.
    pub fn is_valid_for(&self, g: &DirectedGraph) -> bool {
        if self.entries.len() != g.edge_count() || !g.is_circulation(&self.as_rational()) {
            return false;
        }
        let support = self.support();
        if support.is_empty() {
            return false;
        }
        // A nonzero {0,±1} circulation whose support has as many vertices as
        // edges and is connected is exactly one cycle.
        let mut touched = vec![false; g.vertex_count()];
        let mut mask = vec![false; g.edge_count()];
        for &e in &support {
            mask[e] = true;
            touched[g.edge(e).tail] = true;
            touched[g.edge(e).head] = true;
        }
        let vertices = touched.iter().filter(|&&t| t).count();
        let comps = g.weakly_connected_components(&mask);
        let support_comps: std::collections::BTreeSet<usize> = (0..g.vertex_count())
            .filter(|&v| touched[v])
            .map(|v| comps.label(v))
            .collect();
        vertices == support.len() && support_comps.len() == 1
    }
}

/// Vertex partition with canonical labels: component ids are assigned in
/// order of each component's smallest vertex.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Components {
    labels: Vec<usize>,
    count: usize,
}

impl Components {
    fn from_roots(roots: impl Iterator<Item = usize>) -> Self {
        let roots: Vec<usize> = roots.collect();
        let mut relabel = std::collections::HashMap::new();
        let labels: Vec<usize> = roots
            .iter()
            .map(|r| {
                let next = relabel.len();
                *relabel.entry(*r).or_insert(next)
            })
            .collect();
        Self {
            count: relabel.len(),
            labels,
        }
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn label(&self, v: usize) -> usize {
        self.labels[v]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Vertex lists per component, each sorted.
    pub fn groups(&self) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); self.count];
        for (v, &c) in self.labels.iter().enumerate() {
            groups[c].push(v);
        }
        groups
    }
}

pub(crate) struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    pub(crate) fn find(&mut self, mut v: usize) -> usize {
        while self.parent[v] != v {
            self.parent[v] = self.parent[self.parent[v]];
            v = self.parent[v];
        }
        v
    }

    pub(crate) fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        self.parent[hi] = lo;
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{integer_rank, q};

    fn triangle() -> DirectedGraph {
        DirectedGraph::new(3, vec![(0, 1), (1, 2), (2, 0)]).unwrap()
    }

    fn subset(m: usize, ids: &[usize]) -> Vec<bool> {
        let mut s = vec![false; m];
        ids.iter().for_each(|&e| s[e] = true);
        s
    }

    #[test]
    fn rejects_self_loops_and_bad_vertices() {
        assert!(matches!(
            DirectedGraph::new(2, vec![(0, 0)]),
            Err(Error::SelfLoop { edge: 1, vertex: 1 })
        ));
        assert!(matches!(
            DirectedGraph::new(2, vec![(0, 2)]),
            Err(Error::VertexOutOfRange { .. })
        ));
    }

    #[test]
    fn incidence_columns() {
        let g = DirectedGraph::new(2, vec![(0, 1)]).unwrap();
        assert_eq!(g.incidence_matrix(), vec![vec![-1], vec![1]]);

        let b = triangle().incidence_matrix();
        assert_eq!(b, vec![vec![-1, 0, 1], vec![1, -1, 0], vec![0, 1, -1]]);
        for j in 0..3 {
            assert_eq!((0..3).map(|i| b[i][j]).sum::<i64>(), 0);
        }

        let r = triangle().reversed_edge(1).incidence_matrix();
        for i in 0..3 {
            assert_eq!(r[i][1], -b[i][1]);
        }
    }

    #[test]
    fn weak_components() {
        let g = triangle();
        assert_eq!(g.weakly_connected_components(&g.all_edges()).count(), 1);
        let c = g.weakly_connected_components(&subset(3, &[0]));
        assert_eq!(c.groups(), vec![vec![0, 1], vec![2]]);
        let c = g.weakly_connected_components(&subset(3, &[]));
        assert_eq!(c.count(), 3);
    }

    #[test]
    fn strong_connectivity() {
        assert!(triangle().is_strongly_connected());
        assert!(!DirectedGraph::new(2, vec![(0, 1)]).unwrap().is_strongly_connected());
        assert!(DirectedGraph::new(2, vec![(0, 1), (1, 0)])
            .unwrap()
            .is_strongly_connected());
    }

    #[test]
    fn spanning_tree_subsets() {
        let g = triangle();
        assert!(g.contains_spanning_tree(&subset(3, &[0, 1])));
        assert!(!g.contains_spanning_tree(&subset(3, &[0])));
        assert!(g.contains_spanning_tree(&subset(3, &[0, 1, 2])));
    }

    #[test]
    fn circuits_of_small_graphs() {
        let c = triangle().enumerate_positive_circuits().unwrap();
        assert_eq!(c, vec![CircuitVector::from_entries(vec![1, 1, 1])]);

        let pair = DirectedGraph::new(2, vec![(0, 1), (1, 0)]).unwrap();
        assert_eq!(
            pair.enumerate_positive_circuits().unwrap(),
            vec![CircuitVector::from_entries(vec![1, 1])]
        );

        let single = DirectedGraph::new(2, vec![(0, 1)]).unwrap();
        assert!(single.enumerate_positive_circuits().unwrap().is_empty());
    }

    #[test]
    fn parallel_edges_give_distinct_circuits() {
        let g = DirectedGraph::new(2, vec![(0, 1), (0, 1), (1, 0)]).unwrap();
        let c = g.enumerate_positive_circuits().unwrap();
        let supports: Vec<_> = c.iter().map(|c| c.support()).collect();
        assert_eq!(supports, vec![vec![0, 2], vec![1, 2]]);
    }

    #[test]
    fn complete_digraph_cycle_count() {
        // K4 with both orientations: 6 two-cycles, 8 three-cycles, 6 four-cycles.
        let mut edges = Vec::new();
        for a in 0..4 {
            for b in 0..4 {
                if a != b {
                    edges.push((a, b));
                }
            }
        }
        let g = DirectedGraph::new(4, edges).unwrap();
        let c = g.enumerate_positive_circuits().unwrap();
        assert_eq!(c.len(), 20);
        assert!(c.iter().all(|c| c.is_positive() && c.is_valid_for(&g)));
        assert!(matches!(
            g.enumerate_positive_circuits_capped(10),
            Err(Error::CycleCapExceeded { cap: 10 })
        ));
    }

    #[test]
    fn circuits_span_kernel_of_strongly_connected_graph() {
        let g = DirectedGraph::new(4, vec![(0, 1), (1, 2), (2, 3), (3, 0), (1, 3), (2, 0), (0, 2)])
            .unwrap();
        assert!(g.is_strongly_connected());
        let rows: Vec<Vec<i64>> = g
            .enumerate_positive_circuits()
            .unwrap()
            .iter()
            .map(|c| c.entries().iter().map(|&v| v as i64).collect())
            .collect();
        let comps = g.weakly_connected_components(&g.all_edges()).count();
        assert_eq!(integer_rank(&rows), g.edge_count() - g.vertex_count() + comps);
    }

    #[test]
    fn left_kernel_of_connected_incidence_is_one_dimensional() {
        let g = triangle();
        let b = g.incidence_matrix();
        assert_eq!(integer_rank(&b), g.vertex_count() - 1);
        let ones = [q(1); 3];
        let z: Vec<Q> = (0..3).map(|j| (0..3).map(|i| q(b[i][j] as i128) * ones[i]).sum()).collect();
        assert!(z.iter().all(Zero::is_zero));
    }
}
