//! Constrained networks and their normalization to compatible orientation.
//!
//! Normalization composes three steps, each of which preserves the set of
//! admissible flows up to a recorded edge mapping:
//!
//! 1. absorb a matched constant disturbance into shifted intervals,
//! 2. split every edge whose interval straddles zero into two parallel edges,
//! 3. reverse edges whose interval is non-positive, and drop `[0, 0]` edges.

use num_traits::{Signed, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::DirectedGraph;
use crate::rational::{format_rational, Q};

/// Terminal columns of `E` (one `±1` per column) with the constant disturbance `d`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Terminals {
    pub columns: Vec<Terminal>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Terminal {
    pub vertex: usize,
    /// `+1` for inflow, `-1` for outflow.
    pub sign: i8,
    pub flow: Q,
}

impl Terminals {
    /// `E d` as a vertex vector.
    pub fn injection(&self, n: usize) -> Vec<Q> {
        let mut out = vec![Q::zero(); n];
        for t in &self.columns {
            out[t.vertex] += Q::from_integer(t.sign as i128) * t.flow;
        }
        out
    }

    pub fn injection_f64(&self, n: usize) -> Vec<f64> {
        crate::rational::vec_to_f64(&self.injection(n))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstrainedNetwork {
    pub graph: DirectedGraph,
    pub lower: Vec<Q>,
    pub upper: Vec<Q>,
    pub terminals: Option<Terminals>,
}

impl ConstrainedNetwork {
    pub fn new(graph: DirectedGraph, lower: Vec<Q>, upper: Vec<Q>) -> Result<Self> {
        Self::with_terminals(graph, lower, upper, None)
    }

    pub fn with_terminals(
        graph: DirectedGraph,
        lower: Vec<Q>,
        upper: Vec<Q>,
        terminals: Option<Terminals>,
    ) -> Result<Self> {
        let m = graph.edge_count();
        for v in [&lower, &upper] {
            if v.len() != m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    got: v.len(),
                });
            }
        }
        for (i, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if lo > hi {
                return Err(Error::InvalidInterval {
                    edge: i + 1,
                    lower: format_rational(lo),
                    upper: format_rational(hi),
                });
            }
        }
        if let Some(t) = &terminals {
            for (k, col) in t.columns.iter().enumerate() {
                if col.vertex >= graph.vertex_count() {
                    return Err(Error::InvalidTerminal(format!(
                        "terminal {} references vertex {} outside 1..{}",
                        k + 1,
                        col.vertex + 1,
                        graph.vertex_count()
                    )));
                }
                if col.sign != 1 && col.sign != -1 {
                    return Err(Error::InvalidTerminal(format!(
                        "terminal {} has sign {}, expected +1 or -1",
                        k + 1,
                        col.sign
                    )));
                }
            }
        }
        Ok(Self {
            graph,
            lower,
            upper,
            terminals,
        })
    }

    /// Network on `graph` with every edge bounded by the same interval.
    pub fn uniform(graph: DirectedGraph, lower: Q, upper: Q) -> Result<Self> {
        let m = graph.edge_count();
        Self::new(graph, vec![lower; m], vec![upper; m])
    }

    pub fn vertex_count(&self) -> usize {
        self.graph.vertex_count()
    }

    pub fn edge_count(&self) -> usize {
        self.graph.edge_count()
    }

    /// `u+ >= u- >= 0` with `(u-, u+) != (0, 0)` on every edge, and no terminals.
    pub fn is_compatible(&self) -> bool {
        self.terminals.is_none() && self.first_incompatible_edge().is_none()
    }

    pub fn first_incompatible_edge(&self) -> Option<usize> {
        self.lower
            .iter()
            .zip(&self.upper)
            .position(|(lo, hi)| lo.is_negative() || (lo.is_zero() && hi.is_zero()))
    }

    pub fn ensure_compatible(&self) -> Result<()> {
        if self.terminals.is_some() {
            return Err(Error::TerminalsPresent);
        }
        match self.first_incompatible_edge() {
            Some(e) => Err(Error::NotCompatible { edge: e + 1 }),
            None => Ok(()),
        }
    }

    pub fn is_fixed(&self, e: usize) -> bool {
        self.lower[e] == self.upper[e]
    }

    /// `u- <= z <= u+` and `B z = 0`.
    pub fn is_feasible_circulation(&self, z: &[Q]) -> bool {
        z.len() == self.edge_count()
            && z
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (lo, hi))| lo <= v && v <= hi)
            && self.graph.is_circulation(z)
    }

    /// Same graph with every interval translated by `shift`.
    pub fn shifted(&self, shift: &[Q]) -> Self {
        Self {
            graph: self.graph.clone(),
            lower: self.lower.iter().zip(shift).map(|(a, s)| a + s).collect(),
            upper: self.upper.iter().zip(shift).map(|(a, s)| a + s).collect(),
            terminals: None,
        }
    }
}

/// Where a normalized edge's flow comes from in the original network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Piece {
    Whole,
    /// The `[u-, 0]` half of a split edge.
    Negative,
    /// The `[0, u+]` half of a split edge.
    Positive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EdgeMapEntry {
    pub original: usize,
    /// `-1` when the normalized edge is reversed relative to the original.
    pub sign: i8,
    pub piece: Piece,
}

/// Invertible correspondence between normalized and original edge flows.
///
/// A normalized flow `w` maps back to the original edge flow
/// `z_e = sum(sign_k * w_k for k mapped to e) - shift_e`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeMap {
    pub original_edge_count: usize,
    pub entries: Vec<EdgeMapEntry>,
    /// Matching solution absorbed into the intervals, per original edge.
    pub shift: Vec<Q>,
    /// Original edges with interval `[0, 0]` after absorption.
    pub deleted: Vec<usize>,
}

impl EdgeMap {
    pub fn identity(m: usize) -> Self {
        Self {
            original_edge_count: m,
            entries: (0..m)
                .map(|e| EdgeMapEntry {
                    original: e,
                    sign: 1,
                    piece: Piece::Whole,
                })
                .collect(),
            shift: vec![Q::zero(); m],
            deleted: Vec::new(),
        }
    }

    pub fn is_identity(&self) -> bool {
        self.deleted.is_empty()
            && self.shift.iter().all(Zero::is_zero)
            && self.entries.len() == self.original_edge_count
            && self
                .entries
                .iter()
                .enumerate()
                .all(|(i, e)| e.original == i && e.sign == 1 && e.piece == Piece::Whole)
    }

    /// Normalized flow to original edge flow.
    pub fn pull_back(&self, w: &[Q]) -> Vec<Q> {
        let mut z: Vec<Q> = self.shift.iter().map(|s| -s).collect();
        for (entry, flow) in self.entries.iter().zip(w) {
            z[entry.original] += Q::from_integer(entry.sign as i128) * flow;
        }
        z
    }

    /// Original edge flow to normalized flow; split edges route the negative
    /// part to their `Negative` piece and the positive part to `Positive`.
    pub fn push_forward(&self, z: &[Q]) -> Vec<Q> {
        self.entries
            .iter()
            .map(|entry| {
                let shifted = z[entry.original] + self.shift[entry.original];
                let part = match entry.piece {
                    Piece::Whole => shifted,
                    Piece::Negative => shifted.min(Q::zero()),
                    Piece::Positive => shifted.max(Q::zero()),
                };
                Q::from_integer(entry.sign as i128) * part
            })
            .collect()
    }

    /// Controller state on the normalized network: split edges inherit the
    /// original state, reversed edges negate it, absorption translates it.
    pub fn push_controller_state(&self, xc: &[f64]) -> Vec<f64> {
        self.entries
            .iter()
            .map(|entry| {
                let shifted = xc[entry.original] - crate::rational::to_f64(&self.shift[entry.original]);
                entry.sign as f64 * shifted
            })
            .collect()
    }

    /// Composition `self` then `next` (next maps the output of self).
    fn then(&self, next: &EdgeMap) -> EdgeMap {
        let entries = next
            .entries
            .iter()
            .map(|n| {
                let first = self.entries[n.original];
                let piece = match (first.piece, n.piece) {
                    (Piece::Whole, p) => p,
                    (p, Piece::Whole) => p,
                    (p, _) => p,
                };
                EdgeMapEntry {
                    original: first.original,
                    sign: first.sign * n.sign,
                    piece,
                }
            })
            .collect();
        let mut deleted = self.deleted.clone();
        deleted.extend(next.deleted.iter().map(|&k| self.entries[k].original));
        deleted.sort_unstable();
        deleted.dedup();
        EdgeMap {
            original_edge_count: self.original_edge_count,
            entries,
            shift: self.shift.clone(),
            deleted,
        }
    }
}

/// Solves `B x = E d` exactly on a spanning forest, with non-tree entries zero.
pub fn solve_matching(net: &ConstrainedNetwork) -> Result<Vec<Q>> {
    let terminals = net.terminals.as_ref().ok_or(Error::NoTerminals)?;
    let g = &net.graph;
    let n = g.vertex_count();
    let demand = terminals.injection(n);

    // BFS spanning forest; parent_edge[v] is the tree edge joining v to its parent.
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for (i, e) in g.edges().iter().enumerate() {
        adj[e.tail].push((i, e.head));
        adj[e.head].push((i, e.tail));
    }
    let mut parent_edge: Vec<Option<usize>> = vec![None; n];
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut roots = Vec::new();
    for root in 0..n {
        if visited[root] {
            continue;
        }
        roots.push(root);
        visited[root] = true;
        let mut queue = std::collections::VecDeque::from([root]);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            for &(e, w) in &adj[v] {
                if !visited[w] {
                    visited[w] = true;
                    parent_edge[w] = Some(e);
                    queue.push_back(w);
                }
            }
        }
    }

    // Leaves first: subtree[v] accumulates the demand below v.
    let mut subtree = demand.clone();
    let mut x = vec![Q::zero(); g.edge_count()];
    for &v in order.iter().rev() {
        let Some(e) = parent_edge[v] else { continue };
        let edge = g.edge(e);
        let need = subtree[v];
        let parent = if edge.head == v { edge.tail } else { edge.head };
        // (B x)_v over the subtree must equal its demand; the tree edge supplies it.
        x[e] = if edge.head == v { need } else { -need };
        subtree[parent] += need;
    }
    for &r in &roots {
        if !subtree[r].is_zero() {
            return Err(Error::NoMatching {
                vertex: r + 1,
                imbalance: format_rational(&subtree[r]),
            });
        }
    }
    Ok(x)
}

/// Moves a matched disturbance into the intervals: `[u- + x, u+ + x]`.
pub fn absorb_disturbance(net: &ConstrainedNetwork) -> Result<(ConstrainedNetwork, Vec<Q>)> {
    let shift = solve_matching(net)?;
    Ok((net.shifted(&shift), shift))
}

/// Replaces each edge with `u- < 0 < u+` by parallel edges `[u-, 0]` and `[0, u+]`.
pub fn split_bidirectional(net: &ConstrainedNetwork) -> Result<(ConstrainedNetwork, EdgeMap)> {
    if net.terminals.is_some() {
        return Err(Error::TerminalsPresent);
    }
    let mut edges = Vec::new();
    let mut lower = Vec::new();
    let mut upper = Vec::new();
    let mut entries = Vec::new();
    for (i, e) in net.graph.edges().iter().enumerate() {
        let (lo, hi) = (net.lower[i], net.upper[i]);
        if lo.is_negative() && hi.is_positive() {
            for (a, b, piece) in [(lo, Q::zero(), Piece::Negative), (Q::zero(), hi, Piece::Positive)] {
                edges.push((e.tail, e.head));
                lower.push(a);
                upper.push(b);
                entries.push(EdgeMapEntry {
                    original: i,
                    sign: 1,
                    piece,
                });
            }
        } else {
            edges.push((e.tail, e.head));
            lower.push(lo);
            upper.push(hi);
            entries.push(EdgeMapEntry {
                original: i,
                sign: 1,
                piece: Piece::Whole,
            });
        }
    }
    let graph = DirectedGraph::new(net.vertex_count(), edges)?;
    let m = net.edge_count();
    Ok((
        ConstrainedNetwork::new(graph, lower, upper)?,
        EdgeMap {
            original_edge_count: m,
            entries,
            shift: vec![Q::zero(); m],
            deleted: Vec::new(),
        },
    ))
}

/// Reverses edges with `u+ <= 0` to `[-u+, -u-]` and deletes `[0, 0]` edges.
pub fn reorient(net: &ConstrainedNetwork) -> Result<(ConstrainedNetwork, EdgeMap)> {
    if net.terminals.is_some() {
        return Err(Error::TerminalsPresent);
    }
    let mut edges = Vec::new();
    let mut lower = Vec::new();
    let mut upper = Vec::new();
    let mut entries = Vec::new();
    let mut deleted = Vec::new();
    for (i, e) in net.graph.edges().iter().enumerate() {
        let (lo, hi) = (net.lower[i], net.upper[i]);
        if lo.is_negative() && hi.is_positive() {
            return Err(Error::Bidirectional { edge: i + 1 });
        }
        if lo.is_zero() && hi.is_zero() {
            deleted.push(i);
            continue;
        }
        let sign = if hi.is_positive() {
            edges.push((e.tail, e.head));
            lower.push(lo);
            upper.push(hi);
            1
        } else {
            edges.push((e.head, e.tail));
            lower.push(-hi);
            upper.push(-lo);
            -1
        };
        entries.push(EdgeMapEntry {
            original: i,
            sign,
            piece: Piece::Whole,
        });
    }
    let graph = DirectedGraph::new(net.vertex_count(), edges)?;
    let m = net.edge_count();
    Ok((
        ConstrainedNetwork::new(graph, lower, upper)?,
        EdgeMap {
            original_edge_count: m,
            entries,
            shift: vec![Q::zero(); m],
            deleted,
        },
    ))
}

/// absorb (when terminals are present) -> split -> reorient.
pub fn normalize(net: &ConstrainedNetwork) -> Result<(ConstrainedNetwork, EdgeMap)> {
    let (absorbed, shift) = match net.terminals {
        Some(_) => absorb_disturbance(net)?,
        None => (net.clone(), vec![Q::zero(); net.edge_count()]),
    };
    let (split, split_map) = split_bidirectional(&absorbed)?;
    let (oriented, orient_map) = reorient(&split)?;
    let mut map = split_map.then(&orient_map);
    map.shift = shift;
    Ok((oriented, map))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{q, qf};

    fn edge_net(lo: Q, hi: Q) -> ConstrainedNetwork {
        ConstrainedNetwork::new(DirectedGraph::new(2, vec![(0, 1)]).unwrap(), vec![lo], vec![hi])
            .unwrap()
    }

    fn with_terms(net: ConstrainedNetwork, cols: Vec<(usize, i8, Q)>) -> ConstrainedNetwork {
        let terminals = Terminals {
            columns: cols
                .into_iter()
                .map(|(vertex, sign, flow)| Terminal { vertex, sign, flow })
                .collect(),
        };
        ConstrainedNetwork::with_terminals(net.graph, net.lower, net.upper, Some(terminals)).unwrap()
    }

    #[test]
    fn rejects_inverted_interval() {
        let g = DirectedGraph::new(2, vec![(0, 1)]).unwrap();
        assert!(matches!(
            ConstrainedNetwork::new(g, vec![q(2)], vec![q(1)]),
            Err(Error::InvalidInterval { edge: 1, .. })
        ));
    }

    #[test]
    fn matching_zero_disturbance() {
        let net = with_terms(edge_net(q(0), q(1)), vec![(0, 1, q(0)), (1, -1, q(0))]);
        assert_eq!(solve_matching(&net).unwrap(), vec![q(0)]);
    }

    #[test]
    fn matching_single_edge() {
        let net = with_terms(
            edge_net(q(0), q(1)),
            vec![(0, 1, qf(3, 10)), (1, -1, qf(3, 10))],
        );
        // B x = E d with B = (-1, 1)^T and E d = (3/10, -3/10).
        let x = solve_matching(&net).unwrap();
        assert_eq!(x, vec![qf(-3, 10)]);
        let g = &net.graph;
        assert_eq!(g.divergence(&x), net.terminals.as_ref().unwrap().injection(2));
    }

    #[test]
    fn matching_requires_componentwise_balance() {
        let g = DirectedGraph::new(2, vec![]).unwrap();
        let net = with_terms(
            ConstrainedNetwork::new(g, vec![], vec![]).unwrap(),
            vec![(0, 1, q(1)), (1, -1, q(1))],
        );
        assert!(matches!(solve_matching(&net), Err(Error::NoMatching { .. })));
    }

    #[test]
    fn matching_on_a_tree_with_reversed_edges() {
        // 1 -> 2 <- 3, inject 2 at v1, withdraw 1 at v2 and 1 at v3.
        let g = DirectedGraph::new(3, vec![(0, 1), (2, 1)]).unwrap();
        let net = with_terms(
            ConstrainedNetwork::uniform(g, q(0), q(5)).unwrap(),
            vec![(0, 1, q(2)), (1, -1, q(1)), (2, -1, q(1))],
        );
        let x = solve_matching(&net).unwrap();
        assert_eq!(net.graph.divergence(&x), net.terminals.as_ref().unwrap().injection(3));
        assert_eq!(x, vec![q(-2), q(1)]);
    }

    #[test]
    fn shift_by_matching_solution() {
        let shifted = edge_net(q(0), q(1)).shifted(&[qf(3, 10)]);
        assert_eq!((shifted.lower[0], shifted.upper[0]), (qf(3, 10), qf(13, 10)));
    }

    #[test]
    fn absorb_shifts_intervals() {
        let net = with_terms(
            edge_net(q(0), q(1)),
            vec![(0, 1, qf(3, 10)), (1, -1, qf(3, 10))],
        );
        let (abs, shift) = absorb_disturbance(&net).unwrap();
        assert_eq!(abs.lower, vec![qf(-3, 10)]);
        assert_eq!(abs.upper, vec![qf(7, 10)]);
        assert!(abs.terminals.is_none());
        let back = abs.shifted(&shift.iter().map(|s| -s).collect::<Vec<_>>());
        assert_eq!((back.lower, back.upper), (net.lower, net.upper));
    }

    #[test]
    fn zero_shift_keeps_intervals() {
        let net = with_terms(edge_net(q(0), q(1)), vec![(0, 1, q(0))]);
        let (abs, _) = absorb_disturbance(&net).unwrap();
        assert_eq!((abs.lower, abs.upper), (vec![q(0)], vec![q(1)]));
    }

    #[test]
    fn split_cases() {
        let (s, map) = split_bidirectional(&edge_net(q(-1), q(1))).unwrap();
        assert_eq!(s.edge_count(), 2);
        assert_eq!(s.lower, vec![q(-1), q(0)]);
        assert_eq!(s.upper, vec![q(0), q(1)]);
        assert_eq!(s.graph.edge(0), s.graph.edge(1));
        assert_eq!(map.entries[0].piece, Piece::Negative);

        for (lo, hi) in [(q(0), q(1)), (q(-2), q(-1))] {
            let net = edge_net(lo, hi);
            let (s, map) = split_bidirectional(&net).unwrap();
            assert_eq!(s, net);
            assert!(map.is_identity());
        }
    }

    #[test]
    fn reorient_cases() {
        let (r, map) = reorient(&edge_net(q(-2), q(-1))).unwrap();
        assert_eq!(r.graph.edge(0).tail, 1);
        assert_eq!(r.graph.edge(0).head, 0);
        assert_eq!((r.lower[0], r.upper[0]), (q(1), q(2)));
        assert_eq!(map.entries[0].sign, -1);

        let net = edge_net(q(0), q(1));
        assert_eq!(reorient(&net).unwrap().0, net);

        let (r, map) = reorient(&edge_net(q(0), q(0))).unwrap();
        assert_eq!(r.edge_count(), 0);
        assert_eq!(map.deleted, vec![0]);

        assert!(matches!(
            reorient(&edge_net(q(-1), q(1))),
            Err(Error::Bidirectional { edge: 1 })
        ));
    }

    #[test]
    fn normalize_bidirectional_edge() {
        let (n, map) = normalize(&edge_net(q(-1), q(1))).unwrap();
        assert!(n.is_compatible());
        let edges: Vec<_> = n.graph.edges().iter().map(|e| (e.tail, e.head)).collect();
        assert_eq!(edges, vec![(1, 0), (0, 1)]);
        assert_eq!(n.lower, vec![q(0), q(0)]);
        assert_eq!(n.upper, vec![q(1), q(1)]);
        assert_eq!(map.entries[0].sign, -1);
        assert_eq!(map.entries[1].sign, 1);
    }

    #[test]
    fn normalize_identity_on_compatible() {
        let net = edge_net(q(0), q(1));
        let (n, map) = normalize(&net).unwrap();
        assert_eq!(n, net);
        assert!(map.is_identity());
    }

    #[test]
    fn normalize_negative_interval_reverses() {
        let (n, _) = normalize(&edge_net(q(-2), q(-1))).unwrap();
        assert_eq!((n.graph.edge(0).tail, n.graph.edge(0).head), (1, 0));
        assert_eq!((n.lower[0], n.upper[0]), (q(1), q(2)));
    }

    #[test]
    fn normalize_is_idempotent() {
        let g = DirectedGraph::new(3, vec![(0, 1), (1, 2), (2, 0)]).unwrap();
        let net = ConstrainedNetwork::new(g, vec![q(-1), q(-3), q(0)], vec![q(2), q(-1), q(0)]).unwrap();
        let (once, _) = normalize(&net).unwrap();
        let (twice, map) = normalize(&once).unwrap();
        assert_eq!(once, twice);
        assert!(map.is_identity());
    }

    #[test]
    fn edge_map_round_trip() {
        let g = DirectedGraph::new(3, vec![(0, 1), (1, 2), (2, 0)]).unwrap();
        let net = ConstrainedNetwork::new(g, vec![q(-1), q(-3), q(-2)], vec![q(2), q(-1), q(2)]).unwrap();
        let (norm, map) = normalize(&net).unwrap();
        let z = vec![q(-1), qf(-3, 2), qf(1, 2)];
        let w = map.push_forward(&z);
        assert_eq!(map.pull_back(&w), z);
        for (k, v) in w.iter().enumerate() {
            assert!(norm.lower[k] <= *v && *v <= norm.upper[k]);
        }
    }
}
