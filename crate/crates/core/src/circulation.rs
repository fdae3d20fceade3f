//! Exact circulation machinery on compatible networks.

use num_traits::{Signed, Zero};
use serde::Serialize;
use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::graph::{CircuitVector, DirectedGraph};
use crate::network::ConstrainedNetwork;
use crate::rational::Q;

/// Edge flow vector with `B z = 0`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Circulation(pub Vec<Q>);

impl Circulation {
    pub fn as_slice(&self) -> &[Q] {
        &self.0
    }
}

impl std::ops::Deref for Circulation {
    type Target = [Q];
    fn deref(&self) -> &[Q] {
        &self.0
    }
}

/// Capacitated digraph for augmenting-path max-flow. Arc `2k` is the forward
/// arc of the k-th added edge and `2k + 1` its reverse.
#[derive(Debug, Clone)]
pub(crate) struct FlowProblem {
    adj: Vec<Vec<usize>>,
    to: Vec<usize>,
    cap: Vec<Q>,
}

impl FlowProblem {
    pub(crate) fn new(n: usize) -> Self {
        Self {
            adj: vec![Vec::new(); n],
            to: Vec::new(),
            cap: Vec::new(),
        }
    }

    pub(crate) fn add_edge(&mut self, from: usize, to: usize, cap: Q) -> usize {
        let id = self.to.len();
        self.adj[from].push(id);
        self.to.push(to);
        self.cap.push(cap);
        self.adj[to].push(id + 1);
        self.to.push(from);
        self.cap.push(Q::zero());
        id
    }

    /// Flow currently pushed along the arc returned by `add_edge`.
    pub(crate) fn flow(&self, arc: usize) -> Q {
        self.cap[arc + 1]
    }

    /// Shortest augmenting paths in BFS order, so results depend only on insertion order.
    pub(crate) fn max_flow(&mut self, source: usize, sink: usize, limit: Option<Q>) -> Q {
        let mut total = Q::zero();
        if source == sink {
            return total;
        }
        let n = self.adj.len();
        loop {
            if let Some(limit) = limit {
                if total >= limit {
                    break;
                }
            }
            let mut prev: Vec<Option<usize>> = vec![None; n];
            let mut seen = vec![false; n];
            seen[source] = true;
            let mut queue = VecDeque::from([source]);
            'bfs: while let Some(v) = queue.pop_front() {
                for &arc in &self.adj[v] {
                    let w = self.to[arc];
                    if !seen[w] && self.cap[arc].is_positive() {
                        seen[w] = true;
                        prev[w] = Some(arc);
                        if w == sink {
                            break 'bfs;
                        }
                        queue.push_back(w);
                    }
                }
            }
            if !seen[sink] {
                break;
            }
            let mut bottleneck: Option<Q> = limit.map(|l| l - total);
            let mut v = sink;
            while let Some(arc) = prev[v] {
                let c = self.cap[arc];
                bottleneck = Some(match bottleneck {
                    Some(b) if b < c => b,
                    _ => c,
                });
                v = self.to[arc ^ 1];
            }
            let delta = bottleneck.unwrap_or_else(Q::zero);
            let mut v = sink;
            while let Some(arc) = prev[v] {
                self.cap[arc] -= delta;
                self.cap[arc ^ 1] += delta;
                v = self.to[arc ^ 1];
            }
            total += delta;
        }
        total
    }
}

/// A feasible circulation via the lower-bound reduction to one max-flow with
/// a super-source and super-sink.
pub fn feasible_circulation(net: &ConstrainedNetwork) -> Result<Circulation> {
    let n = net.vertex_count();
    let (source, sink) = (n, n + 1);
    let mut problem = FlowProblem::new(n + 2);
    let mut excess = vec![Q::zero(); n];
    let mut arcs = Vec::with_capacity(net.edge_count());
    for (i, e) in net.graph.edges().iter().enumerate() {
        let (lo, hi) = (net.lower[i], net.upper[i]);
        arcs.push(problem.add_edge(e.tail, e.head, hi - lo));
        excess[e.head] += lo;
        excess[e.tail] -= lo;
    }
    let mut required = Q::zero();
    for (v, ex) in excess.iter().enumerate() {
        if ex.is_positive() {
            problem.add_edge(source, v, *ex);
            required += ex;
        } else if ex.is_negative() {
            problem.add_edge(v, sink, -ex);
        }
    }
    let pushed = problem.max_flow(source, sink, None);
    if pushed != required {
        return Err(Error::Infeasible);
    }
    Ok(Circulation(
        arcs.iter()
            .enumerate()
            .map(|(i, &arc)| net.lower[i] + problem.flow(arc))
            .collect(),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ArcDirection {
    Forward,
    Backward,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResidualArc {
    pub from: usize,
    pub to: usize,
    pub edge: usize,
    pub direction: ArcDirection,
    pub slack: Q,
}

/// Directions in which `z` can be perturbed without leaving the bounds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResidualGraph {
    pub vertex_count: usize,
    pub arcs: Vec<ResidualArc>,
}

impl ResidualGraph {
    fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.vertex_count];
        for (i, a) in self.arcs.iter().enumerate() {
            adj[a.from].push(i);
        }
        adj
    }

    /// Shortest arc path from `from` to `to` avoiding arcs of `excluded_edge`.
    pub fn path(&self, from: usize, to: usize, excluded_edge: Option<usize>) -> Option<Vec<usize>> {
        let adj = self.adjacency();
        let mut prev: Vec<Option<usize>> = vec![None; self.vertex_count];
        let mut seen = vec![false; self.vertex_count];
        seen[from] = true;
        let mut queue = VecDeque::from([from]);
        while let Some(v) = queue.pop_front() {
            if v == to {
                break;
            }
            for &i in &adj[v] {
                let arc = &self.arcs[i];
                if Some(arc.edge) == excluded_edge || seen[arc.to] {
                    continue;
                }
                seen[arc.to] = true;
                prev[arc.to] = Some(i);
                queue.push_back(arc.to);
            }
        }
        if !seen[to] {
            return None;
        }
        let mut path = Vec::new();
        let mut v = to;
        while v != from {
            let i = prev[v].expect("BFS tree reaches target");
            path.push(i);
            v = self.arcs[i].from;
        }
        path.reverse();
        Some(path)
    }

    /// Whether some directed cycle passes through arc `arc`.
    pub fn arc_on_cycle(&self, arc: usize) -> bool {
        let a = &self.arcs[arc];
        self.path(a.to, a.from, Some(a.edge)).is_some()
    }

    /// `+eps` on forward arcs and `-eps` on backward arcs of `cycle`.
    pub fn augment(&self, z: &mut [Q], cycle: &[usize], eps: Q) {
        for &i in cycle {
            let arc = &self.arcs[i];
            match arc.direction {
                ArcDirection::Forward => z[arc.edge] += eps,
                ArcDirection::Backward => z[arc.edge] -= eps,
            }
        }
    }
}

pub fn residual_graph(net: &ConstrainedNetwork, z: &[Q]) -> ResidualGraph {
    let mut arcs = Vec::new();
    for (i, e) in net.graph.edges().iter().enumerate() {
        let (lo, hi, v) = (net.lower[i], net.upper[i], z[i]);
        if v < hi {
            arcs.push(ResidualArc {
                from: e.tail,
                to: e.head,
                edge: i,
                direction: ArcDirection::Forward,
                slack: hi - v,
            });
        }
        if v > lo {
            arcs.push(ResidualArc {
                from: e.head,
                to: e.tail,
                edge: i,
                direction: ArcDirection::Backward,
                slack: v - lo,
            });
        }
    }
    ResidualGraph {
        vertex_count: net.vertex_count(),
        arcs,
    }
}

/// Exact `[min, max]` of `z_e` over all feasible circulations, given one feasible `z0`.
pub fn flow_range(net: &ConstrainedNetwork, z0: &[Q], e: usize) -> (Q, Q) {
    let edge = net.graph.edge(e);
    let room_up = net.upper[e] - z0[e];
    let room_down = z0[e] - net.lower[e];
    let up = if room_up.is_positive() {
        residual_flow_problem(net, z0, e).max_flow(edge.head, edge.tail, Some(room_up))
    } else {
        Q::zero()
    };
    let down = if room_down.is_positive() {
        residual_flow_problem(net, z0, e).max_flow(edge.tail, edge.head, Some(room_down))
    } else {
        Q::zero()
    };
    (z0[e] - down, z0[e] + up)
}

/// Residual capacities of `z0` with edge `skip` removed.
fn residual_flow_problem(net: &ConstrainedNetwork, z0: &[Q], skip: usize) -> FlowProblem {
    let mut p = FlowProblem::new(net.vertex_count());
    for (i, e) in net.graph.edges().iter().enumerate() {
        if i == skip {
            continue;
        }
        let fwd = net.upper[i] - z0[i];
        let bwd = z0[i] - net.lower[i];
        if fwd.is_positive() {
            p.add_edge(e.tail, e.head, fwd);
        }
        if bwd.is_positive() {
            p.add_edge(e.head, e.tail, bwd);
        }
    }
    p
}

/// Writes a nonnegative circulation as a positive combination of positive circuits.
pub fn decompose_circulation(g: &DirectedGraph, z: &[Q]) -> Result<Vec<(Q, CircuitVector)>> {
    if z.len() != g.edge_count() {
        return Err(Error::DimensionMismatch {
            expected: g.edge_count(),
            got: z.len(),
        });
    }
    if z.iter().any(Signed::is_negative) {
        return Err(Error::Decomposition("negative entry".into()));
    }
    if !g.is_circulation(z) {
        return Err(Error::Decomposition("B z != 0".into()));
    }
    let n = g.vertex_count();
    let m = g.edge_count();
    let mut rest = z.to_vec();
    let mut out_edges: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, e) in g.edges().iter().enumerate() {
        out_edges[e.tail].push(i);
    }
    let mut terms = Vec::new();
    while let Some(start_edge) = rest.iter().position(Signed::is_positive) {
        if terms.len() >= m {
            return Err(Error::Decomposition("more than m terms".into()));
        }
        // Walk positive edges until a vertex repeats; the loop closed there is a cycle.
        let mut position_of = vec![usize::MAX; n];
        let mut walk: Vec<usize> = Vec::new();
        let mut v = g.edge(start_edge).tail;
        let cycle = loop {
            position_of[v] = walk.len();
            let next = if walk.is_empty() {
                Some(start_edge)
            } else {
                out_edges[v].iter().copied().find(|&e| rest[e].is_positive())
            };
            let Some(e) = next else {
                return Err(Error::Decomposition(format!(
                    "no positive outgoing edge at vertex {}",
                    v + 1
                )));
            };
            walk.push(e);
            v = g.edge(e).head;
            if position_of[v] != usize::MAX {
                break walk.split_off(position_of[v]);
            }
        };
        let alpha = cycle
            .iter()
            .map(|&e| rest[e])
            .min()
            .expect("cycle is nonempty");
        for &e in &cycle {
            rest[e] -= alpha;
        }
        terms.push((alpha, CircuitVector::from_support(m, &cycle)));
    }
    Ok(terms)
}
