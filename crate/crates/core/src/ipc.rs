//! Interior point condition: decision by residual-cycle merging, an
//! independent range-based oracle, and the necessity counterexample.
//!
//! The condition holds when some feasible circulation `z` is strictly inside
//! its bounds on a set of edges that, ignoring orientation, connects every
//! vertex.

use num_traits::{Signed, Zero};
use serde::Serialize;
use std::collections::VecDeque;

use crate::circulation::{feasible_circulation, flow_range, residual_graph, Circulation};
use crate::error::{Error, Result};
use crate::graph::Components;
use crate::network::ConstrainedNetwork;
use crate::rational::{q, Q};

/// Edge classes of a feasible circulation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgePartition {
    /// `z_e = 0`
    pub zero: Vec<usize>,
    /// `z_e > 0`
    pub positive: Vec<usize>,
    /// `u-_e < z_e < u+_e`
    pub interior: Vec<usize>,
    /// `z_e` at a bound; always includes fixed edges.
    pub boundary: Vec<usize>,
}

impl EdgePartition {
    pub fn interior_mask(&self, m: usize) -> Vec<bool> {
        let mut mask = vec![false; m];
        self.interior.iter().for_each(|&e| mask[e] = true);
        mask
    }
}

pub fn is_interior(net: &ConstrainedNetwork, z: &[Q], e: usize) -> bool {
    net.lower[e] < z[e] && z[e] < net.upper[e]
}

pub fn edge_partition(net: &ConstrainedNetwork, z: &[Q]) -> EdgePartition {
    let mut p = EdgePartition {
        zero: Vec::new(),
        positive: Vec::new(),
        interior: Vec::new(),
        boundary: Vec::new(),
    };
    for (e, v) in z.iter().enumerate() {
        if v.is_zero() {
            p.zero.push(e);
        } else if v.is_positive() {
            p.positive.push(e);
        }
        if is_interior(net, z, e) {
            p.interior.push(e);
        } else {
            p.boundary.push(e);
        }
    }
    p
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IpcStatus {
    Holds,
    Fails,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IpcVerdict {
    pub status: IpcStatus,
    /// Circulation whose interior edges span the graph (status `Holds`).
    pub witness: Option<Circulation>,
    /// Terminal circulation of the merging loop (status `Fails`).
    pub final_z: Option<Circulation>,
    /// Weak components of the interior edges of the terminal circulation.
    pub reduced_components: Option<Components>,
    pub augmentations: usize,
}

impl IpcVerdict {
    fn infeasible() -> Self {
        Self {
            status: IpcStatus::Infeasible,
            witness: None,
            final_z: None,
            reduced_components: None,
            augmentations: 0,
        }
    }

    /// The terminal circulation regardless of status.
    pub fn terminal(&self) -> Option<&Circulation> {
        self.witness.as_ref().or(self.final_z.as_ref())
    }
}

fn check_preconditions(net: &ConstrainedNetwork) -> Result<()> {
    net.ensure_compatible()?;
    if !net.graph.is_weakly_connected() {
        return Err(Error::NotWeaklyConnected);
    }
    Ok(())
}

/// Decides the condition starting from the max-flow feasible circulation.
pub fn check_ipc(net: &ConstrainedNetwork) -> Result<IpcVerdict> {
    check_preconditions(net)?;
    match feasible_circulation(net) {
        Ok(z0) => Ok(merge_from(net, z0.0)),
        Err(Error::Infeasible) => Ok(IpcVerdict::infeasible()),
        Err(e) => Err(e),
    }
}

/// Same decision from a caller-supplied feasible starting circulation.
pub fn check_ipc_from(net: &ConstrainedNetwork, z0: &[Q]) -> Result<IpcVerdict> {
    check_preconditions(net)?;
    if !net.is_feasible_circulation(z0) {
        return Err(Error::NotFeasible("starting point violates bounds or B z = 0".into()));
    }
    Ok(merge_from(net, z0.to_vec()))
}

/// Repeatedly augments along a residual cycle through an arc of a saturated,
/// non-fixed edge by half the cycle's minimum slack. Every augmentation moves
/// at least one boundary edge strictly inside and keeps interior edges
/// interior, so the loop runs at most `m` times.
fn merge_from(net: &ConstrainedNetwork, mut z: Vec<Q>) -> IpcVerdict {
    let m = net.edge_count();
    let half = Q::new(1, 2);
    let mut augmentations = 0;
    loop {
        let residual = residual_graph(net, &z);
        let cycle = residual.arcs.iter().enumerate().find_map(|(i, arc)| {
            let e = arc.edge;
            if net.is_fixed(e) || is_interior(net, &z, e) {
                return None;
            }
            residual.path(arc.to, arc.from, Some(e)).map(|mut path| {
                path.insert(0, i);
                path
            })
        });
        let Some(cycle) = cycle else { break };
        let eps = cycle
            .iter()
            .map(|&i| residual.arcs[i].slack)
            .min()
            .expect("cycle is nonempty")
            * half;
        residual.augment(&mut z, &cycle, eps);
        augmentations += 1;
        debug_assert!(augmentations <= m);
    }
    let mask = edge_partition(net, &z).interior_mask(m);
    let components = net.graph.weakly_connected_components(&mask);
    let holds = components.count() == 1;
    let z = Circulation(z);
    IpcVerdict {
        status: if holds { IpcStatus::Holds } else { IpcStatus::Fails },
        witness: holds.then(|| z.clone()),
        final_z: (!holds).then_some(z),
        reduced_components: Some(components),
        augmentations,
    }
}

/// Edges that are strictly interior for at least one feasible circulation.
pub fn interior_capable_edges(net: &ConstrainedNetwork, z0: &[Q]) -> Vec<bool> {
    (0..net.edge_count())
        .map(|e| {
            if net.is_fixed(e) {
                return false;
            }
            let (lo, hi) = flow_range(net, z0, e);
            lo < net.upper[e] && hi > net.lower[e]
        })
        .collect()
}

/// Independent decision: by convexity, averaging circulations that are
/// interior on single edges is interior on all of them, so the condition
/// holds iff the interior-capable edges span the graph.
pub fn check_ipc_oracle(net: &ConstrainedNetwork) -> Result<bool> {
    check_preconditions(net)?;
    let z0 = feasible_circulation(net)?;
    Ok(net
        .graph
        .contains_spanning_tree(&interior_capable_edges(net, &z0)))
}

/// Initial data for which the saturated loop is frozen away from consensus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Counterexample {
    /// Vertex state for `H(x) = |x|^2 / 2`; equal to the gradient levels.
    pub x0: Vec<Q>,
    /// `-z*`
    pub xc0: Vec<Q>,
    /// Level of each reduced component.
    pub levels: Vec<i64>,
    pub components: Components,
}

impl Counterexample {
    /// Vertex state realizing the same gradient for `H(x) = sum q_i x_i^2 / 2`.
    pub fn x0_for_weights(&self, weights: &[Q]) -> Vec<Q> {
        self.x0.iter().zip(weights).map(|(x, w)| x / w).collect()
    }
}

/// Orders the reduced components so that every saturated edge between two
/// of them is pushed further into saturation: a lower-bound edge `J -> I`
/// needs a higher gradient on `I`, an upper-bound edge `J -> I` a higher one
/// on `J`. Levels are longest-path depths in that order.
pub fn build_counterexample(net: &ConstrainedNetwork, verdict: &IpcVerdict) -> Result<Counterexample> {
    if verdict.status != IpcStatus::Fails {
        return Err(Error::NotApplicable);
    }
    let z = verdict.final_z.as_ref().ok_or(Error::NotApplicable)?;
    let components = verdict
        .reduced_components
        .clone()
        .ok_or(Error::NotApplicable)?;
    let k = components.count();

    // above[c] lists components that must sit strictly above c.
    let mut above: Vec<Vec<usize>> = vec![Vec::new(); k];
    let mut indegree = vec![0usize; k];
    let mut any_arc = false;
    for (e, edge) in net.graph.edges().iter().enumerate() {
        if net.is_fixed(e) || is_interior(net, z, e) {
            continue;
        }
        let (j, i) = (components.label(edge.tail), components.label(edge.head));
        if i == j {
            continue;
        }
        let (low, high) = if z[e] == net.lower[e] { (j, i) } else { (i, j) };
        if !above[low].contains(&high) {
            above[low].push(high);
            indegree[high] += 1;
            any_arc = true;
        }
    }

    let mut levels = vec![0i64; k];
    let mut queue: VecDeque<usize> = (0..k).filter(|&c| indegree[c] == 0).collect();
    let mut visited = 0;
    while let Some(c) = queue.pop_front() {
        visited += 1;
        for &h in &above[c] {
            levels[h] = levels[h].max(levels[c] + 1);
            indegree[h] -= 1;
            if indegree[h] == 0 {
                queue.push_back(h);
            }
        }
    }
    if visited != k {
        return Err(Error::Decomposition(
            "component order has a cycle; merging loop did not terminate at a fixed point".into(),
        ));
    }
    if !any_arc {
        // Only fixed edges join the components; any distinct levels freeze.
        levels = (0..k as i64).collect();
    }

    let x0 = (0..net.vertex_count())
        .map(|v| q(levels[components.label(v)] as i128))
        .collect();
    Ok(Counterexample {
        x0,
        xc0: z.iter().map(|v| -v).collect(),
        levels,
        components,
    })
}
