//! Test corpora: exhaustive small networks and seeded random generators.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::circulation::residual_graph;
use crate::error::Error;
use crate::graph::DirectedGraph;
use crate::ipc::{check_ipc, check_ipc_oracle, IpcStatus};
use crate::network::{ConstrainedNetwork, Terminal, Terminals};
use crate::rational::{q, qf, Q};
use crate::report::SweepCounts;

/// Weakly connected simple digraphs (no loops, no parallel arcs in the same
/// direction) on `n` vertices with at most `max_m` arcs, one per isomorphism
/// class. Arcs are listed in lexicographic order of the canonical labelling.
pub fn small_digraphs(n: usize, max_m: usize) -> Vec<DirectedGraph> {
    assert!((1..=5).contains(&n), "exhaustive enumeration supports 1..=5 vertices");
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|a| (0..n).filter(move |&b| b != a).map(move |b| (a, b)))
        .collect();
    let perms = permutations(n);
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    let p = pairs.len();
    for mask in 0u32..(1u32 << p) {
        if mask.count_ones() as usize > max_m {
            continue;
        }
        let arcs: Vec<(usize, usize)> = (0..p).filter(|i| mask >> i & 1 == 1).map(|i| pairs[i]).collect();
        let canonical = perms
            .iter()
            .map(|perm| {
                let mut relabelled: Vec<(usize, usize)> = arcs.iter().map(|&(a, b)| (perm[a], perm[b])).collect();
                relabelled.sort_unstable();
                relabelled
            })
            .min()
            .unwrap_or_default();
        if !seen.insert(canonical.clone()) {
            continue;
        }
        let g = DirectedGraph::new(n, canonical).expect("enumerated arcs are valid");
        if g.is_weakly_connected() {
            out.push(g);
        }
    }
    out.sort_by_key(|g| g.edge_count());
    out
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn extend(prefix: &mut Vec<usize>, n: usize, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == n {
            out.push(prefix.clone());
            return;
        }
        for v in 0..n {
            if !prefix.contains(&v) {
                prefix.push(v);
                extend(prefix, n, out);
                prefix.pop();
            }
        }
    }
    let mut out = Vec::new();
    extend(&mut Vec::with_capacity(n), n, &mut out);
    out
}

/// Compatible integer intervals `[lo, hi]` with `0 <= lo <= hi <= max`,
/// excluding `[0, 0]`.
pub fn compatible_intervals(max: i128) -> Vec<(Q, Q)> {
    let mut out = Vec::new();
    for lo in 0..=max {
        for hi in lo..=max {
            if hi > 0 {
                out.push((q(lo), q(hi)));
            }
        }
    }
    out
}

/// Every assignment of `intervals` to the edges of `g`, in mixed-radix order
/// with edge 1 varying fastest.
pub struct IntervalAssignments<'a> {
    graph: &'a DirectedGraph,
    intervals: &'a [(Q, Q)],
    digits: Vec<usize>,
    done: bool,
}

impl<'a> IntervalAssignments<'a> {
    pub fn new(graph: &'a DirectedGraph, intervals: &'a [(Q, Q)]) -> Self {
        Self {
            graph,
            intervals,
            digits: vec![0; graph.edge_count()],
            done: intervals.is_empty() && graph.edge_count() > 0,
        }
    }
}

impl Iterator for IntervalAssignments<'_> {
    type Item = ConstrainedNetwork;

    fn next(&mut self) -> Option<ConstrainedNetwork> {
        if self.done {
            return None;
        }
        let lower = self.digits.iter().map(|&d| self.intervals[d].0).collect();
        let upper = self.digits.iter().map(|&d| self.intervals[d].1).collect();
        let net = ConstrainedNetwork::new(self.graph.clone(), lower, upper).expect("intervals are ordered");
        self.done = true;
        for d in self.digits.iter_mut() {
            *d += 1;
            if *d < self.intervals.len() {
                self.done = false;
                break;
            }
            *d = 0;
        }
        Some(net)
    }
}

/// Tallies one network into `counts`, comparing the merging algorithm with
/// the flow-range oracle.
pub fn tally(net: &ConstrainedNetwork, counts: &mut SweepCounts) -> crate::error::Result<()> {
    let verdict = check_ipc(net)?;
    let oracle = check_ipc_oracle(net);
    counts.instances += 1;
    let agree = match (verdict.status, &oracle) {
        (IpcStatus::Infeasible, Err(Error::Infeasible)) => true,
        (IpcStatus::Holds, Ok(true)) | (IpcStatus::Fails, Ok(false)) => true,
        (_, Err(e)) if !matches!(e, Error::Infeasible) => return Err(e.clone()),
        _ => false,
    };
    counts.mismatches += u64::from(!agree);
    match verdict.status {
        IpcStatus::Infeasible => counts.infeasible += 1,
        IpcStatus::Fails => counts.fails += 1,
        IpcStatus::Holds => {
            counts.holds += 1;
            counts.holds_not_strongly_connected += u64::from(!net.graph.is_strongly_connected());
        }
    }
    Ok(())
}

/// Algorithm-versus-oracle counts over every weakly connected simple digraph
/// with `1..=max_n` vertices and at most `max_m` arcs, under every
/// assignment of compatible integer intervals with endpoints up to `max_bound`.
pub fn exhaustive_sweep(max_n: usize, max_m: usize, max_bound: i128) -> SweepCounts {
    let intervals = compatible_intervals(max_bound);
    let mut counts = SweepCounts::default();
    for n in 1..=max_n {
        for g in small_digraphs(n, max_m) {
            for net in IntervalAssignments::new(&g, &intervals) {
                tally(&net, &mut counts).expect("corpus networks are compatible and connected");
            }
        }
    }
    counts
}

/// Strongly connected simple digraph: a random Hamiltonian cycle plus
/// `extra` further random arcs (fewer if the graph fills up).
pub fn random_strongly_connected<R: Rng>(rng: &mut R, n: usize, extra: usize) -> DirectedGraph {
    assert!(n >= 2, "a strongly connected digraph with arcs needs two vertices");
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut arcs: Vec<(usize, usize)> = (0..n).map(|i| (order[i], order[(i + 1) % n])).collect();
    if n == 2 {
        arcs.truncate(2);
    }
    let mut present: BTreeSet<(usize, usize)> = arcs.iter().copied().collect();
    let capacity = n * (n - 1);
    let target = (arcs.len() + extra).min(capacity);
    while arcs.len() < target {
        let a = rng.gen_range(0..n);
        let b = rng.gen_range(0..n);
        if a != b && present.insert((a, b)) {
            arcs.push((a, b));
        }
    }
    arcs.shuffle(rng);
    DirectedGraph::new(n, arcs).expect("arcs are valid")
}

/// Weakly connected simple digraph: a random spanning tree with random arc
/// directions plus `extra` further arcs.
pub fn random_weakly_connected<R: Rng>(rng: &mut R, n: usize, extra: usize) -> DirectedGraph {
    let mut arcs = Vec::new();
    let mut present = BTreeSet::new();
    for v in 1..n {
        let u = rng.gen_range(0..v);
        let arc = if rng.gen_bool(0.5) { (u, v) } else { (v, u) };
        present.insert(arc);
        arcs.push(arc);
    }
    let target = (arcs.len() + extra).min(n * n.saturating_sub(1));
    while arcs.len() < target {
        let a = rng.gen_range(0..n);
        let b = rng.gen_range(0..n);
        if a != b && present.insert((a, b)) {
            arcs.push((a, b));
        }
    }
    arcs.shuffle(rng);
    DirectedGraph::new(n, arcs).expect("arcs are valid")
}

fn random_quarter<R: Rng>(rng: &mut R, lo: i128, hi: i128) -> Q {
    qf(rng.gen_range(lo..=hi), 4)
}

/// Compatible bounds in quarter units: lower in `[0, 1]`, width in `(0, 2]`.
pub fn random_compatible_bounds<R: Rng>(rng: &mut R, m: usize) -> (Vec<Q>, Vec<Q>) {
    (0..m)
        .map(|_| {
            let lo = if rng.gen_bool(0.5) { q(0) } else { random_quarter(rng, 0, 4) };
            (lo, lo + random_quarter(rng, 1, 8))
        })
        .unzip()
}

/// A network on `2..=max_n` vertices for which the interior point condition
/// holds, drawn by rejection.
pub fn random_holds_network<R: Rng>(rng: &mut R, max_n: usize) -> ConstrainedNetwork {
    loop {
        let n = rng.gen_range(2..=max_n);
        let extra = rng.gen_range(n / 2..=n + 2);
        let g = random_strongly_connected(rng, n, extra);
        let (lower, upper) = random_compatible_bounds(rng, g.edge_count());
        let net = ConstrainedNetwork::new(g, lower, upper).expect("bounds are ordered");
        if matches!(check_ipc(&net).map(|v| v.status), Ok(IpcStatus::Holds)) {
            return net;
        }
    }
}

/// A feasible compatible network on `2..=max_n` vertices, drawn by rejection.
pub fn random_feasible_network<R: Rng>(rng: &mut R, max_n: usize) -> ConstrainedNetwork {
    loop {
        let n = rng.gen_range(2..=max_n);
        let extra = rng.gen_range(0..=n + 2);
        let g = if rng.gen_bool(0.5) {
            random_strongly_connected(rng, n, extra)
        } else {
            random_weakly_connected(rng, n, extra)
        };
        let (lower, upper) = random_compatible_bounds(rng, g.edge_count());
        let net = ConstrainedNetwork::new(g, lower, upper).expect("bounds are ordered");
        if crate::circulation::feasible_circulation(&net).is_ok() {
            return net;
        }
    }
}

/// Weakly connected network with arbitrary-sign bounds and balanced terminals
/// (`1^T E d = 0`).
pub fn random_disturbed_network<R: Rng>(rng: &mut R, max_n: usize) -> ConstrainedNetwork {
    let n = rng.gen_range(2..=max_n);
    let extra = rng.gen_range(0..=n);
    let g = random_weakly_connected(rng, n, extra);
    let (lower, upper): (Vec<Q>, Vec<Q>) = (0..g.edge_count())
        .map(|_| {
            let lo = random_quarter(rng, -6, 2);
            (lo, lo + random_quarter(rng, 1, 8))
        })
        .unzip();
    let count = rng.gen_range(1..=3);
    let mut columns = Vec::new();
    let mut balance = Q::from_integer(0);
    for _ in 0..count {
        let vertex = rng.gen_range(0..n);
        let sign = if rng.gen_bool(0.5) { 1 } else { -1 };
        let flow = random_quarter(rng, 1, 4);
        balance += flow * Q::from_integer(sign.into());
        columns.push(Terminal { vertex, sign, flow });
    }
    let fix = (0..n).find(|v| columns.iter().all(|c| c.vertex != *v)).unwrap_or(0);
    if balance != Q::from_integer(0) {
        let sign: i8 = if balance > Q::from_integer(0) { -1 } else { 1 };
        columns.push(Terminal {
            vertex: fix,
            sign,
            flow: if balance > Q::from_integer(0) { balance } else { -balance },
        });
    }
    ConstrainedNetwork::with_terminals(g, lower, upper, Some(Terminals { columns }))
        .expect("generated network is valid")
}

/// A different feasible circulation: augment `z` along random residual cycles
/// by random fractions of their bottleneck.
pub fn random_walk_circulation<R: Rng>(rng: &mut R, net: &ConstrainedNetwork, z: &[Q], moves: usize) -> Vec<Q> {
    let mut z = z.to_vec();
    for _ in 0..moves {
        let residual = residual_graph(net, &z);
        if residual.arcs.is_empty() {
            break;
        }
        let start = rng.gen_range(0..residual.arcs.len());
        let arc = &residual.arcs[start];
        let Some(path) = residual.path(arc.to, arc.from, Some(arc.edge)) else {
            continue;
        };
        let mut cycle = vec![start];
        cycle.extend(path);
        let bottleneck = cycle
            .iter()
            .map(|&i| residual.arcs[i].slack)
            .min()
            .expect("cycle is nonempty");
        let fraction = qf(rng.gen_range(1..=4), 4);
        residual.augment(&mut z, &cycle, bottleneck * fraction);
    }
    z
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn digraph_class_counts() {
        // Weakly connected digraphs by vertex count (all arc counts): 1, 2, 13, 199.
        assert_eq!(small_digraphs(1, 0).len(), 1);
        assert_eq!(small_digraphs(2, 2).len(), 2);
        assert_eq!(small_digraphs(3, 6).len(), 13);
        assert_eq!(small_digraphs(4, 12).len(), 199);
    }

    #[test]
    fn small_sweep_agrees() {
        let counts = exhaustive_sweep(3, 3, 2);
        assert_eq!(counts.mismatches, 0);
        assert_eq!(counts.holds_not_strongly_connected, 0);
        assert_eq!(counts.instances, counts.infeasible + counts.holds + counts.fails);
        assert!(counts.holds > 0 && counts.fails > 0 && counts.infeasible > 0);
    }

    #[test]
    fn interval_count() {
        assert_eq!(compatible_intervals(3).len(), 9);
        let g = DirectedGraph::new(2, vec![(0, 1), (1, 0)]).unwrap();
        let iv = compatible_intervals(3);
        assert_eq!(IntervalAssignments::new(&g, &iv).count(), 81);
        let empty = DirectedGraph::new(1, vec![]).unwrap();
        assert_eq!(IntervalAssignments::new(&empty, &iv).count(), 1);
    }

    #[test]
    fn generators_meet_their_contracts() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let g = random_strongly_connected(&mut rng, 5, 3);
            assert!(g.is_strongly_connected());
            let net = random_disturbed_network(&mut rng, 5);
            let inj = net.terminals.as_ref().unwrap().injection(net.vertex_count());
            assert_eq!(inj.iter().sum::<Q>(), q(0));
            let net = random_feasible_network(&mut rng, 5);
            let z0 = crate::circulation::feasible_circulation(&net).unwrap();
            let z = random_walk_circulation(&mut rng, &net, &z0, 3);
            assert!(net.is_feasible_circulation(&z));
        }
    }
}
