//! JSON reports. Field order is fixed by the struct definitions, rationals
//! are written as strings, and edge and vertex ids are 1-based.

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::graph::{CircuitVector, Components};
use crate::ipc::{edge_partition, Counterexample, IpcStatus, IpcVerdict};
use crate::network::{ConstrainedNetwork, EdgeMap, Piece};
use crate::rational::{format_vec, Q};
use crate::sim::{Convergence, SimConfig, StepStats, Trajectory, VerificationReport};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    /// SHA-256 of the input file bytes.
    pub input_sha256: Option<String>,
    pub config: Option<SimConfig>,
    pub seed: Option<u64>,
}

impl Provenance {
    pub fn new(command: &str, input: Option<&[u8]>) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            input_sha256: input.map(sha256_hex),
            config: None,
            seed: None,
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn one_based(ids: &[usize]) -> Vec<usize> {
    ids.iter().map(|i| i + 1).collect()
}

fn groups(components: &Components) -> Vec<Vec<usize>> {
    components.groups().iter().map(|g| one_based(g)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartitionReport {
    pub zero: Vec<usize>,
    pub positive: Vec<usize>,
    pub interior: Vec<usize>,
    pub boundary: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdgeMapEntryReport {
    pub original: usize,
    pub sign: i8,
    pub piece: Piece,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdgeMapReport {
    pub original_edge_count: usize,
    pub entries: Vec<EdgeMapEntryReport>,
    pub shift: Vec<String>,
    pub deleted: Vec<usize>,
}

impl From<&EdgeMap> for EdgeMapReport {
    fn from(map: &EdgeMap) -> Self {
        Self {
            original_edge_count: map.original_edge_count,
            entries: map
                .entries
                .iter()
                .map(|e| EdgeMapEntryReport {
                    original: e.original + 1,
                    sign: e.sign,
                    piece: e.piece,
                })
                .collect(),
            shift: format_vec(&map.shift),
            deleted: one_based(&map.deleted),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IpcReport {
    pub provenance: Provenance,
    pub status: IpcStatus,
    /// Present when the input was not compatible and was normalized first;
    /// all edge ids below then refer to the normalized network.
    pub edge_map: Option<EdgeMapReport>,
    pub witness: Option<Vec<String>>,
    pub final_z: Option<Vec<String>>,
    pub partition: Option<PartitionReport>,
    pub components: Option<Vec<Vec<usize>>>,
    pub augmentations: usize,
    pub strongly_connected: bool,
}

impl IpcReport {
    pub fn new(provenance: Provenance, net: &ConstrainedNetwork, verdict: &IpcVerdict, map: Option<&EdgeMap>) -> Self {
        let partition = verdict.terminal().map(|z| {
            let p = edge_partition(net, z);
            PartitionReport {
                zero: one_based(&p.zero),
                positive: one_based(&p.positive),
                interior: one_based(&p.interior),
                boundary: one_based(&p.boundary),
            }
        });
        Self {
            provenance,
            status: verdict.status,
            edge_map: map.map(EdgeMapReport::from),
            witness: verdict.witness.as_ref().map(|z| format_vec(z)),
            final_z: verdict.final_z.as_ref().map(|z| format_vec(z)),
            partition,
            components: verdict.reduced_components.as_ref().map(groups),
            augmentations: verdict.augmentations,
            strongly_connected: net.graph.is_strongly_connected(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormalizeReport {
    pub provenance: Provenance,
    pub edge_map: EdgeMapReport,
    pub identity: bool,
    /// The normalized network in file format.
    pub network: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecompositionTerm {
    pub alpha: String,
    pub circuit: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CircuitsReport {
    pub provenance: Provenance,
    /// Edge supports of the positive circuits.
    pub circuits: Vec<Vec<usize>>,
    pub decomposition: Option<Vec<DecompositionTerm>>,
}

impl CircuitsReport {
    pub fn new(provenance: Provenance, circuits: &[CircuitVector], decomposition: Option<&[(Q, CircuitVector)]>) -> Self {
        Self {
            provenance,
            circuits: circuits.iter().map(|c| one_based(&c.support())).collect(),
            decomposition: decomposition.map(|terms| {
                terms
                    .iter()
                    .map(|(alpha, c)| DecompositionTerm {
                        alpha: crate::rational::format_rational(alpha),
                        circuit: one_based(&c.support()),
                    })
                    .collect()
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FinalState {
    pub t: f64,
    pub x: Vec<f64>,
    pub xc: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationReport {
    pub provenance: Provenance,
    pub mode: &'static str,
    pub samples: usize,
    pub final_state: FinalState,
    pub stats: StepStats,
    pub verification: VerificationReport,
    pub convergence: Convergence,
}

impl SimulationReport {
    pub fn new(
        provenance: Provenance,
        traj: &Trajectory,
        verification: VerificationReport,
        convergence: Convergence,
    ) -> Self {
        let last = traj.last();
        Self {
            provenance,
            mode: match traj.mode {
                crate::dynamics::Mode::Consensus => "consensus",
                crate::dynamics::Mode::Disturbed => "disturbed",
                crate::dynamics::Mode::Steering(_) => "steering",
            },
            samples: traj.samples.len(),
            final_state: FinalState {
                t: last.t,
                x: last.x.clone(),
                xc: last.xc.clone(),
            },
            stats: traj.stats.clone(),
            verification,
            convergence,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FreezeCheck {
    pub horizon: f64,
    pub max_dx_norm: f64,
    pub min_disagreement: f64,
    pub frozen: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CounterexampleReport {
    pub provenance: Provenance,
    pub final_z: Vec<String>,
    pub components: Vec<Vec<usize>>,
    pub levels: Vec<i64>,
    pub x0: Vec<String>,
    pub xc0: Vec<String>,
    pub freeze: FreezeCheck,
    /// The input network with the counterexample as `[initial]` data.
    pub network: String,
}

impl CounterexampleReport {
    pub fn new(
        provenance: Provenance,
        z: &[Q],
        cx: &Counterexample,
        x0: &[Q],
        freeze: FreezeCheck,
        network: String,
    ) -> Self {
        Self {
            provenance,
            final_z: format_vec(z),
            components: groups(&cx.components),
            levels: cx.levels.clone(),
            x0: format_vec(x0),
            xc0: format_vec(&cx.xc0),
            freeze,
            network,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SweepCounts {
    pub instances: u64,
    pub infeasible: u64,
    pub holds: u64,
    pub fails: u64,
    pub mismatches: u64,
    pub holds_not_strongly_connected: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub provenance: Provenance,
    pub max_vertices: usize,
    pub max_edges: usize,
    pub max_bound: i128,
    pub exhaustive: SweepCounts,
    /// Additional seeded random networks, when requested.
    pub random: Option<SweepCounts>,
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(report: &T) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("reports serialize");
    s.push('\n');
    s
}
