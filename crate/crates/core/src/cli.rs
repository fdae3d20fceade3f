//! Command-line front end.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::circulation::decompose_circulation;
use crate::corpus::{exhaustive_sweep, random_feasible_network, tally};
use crate::dynamics::{AdmissibleTarget, FlowModel, Mode, Quadratic, SimState};
use crate::error::{Error, Result};
use crate::io::{parse_network, serialize_network, write_trajectory_csv, NetworkSpec};
use crate::ipc::{build_counterexample, check_ipc, IpcStatus};
use crate::network::{normalize, ConstrainedNetwork, EdgeMap};
use crate::rational::{parse_rational, vec_to_f64, Q};
use crate::report::{
    to_json, CircuitsReport, CounterexampleReport, FreezeCheck, IpcReport, NormalizeReport, Provenance,
    SimulationReport, SweepCounts, SweepReport,
};
use crate::sim::{detect_convergence, integrate, verify_trajectory, SimConfig};

pub const EXIT_OK: u8 = 0;
pub const EXIT_ERROR: u8 = 1;
pub const EXIT_FAILS: u8 = 2;
pub const EXIT_INFEASIBLE: u8 = 3;

/// Freeze threshold for `counterexample`: `||dx||_inf` above this is motion.
const FREEZE_TOL: f64 = 1e-12;

#[derive(Debug, Parser)]
#[command(name = "flownet", version, about = "Interior point condition and saturated PI simulation for flow networks")]
pub struct Cli {
    #[command(flatten)]
    pub options: GlobalOptions,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalOptions {
    /// TOML file with simulation settings (step, horizon, convergence_tol, dwell, record_every).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Integration step.
    #[arg(long, global = true)]
    pub step: Option<f64>,
    /// Simulation horizon T.
    #[arg(long, global = true)]
    pub horizon: Option<f64>,
    /// Convergence tolerance.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Directory for report.json and other artifacts; reports go to stdout otherwise.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed for randomized runs.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Absorb terminals, split bidirectional edges and reorient.
    Normalize { network: PathBuf },
    /// Decide the interior point condition (exit 0 holds, 2 fails, 3 infeasible).
    CheckIpc { network: PathBuf },
    /// List positive circuits and optionally decompose a circulation.
    Circuits {
        network: PathBuf,
        /// Nonnegative circulation to decompose, e.g. "1/2,1/2,1/2".
        #[arg(long)]
        flow: Option<String>,
    },
    /// Simulate the closed loop from the file's initial data.
    Simulate { network: PathBuf },
    /// Steer to the file's target (or --target).
    Steer {
        network: PathBuf,
        #[arg(long)]
        target: Option<String>,
    },
    /// Build and check frozen initial data for a failing network.
    Counterexample { network: PathBuf },
    /// Exhaustive algorithm-versus-oracle agreement on small networks.
    Sweep {
        #[arg(long, default_value_t = 4)]
        max_vertices: usize,
        #[arg(long, default_value_t = 6)]
        max_edges: usize,
        #[arg(long, default_value_t = 3)]
        max_bound: i128,
        /// Also check this many seeded random networks.
        #[arg(long)]
        random: Option<usize>,
    },
}

pub struct Outcome {
    pub code: u8,
}

/// Parses a whitespace- or comma-separated list of rationals.
pub fn parse_vector(text: &str) -> Result<Vec<Q>> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| parse_rational(s).map_err(|e| Error::InvalidConfig(e.to_string())))
        .collect()
}

fn load(path: &Path) -> Result<(Vec<u8>, NetworkSpec)> {
    let bytes = fs::read(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let text = std::str::from_utf8(&bytes)
        .map_err(|_| Error::Io(format!("{}: not valid UTF-8", path.display())))?;
    let spec = parse_network(text)?;
    Ok((bytes, spec))
}

fn sim_config(options: &GlobalOptions) -> Result<SimConfig> {
    let mut config = match &options.config {
        Some(path) => {
            let text =
                fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            toml::from_str(&text).map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?
        }
        None => SimConfig::default(),
    };
    if let Some(step) = options.step {
        config.step = step;
    }
    if let Some(horizon) = options.horizon {
        config.horizon = horizon;
    }
    if let Some(tol) = options.tol {
        config.convergence_tol = tol;
    }
    config.validate()?;
    Ok(config)
}

struct Sink<'a> {
    out: Option<&'a Path>,
}

impl Sink<'_> {
    fn report(&self, json: &str) -> Result<()> {
        match self.out {
            Some(_) => self.file("report.json", json.as_bytes()),
            None => {
                print!("{json}");
                Ok(())
            }
        }
    }

    fn file(&self, name: &str, bytes: &[u8]) -> Result<()> {
        let Some(dir) = self.out else { return Ok(()) };
        fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
        let path = dir.join(name);
        fs::write(&path, bytes).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
    }
}

/// The compatible network the decision procedures run on.
fn compatible(net: &ConstrainedNetwork) -> Result<(ConstrainedNetwork, Option<EdgeMap>)> {
    if net.is_compatible() {
        Ok((net.clone(), None))
    } else {
        let (normalized, map) = normalize(net)?;
        Ok((normalized, Some(map)))
    }
}

fn hamiltonian(spec: &NetworkSpec) -> Result<Quadratic> {
    match &spec.weights {
        Some(w) => Quadratic::new(w.clone()),
        None => Ok(Quadratic::unit(spec.network.vertex_count())),
    }
}

fn initial_state(spec: &NetworkSpec) -> Result<SimState> {
    let x0 = spec
        .x0
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("network file has no `x0` in [initial]".into()))?;
    let xc0 = spec
        .xc0
        .clone()
        .unwrap_or_else(|| vec![Q::from_integer(0); spec.network.edge_count()]);
    Ok(SimState::new(vec_to_f64(x0), vec_to_f64(&xc0)))
}

pub fn run(cli: Cli) -> Result<Outcome> {
    let options = &cli.options;
    let sink = Sink {
        out: options.out.as_deref(),
    };
    match &cli.command {
        Command::Normalize { network } => {
            let (bytes, spec) = load(network)?;
            let (normalized, map) = normalize(&spec.network)?;
            // Vertices are unchanged, so vertex data carries over; xc0 does not.
            let text = serialize_network(&NetworkSpec {
                vertex_names: spec.vertex_names.clone(),
                x0: spec.x0.clone(),
                target: spec.target.clone(),
                weights: spec.weights.clone(),
                ..NetworkSpec::bare(normalized)
            });
            let report = NormalizeReport {
                provenance: Provenance::new("normalize", Some(&bytes)),
                edge_map: (&map).into(),
                identity: map.is_identity(),
                network: text.clone(),
            };
            sink.file("normalized.net", text.as_bytes())?;
            sink.report(&to_json(&report))?;
            Ok(Outcome { code: EXIT_OK })
        }
        Command::CheckIpc { network } => {
            let (bytes, spec) = load(network)?;
            let (net, map) = compatible(&spec.network)?;
            let verdict = check_ipc(&net)?;
            let report = IpcReport::new(Provenance::new("check-ipc", Some(&bytes)), &net, &verdict, map.as_ref());
            sink.report(&to_json(&report))?;
            Ok(Outcome {
                code: match verdict.status {
                    IpcStatus::Holds => EXIT_OK,
                    IpcStatus::Fails => EXIT_FAILS,
                    IpcStatus::Infeasible => EXIT_INFEASIBLE,
                },
            })
        }
        Command::Circuits { network, flow } => {
            let (bytes, spec) = load(network)?;
            let g = &spec.network.graph;
            let circuits = g.enumerate_positive_circuits()?;
            let decomposition = match flow {
                Some(text) => {
                    let z = parse_vector(text)?;
                    if z.len() != g.edge_count() {
                        return Err(Error::DimensionMismatch {
                            expected: g.edge_count(),
                            got: z.len(),
                        });
                    }
                    Some(decompose_circulation(g, &z)?)
                }
                None => None,
            };
            let report = CircuitsReport::new(
                Provenance::new("circuits", Some(&bytes)),
                &circuits,
                decomposition.as_deref(),
            );
            sink.report(&to_json(&report))?;
            Ok(Outcome { code: EXIT_OK })
        }
        Command::Simulate { network } | Command::Steer { network, .. } => {
            let (bytes, spec) = load(network)?;
            let config = sim_config(options)?;
            let h = hamiltonian(&spec)?;
            let state = initial_state(&spec)?;
            let model = FlowModel::new(&spec.network);
            let (name, mode) = match &cli.command {
                Command::Steer { target, .. } => {
                    let x_star = match (target, &spec.target) {
                        (Some(text), _) => parse_vector(text)?,
                        (None, Some(t)) => t.clone(),
                        (None, None) => {
                            return Err(Error::InvalidConfig("steer needs `target` in [initial] or --target".into()))
                        }
                    };
                    if x_star.len() != state.x.len() {
                        return Err(Error::DimensionMismatch {
                            expected: state.x.len(),
                            got: x_star.len(),
                        });
                    }
                    ("steer", Mode::Steering(AdmissibleTarget::new(vec_to_f64(&x_star), &state.x)?))
                }
                _ if spec.network.terminals.is_some() => ("simulate", Mode::Disturbed),
                _ => ("simulate", Mode::Consensus),
            };
            let traj = integrate(&model, &h, &state, &config, mode)?;
            let verification = verify_trajectory(&traj, &model, &h, &config);
            let convergence = detect_convergence(&traj, &config);
            let mut provenance = Provenance::new(name, Some(&bytes));
            provenance.config = Some(config);
            let report = SimulationReport::new(provenance, &traj, verification, convergence);
            if sink.out.is_some() {
                let mut csv = Vec::new();
                write_trajectory_csv(&traj, &model, &mut csv).expect("writing to memory");
                sink.file("trajectory.csv", &csv)?;
            }
            sink.report(&to_json(&report))?;
            Ok(Outcome { code: EXIT_OK })
        }
        Command::Counterexample { network } => {
            let (bytes, spec) = load(network)?;
            let net = &spec.network;
            net.ensure_compatible()?;
            let verdict = check_ipc(net)?;
            if verdict.status == IpcStatus::Infeasible {
                return Err(Error::Infeasible);
            }
            let cx = build_counterexample(net, &verdict)?;
            let h = hamiltonian(&spec)?;
            let x0 = cx.x0_for_weights(h.weights());
            let config = match (&options.config, options.step, options.horizon) {
                (None, None, None) => SimConfig::with_horizon(50.0),
                _ => sim_config(options)?,
            };
            let state = SimState::new(vec_to_f64(&x0), vec_to_f64(&cx.xc0));
            let traj = integrate(&FlowModel::new(net), &h, &state, &config, Mode::Consensus)?;
            let freeze = FreezeCheck {
                horizon: config.horizon,
                max_dx_norm: traj.stats.max_dx_norm,
                min_disagreement: traj.stats.min_disagreement,
                frozen: traj.stats.max_dx_norm <= FREEZE_TOL,
            };
            let with_initial = NetworkSpec {
                x0: Some(x0.clone()),
                xc0: Some(cx.xc0.clone()),
                ..spec.clone()
            };
            let text = serialize_network(&with_initial);
            let mut provenance = Provenance::new("counterexample", Some(&bytes));
            provenance.config = Some(config);
            let z = verdict.final_z.as_ref().expect("failing verdict carries its terminal circulation");
            let report = CounterexampleReport::new(provenance, z, &cx, &x0, freeze, text.clone());
            sink.file("counterexample.net", text.as_bytes())?;
            sink.report(&to_json(&report))?;
            Ok(Outcome { code: EXIT_OK })
        }
        Command::Sweep {
            max_vertices,
            max_edges,
            max_bound,
            random,
        } => {
            if !(1..=5).contains(max_vertices) || *max_bound < 1 {
                return Err(Error::InvalidConfig(
                    "sweep needs 1 <= --max-vertices <= 5 and --max-bound >= 1".into(),
                ));
            }
            let exhaustive = exhaustive_sweep(*max_vertices, *max_edges, *max_bound);
            let random = random.map(|count| {
                let mut rng = ChaCha8Rng::seed_from_u64(options.seed.unwrap_or(0));
                let mut counts = SweepCounts::default();
                for _ in 0..count {
                    let net = random_feasible_network(&mut rng, 8);
                    tally(&net, &mut counts).expect("generated networks are compatible and connected");
                }
                counts
            });
            let mismatches = exhaustive.mismatches + random.as_ref().map_or(0, |c| c.mismatches);
            let mut provenance = Provenance::new("sweep", None);
            provenance.seed = random.is_some().then(|| options.seed.unwrap_or(0));
            let report = SweepReport {
                provenance,
                max_vertices: *max_vertices,
                max_edges: *max_edges,
                max_bound: *max_bound,
                exhaustive,
                random,
            };
            sink.report(&to_json(&report))?;
            Ok(Outcome {
                code: if mismatches == 0 { EXIT_OK } else { EXIT_FAILS },
            })
        }
    }
}
