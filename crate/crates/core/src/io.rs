//! Line-oriented network files and CSV trajectories.
//!
//! ```text
//! # triangle with unit capacities
//! [vertices]
//! count 3
//!
//! [edges]
//! # id tail head lower upper
//! 1 1 2 0 1
//! 2 2 3 0 1
//! 3 3 1 0 1
//!
//! [terminals]
//! # vertex sign flow
//! 1 + 3/10
//! 2 - 3/10
//!
//! [initial]
//! x0 1 0 -1
//! xc0 0 0 0
//! target 0 0 0
//!
//! [hamiltonian]
//! weights 1 1 1
//! ```
//!
//! Vertices may instead be declared as `names a b c` and referenced by name.
//! Numbers are exact rationals: integers, `p/q`, or finite decimals.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::Write;

use crate::dynamics::FlowModel;
use crate::error::{Error, Result};
use crate::graph::DirectedGraph;
use crate::network::{ConstrainedNetwork, Terminal, Terminals};
use crate::rational::{format_rational, parse_rational, Q};
use crate::sim::Trajectory;

/// A parsed network file: the network plus optional initial data.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkSpec {
    pub network: ConstrainedNetwork,
    pub vertex_names: Option<Vec<String>>,
    pub x0: Option<Vec<Q>>,
    pub xc0: Option<Vec<Q>>,
    pub target: Option<Vec<Q>>,
    pub weights: Option<Vec<Q>>,
}

impl NetworkSpec {
    pub fn bare(network: ConstrainedNetwork) -> Self {
        Self {
            network,
            vertex_names: None,
            x0: None,
            xc0: None,
            target: None,
            weights: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    Vertices,
    Edges,
    Terminals,
    Initial,
    Hamiltonian,
}

struct Token<'a> {
    text: &'a str,
    column: usize,
}

fn tokens(line: &str) -> Vec<Token<'_>> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in line.char_indices() {
        if c.is_whitespace() {
            if let Some(s) = start.take() {
                out.push(Token {
                    text: &line[s..i],
                    column: s + 1,
                });
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push(Token {
            text: &line[s..],
            column: s + 1,
        });
    }
    out
}

fn parse_err(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        column,
        message: message.into(),
    }
}

fn rational_at(tok: &Token<'_>, line: usize) -> Result<Q> {
    parse_rational(tok.text).map_err(|e| parse_err(line, tok.column, e.to_string()))
}

struct EdgeRecord {
    id: usize,
    tail: usize,
    head: usize,
    lower: Q,
    upper: Q,
    line: usize,
}

pub fn parse_network(text: &str) -> Result<NetworkSpec> {
    let mut section: Option<Section> = None;
    let mut vertex_count: Option<usize> = None;
    let mut names: Option<Vec<String>> = None;
    let mut edges: Vec<EdgeRecord> = Vec::new();
    let mut terminals: Vec<(Token<'_>, usize, i8, Q)> = Vec::new();
    let mut vectors: HashMap<&str, (Vec<Q>, usize)> = HashMap::new();
    let mut saw_terminals = false;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let content = raw.split('#').next().unwrap_or("");
        let toks = tokens(content);
        let Some(first) = toks.first() else { continue };

        if first.text.starts_with('[') {
            if toks.len() != 1 || !first.text.ends_with(']') {
                return Err(parse_err(line_no, first.column, "malformed section header"));
            }
            section = Some(match &first.text[1..first.text.len() - 1] {
                "vertices" => Section::Vertices,
                "edges" => Section::Edges,
                "terminals" => {
                    saw_terminals = true;
                    Section::Terminals
                }
                "initial" => Section::Initial,
                "hamiltonian" => Section::Hamiltonian,
                other => {
                    return Err(parse_err(
                        line_no,
                        first.column,
                        format!("unknown section [{other}]"),
                    ))
                }
            });
            continue;
        }

        let Some(sec) = section else {
            return Err(parse_err(line_no, first.column, "record outside of any section"));
        };
        match sec {
            Section::Vertices => match first.text {
                "count" => {
                    if vertex_count.is_some() || names.is_some() {
                        return Err(parse_err(line_no, first.column, "vertices declared twice"));
                    }
                    let [_, n] = toks.as_slice() else {
                        return Err(parse_err(line_no, first.column, "expected `count <n>`"));
                    };
                    let count: usize = n
                        .text
                        .parse()
                        .map_err(|_| parse_err(line_no, n.column, "vertex count must be a positive integer"))?;
                    if count == 0 {
                        return Err(parse_err(line_no, n.column, "vertex count must be positive"));
                    }
                    vertex_count = Some(count);
                }
                "names" => {
                    if vertex_count.is_some() || names.is_some() {
                        return Err(parse_err(line_no, first.column, "vertices declared twice"));
                    }
                    if toks.len() < 2 {
                        return Err(parse_err(line_no, first.column, "expected at least one name"));
                    }
                    let list: Vec<String> = toks[1..].iter().map(|t| t.text.to_string()).collect();
                    for (i, t) in toks[1..].iter().enumerate() {
                        if t.text.parse::<usize>().is_ok() {
                            return Err(parse_err(line_no, t.column, "vertex names must not be integers"));
                        }
                        if list[..i].contains(&list[i]) {
                            return Err(parse_err(line_no, t.column, format!("duplicate vertex name {:?}", t.text)));
                        }
                    }
                    vertex_count = Some(list.len());
                    names = Some(list);
                }
                other => {
                    return Err(parse_err(line_no, first.column, format!("unknown key {other:?} in [vertices]")))
                }
            },
            Section::Edges => {
                let [id, tail, head, lo, hi] = toks.as_slice() else {
                    return Err(parse_err(
                        line_no,
                        first.column,
                        "expected `<id> <tail> <head> <lower> <upper>`",
                    ));
                };
                let n = vertex_count
                    .ok_or_else(|| parse_err(line_no, first.column, "[vertices] must precede [edges]"))?;
                let edge_id: usize = id
                    .text
                    .parse()
                    .ok()
                    .filter(|&v: &usize| v > 0)
                    .ok_or_else(|| parse_err(line_no, id.column, "edge id must be a positive integer"))?;
                edges.push(EdgeRecord {
                    id: edge_id,
                    tail: resolve_vertex(tail, line_no, n, names.as_deref())?,
                    head: resolve_vertex(head, line_no, n, names.as_deref())?,
                    lower: rational_at(lo, line_no)?,
                    upper: rational_at(hi, line_no)?,
                    line: line_no,
                });
            }
            Section::Terminals => {
                let [vertex, sign, flow] = toks.as_slice() else {
                    return Err(parse_err(line_no, first.column, "expected `<vertex> <+|-> <flow>`"));
                };
                let n = vertex_count
                    .ok_or_else(|| parse_err(line_no, first.column, "[vertices] must precede [terminals]"))?;
                let v = resolve_vertex(vertex, line_no, n, names.as_deref())?;
                let s = match sign.text {
                    "+" | "+1" | "in" => 1,
                    "-" | "-1" | "out" => -1,
                    _ => return Err(parse_err(line_no, sign.column, "terminal sign must be + or -")),
                };
                let f = rational_at(flow, line_no)?;
                terminals.push((Token { text: vertex.text, column: vertex.column }, v, s, f));
            }
            Section::Initial | Section::Hamiltonian => {
                let allowed: &[&str] = if sec == Section::Initial {
                    &["x0", "xc0", "target"]
                } else {
                    &["weights"]
                };
                let Some(key) = allowed.iter().find(|k| **k == first.text) else {
                    return Err(parse_err(line_no, first.column, format!("unknown key {:?}", first.text)));
                };
                if vectors.contains_key(key) {
                    return Err(parse_err(line_no, first.column, format!("{key} given twice")));
                }
                let values = toks[1..]
                    .iter()
                    .map(|t| rational_at(t, line_no))
                    .collect::<Result<Vec<_>>>()?;
                vectors.insert(key, (values, line_no));
            }
        }
    }

    let n = vertex_count.ok_or_else(|| Error::Validation("missing [vertices] section".into()))?;
    let m = edges.len();
    let mut order: Vec<Option<EdgeRecord>> = (0..m).map(|_| None).collect();
    for rec in edges {
        if rec.id > m {
            return Err(Error::Validation(format!(
                "line {}: edge ids must be exactly 1..{m}, found {}",
                rec.line, rec.id
            )));
        }
        let slot = &mut order[rec.id - 1];
        if slot.is_some() {
            return Err(Error::Validation(format!("line {}: duplicate edge id {}", rec.line, rec.id)));
        }
        *slot = Some(rec);
    }
    let records: Vec<EdgeRecord> = order.into_iter().map(|r| r.expect("ids are a permutation")).collect();
    let graph = DirectedGraph::new(n, records.iter().map(|r| (r.tail, r.head)).collect())
        .map_err(|e| Error::Validation(e.to_string()))?;
    let terminals = saw_terminals.then(|| Terminals {
        columns: terminals
            .iter()
            .map(|(_, v, s, f)| Terminal {
                vertex: *v,
                sign: *s,
                flow: *f,
            })
            .collect(),
    });
    let network = ConstrainedNetwork::with_terminals(
        graph,
        records.iter().map(|r| r.lower).collect(),
        records.iter().map(|r| r.upper).collect(),
        terminals,
    )
    .map_err(|e| Error::Validation(e.to_string()))?;

    let mut take = |key: &str, expected: usize| -> Result<Option<Vec<Q>>> {
        match vectors.remove(key) {
            None => Ok(None),
            Some((v, line)) if v.len() == expected => {
                let _ = line;
                Ok(Some(v))
            }
            Some((v, line)) => Err(Error::Validation(format!(
                "line {line}: {key} has {} entries, expected {expected}",
                v.len()
            ))),
        }
    };
    let x0 = take("x0", n)?;
    let xc0 = take("xc0", m)?;
    let target = take("target", n)?;
    let weights = take("weights", n)?;
    if let Some(w) = &weights {
        if let Some(i) = w.iter().position(|v| *v <= Q::from_integer(0)) {
            return Err(Error::Validation(format!("Hamiltonian weight {} must be positive", i + 1)));
        }
    }
    Ok(NetworkSpec {
        network,
        vertex_names: names,
        x0,
        xc0,
        target,
        weights,
    })
}

fn resolve_vertex(tok: &Token<'_>, line: usize, n: usize, names: Option<&[String]>) -> Result<usize> {
    if let Ok(id) = tok.text.parse::<usize>() {
        if id == 0 || id > n {
            return Err(parse_err(line, tok.column, format!("vertex {id} outside 1..{n}")));
        }
        return Ok(id - 1);
    }
    names
        .and_then(|names| names.iter().position(|s| s == tok.text))
        .ok_or_else(|| parse_err(line, tok.column, format!("unknown vertex {:?}", tok.text)))
}

fn join(values: &[Q]) -> String {
    values.iter().map(format_rational).collect::<Vec<_>>().join(" ")
}

/// Canonical text form; `parse_network` reads it back exactly.
pub fn serialize_network(spec: &NetworkSpec) -> String {
    let net = &spec.network;
    let mut out = String::new();
    let vertex = |v: usize| match &spec.vertex_names {
        Some(names) => names[v].clone(),
        None => (v + 1).to_string(),
    };
    out.push_str("[vertices]\n");
    match &spec.vertex_names {
        Some(names) => {
            let _ = writeln!(out, "names {}", names.join(" "));
        }
        None => {
            let _ = writeln!(out, "count {}", net.vertex_count());
        }
    }
    out.push_str("\n[edges]\n# id tail head lower upper\n");
    for (i, e) in net.graph.edges().iter().enumerate() {
        let _ = writeln!(
            out,
            "{} {} {} {} {}",
            i + 1,
            vertex(e.tail),
            vertex(e.head),
            format_rational(&net.lower[i]),
            format_rational(&net.upper[i])
        );
    }
    if let Some(t) = &net.terminals {
        out.push_str("\n[terminals]\n# vertex sign flow\n");
        for col in &t.columns {
            let sign = if col.sign > 0 { "+" } else { "-" };
            let _ = writeln!(out, "{} {} {}", vertex(col.vertex), sign, format_rational(&col.flow));
        }
    }
    if spec.x0.is_some() || spec.xc0.is_some() || spec.target.is_some() {
        out.push_str("\n[initial]\n");
        for (key, v) in [("x0", &spec.x0), ("xc0", &spec.xc0), ("target", &spec.target)] {
            if let Some(v) = v {
                let _ = writeln!(out, "{key} {}", join(v));
            }
        }
    }
    if let Some(w) = &spec.weights {
        let _ = writeln!(out, "\n[hamiltonian]\nweights {}", join(w));
    }
    out.lines()
        .map(str::trim_end)
        .collect::<Vec<_>>()
        .join("\n")
        + "\n"
}

pub fn trajectory_header(n: usize, m: usize) -> String {
    let mut cols = vec!["t".to_string()];
    cols.extend((1..=n).map(|i| format!("x_{i}")));
    cols.extend((1..=m).map(|i| format!("xc_{i}")));
    cols.extend(["V", "sum_x", "norm_BtgradH"].map(String::from));
    cols.join(",")
}

/// One row per recorded sample under [`trajectory_header`].
pub fn write_trajectory_csv<W: Write>(traj: &Trajectory, model: &FlowModel, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{}", trajectory_header(model.vertex_count(), model.edge_count()))?;
    for (s, mon) in traj.samples.iter().zip(&traj.monitors) {
        let mut row = vec![s.t.to_string()];
        row.extend(s.x.iter().map(f64::to_string));
        row.extend(s.xc.iter().map(f64::to_string));
        row.push(mon.lyapunov.to_string());
        row.push(mon.total.to_string());
        row.push(mon.disagreement.to_string());
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}
