//! JSON ingestion and emission of communities, datasets and query networks.
//!
//! A community file is
//! `{"directed": bool, "nodes": [{"id", "covariates", "outcome"?}], "edges": [{"src", "dst", "weight"}]}`.
//! Ids may be strings or integers, `directed` defaults to false, `covariates`
//! to `[]` and `weight` to 1. A query adds `"root": id` and optionally
//! `"radius": r` to truncate the rooted network.

use std::fs;
use std::path::Path;

use serde::Deserialize;
use serde_json::{json, Number, Value};

use crate::error::{Error, Result};
use crate::graph::{full_ball, Ball, CommunityBuilder, CommunityGraph, Dataset, Weight};

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCommunity {
    #[serde(default)]
    directed: bool,
    nodes: Vec<RawNode>,
    #[serde(default)]
    edges: Vec<RawEdge>,
    #[serde(default)]
    root: Option<RawId>,
    #[serde(default)]
    radius: Option<u64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNode {
    id: RawId,
    #[serde(default)]
    covariates: Vec<f64>,
    #[serde(default)]
    outcome: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEdge {
    src: RawId,
    dst: RawId,
    #[serde(default)]
    weight: Option<Number>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawId {
    Text(String),
    Number(Number),
}

impl RawId {
    fn text(&self) -> String {
        match self {
            RawId::Text(s) => s.clone(),
            RawId::Number(n) => n.to_string(),
        }
    }
}

fn located(source: &str, field: &str, e: Error) -> Error {
    let msg = match e {
        Error::InvalidInput(m) => m,
        Error::UnknownAgent(id) => format!("unknown agent `{id}`"),
        other => other.to_string(),
    };
    Error::InvalidInput(format!("{source}: {field}: {msg}"))
}

fn weight_of(n: &Option<Number>) -> std::result::Result<Weight, String> {
    let Some(n) = n else { return Ok(1) };
    match n.as_u64() {
        Some(0) => Err("weight 0 is not allowed: D_ij = 0 iff i = j, so links need weight >= 1".into()),
        Some(w) => Weight::try_from(w).map_err(|_| format!("weight {w} is too large")),
        None => Err(format!("weight {n} is not a positive integer")),
    }
}

fn build(raw: &RawCommunity, source: &str) -> Result<CommunityGraph> {
    let dim = raw.nodes.first().map_or(0, |n| n.covariates.len());
    let mut b = CommunityBuilder::new(raw.directed, dim);
    for (i, node) in raw.nodes.iter().enumerate() {
        b.add_agent(&node.id.text(), &node.covariates, node.outcome)
            .map_err(|e| located(source, &format!("nodes[{i}]"), e))?;
    }
    for (i, edge) in raw.edges.iter().enumerate() {
        let field = format!("edges[{i}]");
        let w =
            weight_of(&edge.weight).map_err(|m| located(source, &format!("{field}.weight"), Error::InvalidInput(m)))?;
        b.add_edge(&edge.src.text(), &edge.dst.text(), w).map_err(|e| located(source, &field, e))?;
    }
    Ok(b.build())
}

fn parse_raw(text: &str, source: &str) -> Result<RawCommunity> {
    serde_json::from_str(text).map_err(|e| Error::Json { context: source.to_owned(), source: e })
}

/// Parses one community; `source` names it in diagnostics.
pub fn parse_community(text: &str, source: &str) -> Result<CommunityGraph> {
    build(&parse_raw(text, source)?, source)
}

/// Parses a rooted query network (a community plus `root`).
pub fn parse_query(text: &str, source: &str) -> Result<Ball> {
    let raw = parse_raw(text, source)?;
    let root = raw
        .root
        .as_ref()
        .ok_or_else(|| Error::input(format!("{source}: a query network needs a \"root\" field")))?
        .text();
    let g = build(&raw, source)?;
    let idx = g.agent(&root).map_err(|e| located(source, "root", e))?;
    let ball = full_ball(&g, idx);
    Ok(match raw.radius {
        Some(r) => ball.truncate(r),
        None => ball,
    })
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io { path: path.display().to_string(), source: e })
}

pub fn load_community(path: &Path) -> Result<CommunityGraph> {
    parse_community(&read(path)?, &path.display().to_string())
}

pub fn load_query(path: &Path) -> Result<Ball> {
    parse_query(&read(path)?, &path.display().to_string())
}

/// Sorted `*.json` files of a directory.
pub fn community_files(dir: &Path) -> Result<Vec<std::path::PathBuf>> {
    let io_err = |e| Error::Io { path: dir.display().to_string(), source: e };
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_err)? {
        let path = entry.map_err(io_err)?.path();
        if path.is_file() && path.extension().is_some_and(|e| e == "json") {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

/// A dataset from a directory of community files (in file-name order) or
/// from one file holding a JSON array of communities.
pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let comms = if path.is_dir() {
        let files = community_files(path)?;
        if files.is_empty() {
            return Err(Error::input(format!("{}: no .json community files", path.display())));
        }
        files.iter().map(|f| load_community(f)).collect::<Result<Vec<_>>>()?
    } else {
        let source = path.display().to_string();
        let text = read(path)?;
        let items: Vec<Value> =
            serde_json::from_str(&text).map_err(|e| Error::Json { context: source.clone(), source: e })?;
        items
            .iter()
            .enumerate()
            .map(|(c, v)| {
                let here = format!("{source}[{c}]");
                let raw: RawCommunity =
                    serde_json::from_value(v.clone()).map_err(|e| Error::Json { context: here.clone(), source: e })?;
                build(&raw, &here)
            })
            .collect::<Result<Vec<_>>>()?
    };
    Dataset::new(comms)
}

fn id_value(id: &str) -> Value {
    Value::String(id.to_owned())
}

/// JSON object of a community; undirected links are written once.
pub fn community_to_json(g: &CommunityGraph) -> Value {
    let nodes: Vec<Value> = (0..g.len())
        .map(|i| {
            let mut node = json!({"id": id_value(g.id(i)), "covariates": g.covariates(i)});
            if let Some(y) = g.outcome(i) {
                node["outcome"] = json!(y);
            }
            node
        })
        .collect();
    let edges: Vec<Value> = g
        .edges()
        .filter(|&(s, d, _)| g.is_directed() || s < d)
        .map(|(s, d, w)| json!({"src": id_value(g.id(s)), "dst": id_value(g.id(d)), "weight": w}))
        .collect();
    json!({"directed": g.is_directed(), "nodes": nodes, "edges": edges})
}

/// A rooted network as a query file.
pub fn query_to_json(ball: &Ball) -> Value {
    let mut v = community_to_json(&ball.to_community());
    v["root"] = id_value(ball.root_id());
    v
}

pub fn write_json(path: &Path, value: &Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Json { context: path.display().to_string(), source: e })?;
    fs::write(path, text + "\n").map_err(|e| Error::Io { path: path.display().to_string(), source: e })
}
