//! Readers and writers for the three file types: model/graph JSON, design
//! JSON and dataset CSV. Indices are 1-based in every file.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use gbn_core::sampler::{CLAMP_TOL, NORMAL_METHOD, RNG_ALGORITHM};
use gbn_core::{Condition, DagStructure, Dataset, DesignSpec, GbnParams, Matrix64, ModelError, Target};
use serde::Deserialize;

use crate::error::Located;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    p: usize,
    edges: Vec<[usize; 2]>,
    m: Option<Vec<f64>>,
    sigma: Option<Vec<f64>>,
    w: Option<BTreeMap<String, f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCondition {
    targets: BTreeMap<String, f64>,
    reps: usize,
}

/// A model file, or a graph file that omits `m`, `sigma` and `w`.
pub enum ModelOrGraph {
    Model(GbnParams),
    Graph(DagStructure),
}

impl ModelOrGraph {
    pub fn dag(&self) -> &DagStructure {
        match self {
            ModelOrGraph::Model(params) => params.dag(),
            ModelOrGraph::Graph(dag) => dag,
        }
    }
}

fn read_text(path: &Path) -> Result<String, Located> {
    fs::read_to_string(path).map_err(|e| Located::new(path, e.to_string()))
}

/// Line of the `n`-th occurrence of `"key"`, for pointing at semantic errors
/// in JSON that parsed fine.
fn key_line(text: &str, key: &str, n: usize) -> Option<usize> {
    let needle = format!("\"{key}\"");
    let at = text.match_indices(&needle).nth(n)?.0;
    Some(text[..at].matches('\n').count() + 1)
}

fn json_error(path: &Path, e: serde_json::Error) -> Located {
    let msg = e.to_string();
    // serde_json appends its own position; the line goes in front instead.
    let msg = msg.split(" at line ").next().unwrap_or(&msg).to_string();
    let line = (e.line() > 0).then_some(e.line());
    Located::new(path, msg).line(line)
}

fn parse_edge_key(key: &str) -> Option<(usize, usize)> {
    let (i, j) = key.split_once(',')?;
    Some((i.parse().ok()?, j.parse().ok()?))
}

pub fn read_model_or_graph(path: &Path) -> Result<ModelOrGraph, Located> {
    let text = read_text(path)?;
    let raw: RawModel = serde_json::from_str(&text).map_err(|e| json_error(path, e))?;
    let at = |key: &str| key_line(&text, key, 0);

    for (k, e) in raw.edges.iter().enumerate() {
        if e[0] == 0 || e[1] == 0 || e[0] > raw.p || e[1] > raw.p {
            return Err(Located::new(
                path,
                format!("edge [{}, {}] is outside 1..={}", e[0], e[1], raw.p),
            )
            .line(at("edges"))
            .field(format!("edges[{k}]")));
        }
    }
    let edges: Vec<(usize, usize)> = raw.edges.iter().map(|e| (e[0], e[1])).collect();
    let dag = DagStructure::from_one_based(raw.p, &edges)
        .map_err(|e| Located::new(path, e.to_string()).line(at("edges")).field("edges"))?;

    let (m, sigma, w) = match (raw.m, raw.sigma, raw.w) {
        (None, None, None) => return Ok(ModelOrGraph::Graph(dag)),
        (Some(m), Some(s), Some(w)) => (m, s, w),
        (m, s, _) => {
            let missing = if m.is_none() {
                "m"
            } else if s.is_none() {
                "sigma"
            } else {
                "w"
            };
            return Err(Located::new(path, "model is incomplete; give all of m, sigma and w or none")
                .field(missing));
        }
    };

    let mut weights = Vec::with_capacity(w.len());
    for (key, &value) in &w {
        let (i, j) = parse_edge_key(key)
            .filter(|&(i, j)| i >= 1 && j >= 1 && i <= raw.p && j <= raw.p)
            .ok_or_else(|| {
                Located::new(path, "weight keys must be \"i,j\" with 1-based node indices")
                    .line(key_line(&text, key, 0))
                    .field(format!("w[\"{key}\"]"))
            })?;
        weights.push(((i - 1, j - 1), value));
    }
    let params = GbnParams::from_edge_weights(dag, m, sigma, &weights).map_err(|e| {
        let (field, line) = match &e {
            ModelError::Length { field, .. } => (field.to_string(), at(field)),
            ModelError::NonPositiveSigma { node, .. } => (format!("sigma[{}]", node + 1), at("sigma")),
            ModelError::NonFinite { field, index } => (format!("{field}[{}]", index + 1), at(field)),
            ModelError::UnknownEdge(i, j) | ModelError::MissingWeight(i, j) => {
                let key = format!("{},{}", i + 1, j + 1);
                let line = key_line(&text, &key, 0).or(at("w"));
                (format!("w[\"{key}\"]"), line)
            }
            _ => ("w".to_string(), at("w")),
        };
        Located::new(path, e.to_string()).line(line).field(field)
    })?;
    Ok(ModelOrGraph::Model(params))
}

pub fn read_model(path: &Path) -> Result<GbnParams, Located> {
    match read_model_or_graph(path)? {
        ModelOrGraph::Model(params) => Ok(params),
        ModelOrGraph::Graph(_) => {
            Err(Located::new(path, "expected a full model; m, sigma and w are missing").field("m"))
        }
    }
}

pub fn read_design(path: &Path, p: usize) -> Result<DesignSpec, Located> {
    let text = read_text(path)?;
    let raw: Vec<RawCondition> = serde_json::from_str(&text).map_err(|e| json_error(path, e))?;
    if raw.is_empty() {
        return Err(Located::new(path, "design has no conditions"));
    }
    let mut conditions = Vec::with_capacity(raw.len());
    for (k, c) in raw.into_iter().enumerate() {
        if c.reps == 0 {
            return Err(Located::new(path, "reps must be at least 1")
                .line(key_line(&text, "reps", k))
                .field(format!("[{k}].reps")));
        }
        let mut pairs = Vec::with_capacity(c.targets.len());
        for (key, value) in c.targets {
            let node = key.parse::<usize>().ok().filter(|&i| i >= 1 && i <= p);
            let field = format!("[{k}].targets[\"{key}\"]");
            let line = key_line(&text, "targets", k);
            let Some(node) = node else {
                return Err(Located::new(path, format!("target must be a node index in 1..={p}"))
                    .line(line)
                    .field(field));
            };
            if !value.is_finite() {
                return Err(Located::new(path, "clamp value is not finite").line(line).field(field));
            }
            pairs.push((node - 1, value));
        }
        conditions.push(Condition {
            target: Target::new(pairs),
            reps: c.reps,
        });
    }
    DesignSpec::new(conditions).map_err(|e| Located::new(path, e.to_string()))
}

/// Parses a `do` cell: empty, or `INDEX=FLOAT(;INDEX=FLOAT)*` without spaces.
pub fn parse_do_cell(cell: &str, p: usize) -> Result<Vec<(usize, f64)>, String> {
    if cell.is_empty() {
        return Ok(Vec::new());
    }
    if cell.chars().any(char::is_whitespace) {
        return Err("whitespace is not allowed".into());
    }
    let mut pairs: Vec<(usize, f64)> = Vec::new();
    for item in cell.split(';') {
        let (index, value) = item
            .split_once('=')
            .ok_or_else(|| format!("`{item}` is not INDEX=VALUE"))?;
        let node = index
            .parse::<usize>()
            .ok()
            .filter(|&i| i >= 1 && i <= p)
            .ok_or_else(|| format!("`{index}` is not a node index in 1..={p}"))?;
        let value = value
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| format!("`{value}` is not a finite number"))?;
        if pairs.iter().any(|&(n, _)| n == node - 1) {
            return Err(format!("node {node} is clamped twice"));
        }
        pairs.push((node - 1, value));
    }
    Ok(pairs)
}

/// Reads a dataset whose header must be `x1,...,xp` optionally followed by
/// `do`. Lines starting with `#` are comments.
pub fn read_dataset(path: &Path, p: usize) -> Result<Dataset, Located> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .flexible(true)
        .from_path(path)
        .map_err(|e| Located::new(path, e.to_string()))?;

    let header = reader
        .headers()
        .map_err(|e| Located::new(path, e.to_string()))?
        .clone();
    let header_line = header.position().map(|pos| pos.line() as usize);
    let names: Vec<&str> = header.iter().collect();
    let has_do = names.len() == p + 1 && names[p] == "do";
    if !(names.len() == p || has_do) {
        return Err(Located::new(
            path,
            format!("header has {} columns; expected x1..x{p} followed by do", names.len()),
        )
        .line(header_line)
        .field("header"));
    }
    for (j, name) in names.iter().take(p).enumerate() {
        if *name != format!("x{}", j + 1) {
            return Err(Located::new(path, format!("expected column `x{}`, found `{name}`", j + 1))
                .line(header_line)
                .field("header"));
        }
    }

    let mut values = Vec::new();
    let mut targets = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|pos| pos.line() as usize);
            Located::new(path, e.to_string()).line(line)
        })?;
        let line = record.position().map(|pos| pos.line() as usize);
        if record.len() != names.len() {
            return Err(Located::new(
                path,
                format!("row has {} fields, expected {}", record.len(), names.len()),
            )
            .line(line));
        }
        let start = values.len();
        for j in 0..p {
            let cell = &record[j];
            let v = cell
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| {
                    Located::new(path, format!("`{cell}` is not a finite number"))
                        .line(line)
                        .field(format!("x{}", j + 1))
                })?;
            values.push(v);
        }
        let pairs = if has_do {
            parse_do_cell(&record[p], p).map_err(|m| Located::new(path, m).line(line).field("do"))?
        } else {
            Vec::new()
        };
        for &(node, clamp) in &pairs {
            let v = values[start + node];
            if (v - clamp).abs() > CLAMP_TOL {
                return Err(Located::new(
                    path,
                    format!("value {v} differs from its clamp {clamp}"),
                )
                .line(line)
                .field(format!("x{}", node + 1)));
            }
        }
        targets.push(Target::new(pairs));
    }
    if targets.is_empty() {
        return Err(Located::new(path, "dataset has no rows"));
    }
    let x = Matrix64::from_row_major(targets.len(), p, values);
    Dataset::new(x, targets).map_err(|e| Located::new(path, e.to_string()))
}

pub fn format_do_cell(target: &Target) -> String {
    target
        .iter()
        .map(|(node, v)| format!("{}={v}", node + 1))
        .collect::<Vec<_>>()
        .join(";")
}

/// Writes `data` as CSV. Floats use shortest round-trip formatting.
pub fn write_dataset<W: Write>(
    out: &mut W,
    data: &Dataset,
    seed: u64,
    timestamp: Option<u64>,
) -> std::io::Result<()> {
    writeln!(out, "# rng={RNG_ALGORITHM} normal={NORMAL_METHOD} seed={seed}")?;
    if let Some(secs) = timestamp {
        writeln!(out, "# created=unix:{secs}")?;
    }
    let p = data.p();
    let mut wtr = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (1..=p).map(|j| format!("x{j}")).collect();
    header.push("do".into());
    wtr.write_record(&header).map_err(std::io::Error::other)?;
    for k in 0..data.n() {
        let mut row: Vec<String> = data.row(k).iter().map(|v| v.to_string()).collect();
        row.push(format_do_cell(data.target(k)));
        wtr.write_record(&row).map_err(std::io::Error::other)?;
    }
    wtr.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn do_cell_grammar() {
        assert_eq!(parse_do_cell("", 3).unwrap(), vec![]);
        assert_eq!(parse_do_cell("1=-1.5;2=2.5", 3).unwrap(), vec![(0, -1.5), (1, 2.5)]);
        assert!(parse_do_cell("1=0.5;1=0.5", 3).unwrap_err().contains("twice"));
        assert!(parse_do_cell("1 = 0.5", 3).is_err());
        assert!(parse_do_cell("4=0.5", 3).is_err());
        assert!(parse_do_cell("0=0.5", 3).is_err());
        assert!(parse_do_cell("1=0.5;", 3).is_err());
        assert!(parse_do_cell("1=nan", 3).is_err());
    }

    #[test]
    fn do_cell_round_trip() {
        let t = Target::new([(2, 0.1), (0, -1.5)]);
        let s = format_do_cell(&t);
        assert_eq!(s, "1=-1.5;3=0.1");
        assert_eq!(Target::new(parse_do_cell(&s, 3).unwrap()), t);
    }

    #[test]
    fn key_lines() {
        let text = "{\n  \"p\": 2,\n  \"reps\": 1,\n  \"reps\": 2\n}";
        assert_eq!(key_line(text, "p", 0), Some(2));
        assert_eq!(key_line(text, "reps", 1), Some(4));
        assert_eq!(key_line(text, "m", 0), None);
    }
}
