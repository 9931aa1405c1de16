//! TU-style graph-classification datasets.
//!
//! A directory holding `DS_A.txt` (1-indexed `u, v` node pairs over the
//! whole dataset), `DS_graph_indicator.txt` (graph id of every node) and
//! `DS_graph_labels.txt` (one label per graph). `DS_node_attributes.txt`
//! (comma-separated reals, one row per node) is read when present.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::linalg::Matrix;
use crate::rewiring::inject_degree_features;

#[derive(Debug, Clone)]
pub struct TuDataset {
    pub name: String,
    pub graphs: Vec<Graph>,
    /// `label_map[i]` is the raw label that was remapped to class `i`.
    pub label_map: Vec<i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TuSummary {
    pub name: String,
    pub graphs: usize,
    pub classes: usize,
    pub label_map: Vec<i64>,
}

impl TuDataset {
    pub fn summary(&self) -> TuSummary {
        TuSummary {
            name: self.name.clone(),
            graphs: self.graphs.len(),
            classes: self.label_map.len(),
            label_map: self.label_map.clone(),
        }
    }
}

fn parse_err(file: &Path, line: usize, msg: impl Into<String>) -> Error {
    let name = file.file_name().map_or_else(String::new, |s| s.to_string_lossy().into_owned());
    Error::Parse {
        line,
        msg: format!("{name}: {}", msg.into()),
    }
}

fn read_lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::domain(format!("cannot read {}: {e}", path.display())))?;
    Ok(text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim().to_string()))
        .filter(|(_, l)| !l.is_empty())
        .collect())
}

fn parse_fields<T: std::str::FromStr>(path: &Path, line: usize, text: &str) -> Result<Vec<T>> {
    text.split(',')
        .map(|t| {
            let t = t.trim();
            t.parse()
                .map_err(|_| parse_err(path, line, format!("invalid value '{t}'")))
        })
        .collect()
}

/// Finds the dataset name from the unique `*_A.txt` file in `dir`.
fn dataset_name(dir: &Path) -> Result<String> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .map_err(|e| Error::domain(format!("cannot read dataset directory {}: {e}", dir.display())))?
        .filter_map(|e| e.ok())
        .filter_map(|e| e.file_name().to_str().and_then(|s| s.strip_suffix("_A.txt")).map(str::to_string))
        .collect();
    names.sort();
    match names.len() {
        1 => Ok(names.remove(0)),
        0 => Err(Error::domain(format!("no *_A.txt file in {}", dir.display()))),
        _ => Err(Error::domain(format!("several datasets in {}: {}", dir.display(), names.join(", ")))),
    }
}

/// Loads every graph of the dataset in `dir`. Node ids are reindexed from 0
/// within each graph, labels are remapped to `0..k` in ascending order, and
/// graphs without node attributes get their degree as the single feature.
pub fn load_tu_dataset(dir: impl AsRef<Path>) -> Result<TuDataset> {
    let dir = dir.as_ref();
    let name = dataset_name(dir)?;
    let file = |suffix: &str| -> PathBuf { dir.join(format!("{name}_{suffix}.txt")) };

    let indicator_path = file("graph_indicator");
    let mut graph_of = Vec::new();
    for (line, text) in read_lines(&indicator_path)? {
        let id: usize = parse_fields(&indicator_path, line, &text)?
            .into_iter()
            .next()
            .filter(|&g: &usize| g >= 1)
            .ok_or_else(|| parse_err(&indicator_path, line, "graph ids are 1-indexed"))?;
        graph_of.push(id - 1);
    }

    let labels_path = file("graph_labels");
    let mut raw_labels = Vec::new();
    for (line, text) in read_lines(&labels_path)? {
        let fields: Vec<i64> = parse_fields(&labels_path, line, &text)?;
        if fields.len() != 1 {
            return Err(parse_err(&labels_path, line, "expected one label"));
        }
        raw_labels.push(fields[0]);
    }
    let graphs = raw_labels.len();
    if let Some(pos) = graph_of.iter().position(|&g| g >= graphs) {
        return Err(parse_err(
            &indicator_path,
            pos + 1,
            format!("graph id {} but only {graphs} labels", graph_of[pos] + 1),
        ));
    }

    // local index of every node within its graph
    let mut sizes = vec![0usize; graphs];
    let local: Vec<usize> = graph_of
        .iter()
        .map(|&g| {
            sizes[g] += 1;
            sizes[g] - 1
        })
        .collect();
    if let Some(g) = sizes.iter().position(|&s| s == 0) {
        return Err(Error::domain(format!("graph {} has no nodes", g + 1)));
    }
    let mut adj: Vec<Matrix> = sizes.iter().map(|&s| Matrix::zeros(s, s)).collect();

    let edges_path = file("A");
    for (line, text) in read_lines(&edges_path)? {
        let ends: Vec<usize> = parse_fields(&edges_path, line, &text)?;
        let [u, v] = ends[..] else {
            return Err(parse_err(&edges_path, line, "expected 'u, v'"));
        };
        if u == 0 || v == 0 || u > graph_of.len() || v > graph_of.len() {
            return Err(parse_err(
                &edges_path,
                line,
                format!("node id out of range 1..={}", graph_of.len()),
            ));
        }
        let (u, v) = (u - 1, v - 1);
        if graph_of[u] != graph_of[v] {
            return Err(parse_err(
                &edges_path,
                line,
                format!("edge ({}, {}) crosses graphs {} and {}", u + 1, v + 1, graph_of[u] + 1, graph_of[v] + 1),
            ));
        }
        if u == v {
            return Err(parse_err(&edges_path, line, "self-loop"));
        }
        let a = &mut adj[graph_of[u]];
        a[(local[u], local[v])] = 1.0;
        a[(local[v], local[u])] = 1.0;
    }

    let attrs_path = file("node_attributes");
    let attributes = if attrs_path.exists() {
        let rows = read_lines(&attrs_path)?;
        if rows.len() != graph_of.len() {
            return Err(Error::domain(format!(
                "{} has {} rows for {} nodes",
                attrs_path.display(),
                rows.len(),
                graph_of.len()
            )));
        }
        let mut parsed = Vec::with_capacity(rows.len());
        for (line, text) in rows {
            let row: Vec<f64> = parse_fields(&attrs_path, line, &text)?;
            if let Some(first) = parsed.first().map(|r: &Vec<f64>| r.len()) {
                if row.len() != first {
                    return Err(parse_err(&attrs_path, line, format!("expected {first} values")));
                }
            }
            parsed.push(row);
        }
        Some(parsed)
    } else {
        None
    };

    let label_map: Vec<i64> = raw_labels.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    let mut out = Vec::with_capacity(graphs);
    for (gi, a) in adj.into_iter().enumerate() {
        let mut g = Graph::from_adjacency(a)?;
        g = match &attributes {
            Some(rows) => {
                let mine: Vec<&Vec<f64>> = (0..graph_of.len()).filter(|&u| graph_of[u] == gi).map(|u| &rows[u]).collect();
                let width = mine[0].len();
                g.with_features(Matrix::from_vec(mine.len(), width, mine.into_iter().flatten().copied().collect()))?
            }
            None => inject_degree_features(g)?,
        };
        let class = label_map.binary_search(&raw_labels[gi]).expect("label collected above");
        out.push(g.with_label(class));
    }
    Ok(TuDataset {
        name,
        graphs: out,
        label_map,
    })
}
