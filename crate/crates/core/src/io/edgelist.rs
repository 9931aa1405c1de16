//! Plain-text edge lists.
//!
//! ```text
//! n 3
//! 0 1
//! 1 2 0.5
//! features 2
//! 1 0
//! 0 1
//! 0.5 0.5
//! ```
//!
//! Nodes are 0-indexed, a missing weight means 1, and the optional feature
//! block holds one row per node. Blank lines and lines starting with `#`
//! are skipped.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::linalg::Matrix;

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

fn parse_usize(tok: &str, what: &str, line: usize) -> Result<usize> {
    tok.parse()
        .map_err(|_| parse_err(line, format!("invalid {what} '{tok}'")))
}

fn parse_f64(tok: &str, what: &str, line: usize) -> Result<f64> {
    let x: f64 = tok
        .parse()
        .map_err(|_| parse_err(line, format!("invalid {what} '{tok}'")))?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(parse_err(line, format!("non-finite {what} '{tok}'")))
    }
}

/// Parses the text of an edge-list file.
pub fn parse_edge_list(text: &str) -> Result<Graph> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let (hline, header) = lines.next().ok_or_else(|| parse_err(1, "missing header 'n <count>'"))?;
    let n = match header.split_whitespace().collect::<Vec<_>>()[..] {
        ["n", count] => parse_usize(count, "node count", hline)?,
        _ => return Err(parse_err(hline, format!("expected header 'n <count>', found '{header}'"))),
    };
    if n == 0 {
        return Err(parse_err(hline, "graph needs at least one node"));
    }

    let mut a = Matrix::zeros(n, n);
    let mut features: Option<(usize, usize, Vec<f64>)> = None;
    for (line, text) in lines {
        let toks: Vec<&str> = text.split_whitespace().collect();
        if let Some((width, start, data)) = features.as_mut() {
            if toks.len() != *width {
                return Err(parse_err(line, format!("expected {width} feature values, found {}", toks.len())));
            }
            if data.len() == n * *width {
                return Err(parse_err(line, format!("more than {n} feature rows (block starts at line {start})")));
            }
            for t in toks {
                data.push(parse_f64(t, "feature value", line)?);
            }
            continue;
        }
        match toks[..] {
            ["features", width] => {
                let width = parse_usize(width, "feature width", line)?;
                if width == 0 {
                    return Err(parse_err(line, "feature width must be >= 1"));
                }
                features = Some((width, line, Vec::with_capacity(n * width)));
            }
            [u, v] | [u, v, _] => {
                let u = parse_usize(u, "node id", line)?;
                let v = parse_usize(v, "node id", line)?;
                let w = match toks.get(2) {
                    Some(t) => parse_f64(t, "weight", line)?,
                    None => 1.0,
                };
                if u >= n || v >= n {
                    return Err(parse_err(line, format!("node id {} out of range for n = {n}", u.max(v))));
                }
                if u == v {
                    return Err(parse_err(line, "self-loop"));
                }
                if w <= 0.0 {
                    return Err(parse_err(line, format!("weight {w} must be positive")));
                }
                if a[(u, v)] != 0.0 {
                    return Err(parse_err(line, format!("duplicate edge ({u}, {v})")));
                }
                a[(u, v)] = w;
                a[(v, u)] = w;
            }
            _ => return Err(parse_err(line, format!("expected 'u v [weight]', found '{text}'"))),
        }
    }

    let g = Graph::from_adjacency(a)?;
    match features {
        None => Ok(g),
        Some((width, start, data)) => {
            if data.len() != n * width {
                return Err(parse_err(
                    start,
                    format!("feature block has {} rows, expected {n}", data.len() / width),
                ));
            }
            g.with_features(Matrix::from_vec(n, width, data))
        }
    }
}

/// Canonical text: header, edges with `u < v` in lexicographic order (unit
/// weights omitted), then the feature block.
pub fn format_edge_list(g: &Graph) -> String {
    let mut out = format!("n {}\n", g.n());
    for (u, v, w) in g.edges() {
        if w == 1.0 {
            let _ = writeln!(out, "{u} {v}");
        } else {
            let _ = writeln!(out, "{u} {v} {w}");
        }
    }
    if let Some(x) = g.features() {
        let _ = writeln!(out, "features {}", x.cols());
        for r in 0..x.rows() {
            let row: Vec<String> = x.row(r).iter().map(|v| v.to_string()).collect();
            let _ = writeln!(out, "{}", row.join(" "));
        }
    }
    out
}

pub fn load_edge_list(path: impl AsRef<Path>) -> Result<Graph> {
    parse_edge_list(&fs::read_to_string(path)?)
}

pub fn save_edge_list(g: &Graph, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, format_edge_list(g))?;
    Ok(())
}
