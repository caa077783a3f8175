use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::Graph;
use crate::tensor::Matrix;
use crate::{Error, Result};

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_id(tok: Option<&str>, line: usize, what: &str) -> Result<usize> {
    let tok = tok.ok_or_else(|| Error::Format {
        line,
        message: format!("missing {what}"),
    })?;
    tok.parse().map_err(|e| Error::Format {
        line,
        message: format!("bad {what} {tok:?}: {e}"),
    })
}

/// Reads an undirected edge list, one `u<TAB>v` pair per line.
///
/// `#` lines are comments, except `# nodes <n>`, which fixes the node count
/// (so isolated trailing nodes and edgeless graphs survive a round trip).
/// Without it the node count is one more than the largest id.
pub fn load_edge_list(path: impl AsRef<Path>) -> Result<Graph> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_edge_list(&text)
}

pub(crate) fn parse_edge_list(text: &str) -> Result<Graph> {
    let mut declared = None;
    for (i, l) in text.lines().enumerate() {
        if let Some(rest) = l.trim().strip_prefix('#').map(str::trim) {
            if let Some(count) = rest.strip_prefix("nodes ") {
                declared = Some(parse_id(Some(count.trim()), i + 1, "node count")?);
            }
        }
    }
    let mut edges = Vec::new();
    let mut max_id = None;
    for (line, l) in data_lines(text) {
        let mut toks = l.split_whitespace();
        let u = parse_id(toks.next(), line, "source id")?;
        let v = parse_id(toks.next(), line, "target id")?;
        if toks.next().is_some() {
            return Err(Error::Format {
                line,
                message: "expected exactly two ids".into(),
            });
        }
        max_id = Some(max_id.unwrap_or(0).max(u).max(v));
        edges.push((u, v));
    }
    let n = match (declared, max_id) {
        (Some(n), Some(m)) if m >= n => {
            return Err(Error::invalid(format!("node {m} exceeds declared count {n}")));
        }
        (Some(n), _) => n,
        (None, Some(m)) => m + 1,
        (None, None) => return Err(Error::invalid("edge list has no edges")),
    };
    Graph::from_edges(n, edges)
}

/// Reads `node_id<TAB>label` lines; every node below `n` needs a label.
pub fn load_labels(path: impl AsRef<Path>, n: usize) -> Result<Vec<usize>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut labels = vec![None; n];
    for (line, l) in data_lines(&text) {
        let mut toks = l.split_whitespace();
        let v = parse_id(toks.next(), line, "node id")?;
        let label = parse_id(toks.next(), line, "label")?;
        if v >= n {
            return Err(Error::Format {
                line,
                message: format!("node {v} out of range for n={n}"),
            });
        }
        labels[v] = Some(label);
    }
    labels
        .into_iter()
        .enumerate()
        .map(|(v, l)| l.ok_or_else(|| Error::invalid(format!("node {v} has no label"))))
        .collect()
}

/// Reads a comma-separated feature matrix; row `i` belongs to node `i`.
pub fn load_features_csv(path: impl AsRef<Path>, n: usize) -> Result<Matrix> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (line, l) in data_lines(&text) {
        let row: Vec<f64> = l
            .split(',')
            .map(|t| {
                t.trim().parse::<f64>().map_err(|e| Error::Format {
                    line,
                    message: format!("bad feature {t:?}: {e}"),
                })
            })
            .collect::<Result<_>>()?;
        match cols {
            None => cols = Some(row.len()),
            Some(c) if c != row.len() => {
                return Err(Error::Format {
                    line,
                    message: format!("expected {c} columns, got {}", row.len()),
                })
            }
            _ => {}
        }
        data.extend(row);
        rows += 1;
    }
    if rows != n {
        return Err(Error::invalid(format!("feature file has {rows} rows for {n} nodes")));
    }
    Matrix::new(rows, cols.unwrap_or(0), data)
}

/// Writes `header` as comment lines, a `# nodes <n>` line, then one
/// `u<TAB>v` line per edge with `u < v`.
pub fn write_edge_list(g: &Graph, path: impl AsRef<Path>, header: &str) -> Result<()> {
    let mut out = String::new();
    for line in header.lines() {
        let _ = writeln!(out, "# {line}");
    }
    let _ = writeln!(out, "# nodes {}", g.n());
    for (u, v) in g.edges() {
        let _ = writeln!(out, "{u}\t{v}");
    }
    let path = path.as_ref();
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn write_labels(labels: &[usize], path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::new();
    for (v, l) in labels.iter().enumerate() {
        let _ = writeln!(out, "{v}\t{l}");
    }
    let path = path.as_ref();
    fs::write(path, out).map_err(|e| Error::io(path, e))
}
