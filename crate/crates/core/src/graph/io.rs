//! Plain-text dataset directories.
//!
//! ```text
//! <dir>/edges.txt      "# nodes N" header, then one "u v" pair per line
//! <dir>/labels.txt     optional, one integer class id per line
//! <dir>/features.csv   optional, one comma-separated row per node
//! ```
//!
//! Blank lines and lines starting with `#` are ignored in every file. When the
//! edge file has no `# nodes` header the node count is taken from the labels,
//! then the features, then the largest node id seen.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;

use super::Graph;
use crate::error::{Error, Result};

pub const EDGES_FILE: &str = "edges.txt";
pub const LABELS_FILE: &str = "labels.txt";
pub const FEATURES_FILE: &str = "features.csv";

fn parse_err(file: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        file: file.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn read_edges(path: &Path) -> Result<(Option<usize>, Vec<(usize, usize, usize)>)> {
    let text = fs::read_to_string(path)?;
    let mut header = None;
    for line in text.lines().map(str::trim) {
        if let Some(rest) = line.strip_prefix('#') {
            if let Some(n) = rest.trim().strip_prefix("nodes") {
                let n = n.trim_start_matches([':', ' ']).trim();
                header = Some(
                    n.parse::<usize>()
                        .map_err(|_| parse_err(path, 1, format!("bad node count `{n}`")))?,
                );
                break;
            }
        }
    }
    let mut edges = Vec::new();
    for (lineno, line) in content_lines(&text) {
        let mut it = line.split_whitespace();
        let mut next_id = || -> Result<usize> {
            let tok = it
                .next()
                .ok_or_else(|| parse_err(path, lineno, "expected two node ids"))?;
            tok.parse()
                .map_err(|_| parse_err(path, lineno, format!("invalid node id `{tok}`")))
        };
        let u = next_id()?;
        let v = next_id()?;
        if it.next().is_some() {
            return Err(parse_err(path, lineno, "trailing tokens after edge"));
        }
        edges.push((lineno, u, v));
    }
    Ok((header, edges))
}

fn read_labels(path: &Path) -> Result<Vec<usize>> {
    let text = fs::read_to_string(path)?;
    content_lines(&text)
        .map(|(lineno, l)| {
            l.parse()
                .map_err(|_| parse_err(path, lineno, format!("invalid label `{l}`")))
        })
        .collect()
}

fn read_features(path: &Path) -> Result<Array2<f64>> {
    let text = fs::read_to_string(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (row_idx, (lineno, line)) in content_lines(&text).enumerate() {
        let row: Vec<f64> = line
            .split(',')
            .map(|t| {
                t.trim().parse::<f64>().map_err(|_| {
                    parse_err(path, lineno, format!("row {row_idx}: invalid value `{}`", t.trim()))
                })
            })
            .collect::<Result<_>>()?;
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(parse_err(
                    path,
                    lineno,
                    format!("row {row_idx} has {} columns, expected {w}", row.len()),
                ))
            }
            _ => {}
        }
        rows.push(row);
    }
    let w = width.unwrap_or(0);
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Ok(Array2::from_shape_vec((rows.len(), w), flat).expect("validated row widths"))
}

/// Load a dataset directory written by [`save_dataset`] (or by hand).
pub fn load_dataset(dir: impl AsRef<Path>) -> Result<Graph> {
    let dir = dir.as_ref();
    let edges_path = dir.join(EDGES_FILE);
    let (header, edges) = read_edges(&edges_path)?;
    let labels_path = dir.join(LABELS_FILE);
    let labels = labels_path.exists().then(|| read_labels(&labels_path)).transpose()?;
    let features_path = dir.join(FEATURES_FILE);
    let features = features_path
        .exists()
        .then(|| read_features(&features_path))
        .transpose()?;

    let n = header
        .or(labels.as_ref().map(Vec::len))
        .or(features.as_ref().map(Array2::nrows))
        .unwrap_or_else(|| edges.iter().map(|&(_, u, v)| u.max(v) + 1).max().unwrap_or(0));

    let mut pairs = Vec::with_capacity(edges.len());
    for (lineno, u, v) in edges {
        if u >= n || v >= n {
            return Err(parse_err(
                &edges_path,
                lineno,
                format!("node id {} out of range for {n} nodes", u.max(v)),
            ));
        }
        if u == v {
            return Err(parse_err(&edges_path, lineno, format!("self-loop on node {u}")));
        }
        pairs.push((u, v));
    }
    let mut g = Graph::from_edges(n, &pairs)?;
    if let Some(l) = labels {
        if l.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{}: {} labels for {n} nodes",
                labels_path.display(),
                l.len()
            )));
        }
        g = g.with_labels(l)?;
    }
    if let Some(x) = features {
        if x.nrows() != n {
            return Err(Error::DimensionMismatch(format!(
                "{}: {} feature rows for {n} nodes",
                features_path.display(),
                x.nrows()
            )));
        }
        g = g.with_features(x)?;
    }
    Ok(g)
}

/// Write `g` into `dir` (created if needed). Returns the files written.
pub fn save_dataset(g: &Graph, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();

    let mut s = format!("# nodes {}\n", g.num_nodes());
    for (u, v) in g.edges() {
        let _ = writeln!(s, "{u} {v}");
    }
    let path = dir.join(EDGES_FILE);
    fs::write(&path, s)?;
    written.push(path);

    if let Some(labels) = g.labels() {
        let mut s = String::new();
        for l in labels {
            let _ = writeln!(s, "{l}");
        }
        let path = dir.join(LABELS_FILE);
        fs::write(&path, s)?;
        written.push(path);
    }
    if let Some(x) = g.features() {
        let mut s = String::new();
        for row in x.rows() {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            let _ = writeln!(s, "{}", cells.join(","));
        }
        let path = dir.join(FEATURES_FILE);
        fs::write(&path, s)?;
        written.push(path);
    }
    Ok(written)
}
