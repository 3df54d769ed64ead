//! Plain-text parameter dump.
//!
//! ```text
//! graphspde-checkpoint 1
//! <name> <ndim> <dim...>
//! <values, one row per line>
//! ...
//! ```
//!
//! Values use Rust's shortest round-trip formatting, so a save/load cycle is
//! bit-exact.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array1, Array2};

use super::{Dense, Mlp, ModelParams};
use crate::error::{Error, Result};

const MAGIC: &str = "graphspde-checkpoint 1";

pub fn save_checkpoint(params: &ModelParams, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::new();
    out.push_str(MAGIC);
    out.push('\n');
    for (name, shape, values) in params.tensors() {
        let dims: Vec<String> = shape.iter().map(|d| d.to_string()).collect();
        let _ = writeln!(out, "{name} {} {}", shape.len(), dims.join(" "));
        let row_len = *shape.last().unwrap_or(&1);
        for row in values.chunks(row_len.max(1)) {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            out.push_str(&cells.join(" "));
            out.push('\n');
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<ModelParams> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let perr = |line: usize, message: String| Error::Parse {
        file: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    match lines.next() {
        Some((_, l)) if l.trim() == MAGIC => {}
        _ => return Err(perr(1, format!("expected header '{MAGIC}'"))),
    }
    let mut tensors: BTreeMap<String, (Vec<usize>, Vec<f64>)> = BTreeMap::new();
    while let Some((ln, header)) = lines.next() {
        if header.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = header.split_whitespace().collect();
        let name = parts[0].to_string();
        let ndim: usize = parts
            .get(1)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| perr(ln, format!("bad tensor header '{header}'")))?;
        if parts.len() != 2 + ndim || !(1..=2).contains(&ndim) {
            return Err(perr(ln, format!("bad tensor header '{header}'")));
        }
        let shape: Vec<usize> = parts[2..]
            .iter()
            .map(|s| s.parse().map_err(|_| perr(ln, format!("bad dimension '{s}'"))))
            .collect::<Result<_>>()?;
        let total: usize = shape.iter().product();
        let mut values = Vec::with_capacity(total);
        while values.len() < total {
            let (vl, row) = lines
                .next()
                .ok_or_else(|| perr(ln, format!("tensor {name} truncated")))?;
            for tok in row.split_whitespace() {
                values.push(tok.parse::<f64>().map_err(|_| perr(vl, format!("bad value '{tok}'")))?);
            }
            if values.len() > total {
                return Err(perr(vl, format!("tensor {name} has too many values")));
            }
        }
        tensors.insert(name, (shape, values));
    }

    let mut store = Store { tensors, path };
    let encoder = store.dense("encoder")?;
    let mut gcn_weights = Vec::new();
    while store.tensors.contains_key(&format!("gcn.{}", gcn_weights.len())) {
        gcn_weights.push(store.matrix(&format!("gcn.{}", gcn_weights.len()))?);
    }
    let f_mlp = Mlp {
        hidden: store.dense("f_mlp.hidden")?,
        output: store.dense("f_mlp.output")?,
    };
    let g_mlp = Mlp {
        hidden: store.dense("g_mlp.hidden")?,
        output: store.dense("g_mlp.output")?,
    };
    let decoder = store.dense("decoder")?;
    if let Some(extra) = store.tensors.keys().next() {
        return Err(Error::InvalidParameter(format!("unexpected tensor {extra} in checkpoint")));
    }
    let params = ModelParams {
        encoder,
        gcn_weights,
        f_mlp,
        g_mlp,
        decoder,
    };
    check_shapes(&params)?;
    Ok(params)
}

struct Store<'a> {
    tensors: BTreeMap<String, (Vec<usize>, Vec<f64>)>,
    path: &'a Path,
}

impl Store<'_> {
    fn take(&mut self, name: &str, ndim: usize) -> Result<(Vec<usize>, Vec<f64>)> {
        let (shape, values) = self
            .tensors
            .remove(name)
            .ok_or_else(|| Error::Missing(format!("tensor {name} in {}", self.path.display())))?;
        if shape.len() != ndim {
            return Err(Error::DimensionMismatch(format!("tensor {name} must have {ndim} dimension(s)")));
        }
        Ok((shape, values))
    }

    fn matrix(&mut self, name: &str) -> Result<Array2<f64>> {
        let (shape, values) = self.take(name, 2)?;
        Array2::from_shape_vec((shape[0], shape[1]), values).map_err(|e| Error::DimensionMismatch(e.to_string()))
    }

    fn dense(&mut self, prefix: &str) -> Result<Dense> {
        let weight = self.matrix(&format!("{prefix}.weight"))?;
        let (_, bias) = self.take(&format!("{prefix}.bias"), 1)?;
        Ok(Dense {
            weight,
            bias: Array1::from(bias),
        })
    }
}

fn check_shapes(p: &ModelParams) -> Result<()> {
    let h = p.hidden_dim();
    let square = |w: &Array2<f64>| w.dim() == (h, h);
    let dense_ok = |d: &Dense, rows: usize, cols: usize| d.weight.dim() == (rows, cols) && d.bias.len() == cols;
    let ok = p.encoder.bias.len() == h
        && p.gcn_weights.iter().all(square)
        && [&p.f_mlp, &p.g_mlp]
            .iter()
            .all(|m| dense_ok(&m.hidden, h, h) && dense_ok(&m.output, h, h))
        && dense_ok(&p.decoder, h, p.num_classes());
    if ok {
        Ok(())
    } else {
        Err(Error::DimensionMismatch("checkpoint tensor shapes are inconsistent".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;

    #[test]
    fn round_trip_is_exact() {
        let cfg = ModelConfig {
            hidden: 5,
            gcn_layers: 2,
            ..Default::default()
        };
        let p = ModelParams::init(3, 4, &cfg, 12).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save_checkpoint(&p, &path).unwrap();
        assert_eq!(load_checkpoint(&path).unwrap(), p);
    }

    #[test]
    fn truncated_file_is_rejected() {
        let cfg = ModelConfig {
            hidden: 2,
            ..Default::default()
        };
        let p = ModelParams::init(2, 2, &cfg, 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save_checkpoint(&p, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let cut: Vec<&str> = text.lines().take(5).collect();
        std::fs::write(&path, cut.join("\n")).unwrap();
        assert!(load_checkpoint(&path).is_err());
        std::fs::write(&path, "not a checkpoint").unwrap();
        assert!(matches!(load_checkpoint(&path), Err(Error::Parse { line: 1, .. })));
    }
}
