use std::io::{BufRead, Write};

use super::model::{TowerDims, TwoTowerParams};
use crate::error::{Error, Result};
use crate::numerics::{Dense, Matrix, Mlp};

const MAGIC: &str = "two-tower-checkpoint";
const VERSION: u32 = 1;

fn write_matrix<W: Write>(w: &mut W, name: &str, m: &Matrix) -> Result<()> {
    writeln!(w, "matrix {name} {} {}", m.rows(), m.cols())?;
    for i in 0..m.rows() {
        let row: Vec<String> = m.row(i).iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

fn write_mlp<W: Write>(w: &mut W, prefix: &str, mlp: &Mlp) -> Result<()> {
    for (k, layer) in mlp.layers.iter().enumerate() {
        write_matrix(w, &format!("{prefix}.{k}.weight"), &layer.weight)?;
        let bias = Matrix::from_vec(1, layer.bias.len(), layer.bias.clone())?;
        write_matrix(w, &format!("{prefix}.{k}.bias"), &bias)?;
    }
    Ok(())
}

/// Versioned text checkpoint: a header with the slot widths and layer
/// counts, then every matrix with its name and shape.
pub fn write_checkpoint<W: Write>(params: &TwoTowerParams, mut w: W) -> Result<()> {
    let d = params.dims;
    writeln!(w, "{MAGIC} version={VERSION}")?;
    writeln!(
        w,
        "use_gnn_features={} d_gnn={} d_text={} d_id={} aux_dim={} item_layers={} user_layers={}",
        params.use_gnn_features,
        d.d_gnn,
        d.d_text,
        d.d_id,
        d.aux_dim,
        params.item_tower.layers.len(),
        params.user_tower.layers.len()
    )?;
    write_matrix(&mut w, "id_table", &params.id_table)?;
    write_mlp(&mut w, "item", &params.item_tower)?;
    write_mlp(&mut w, "user", &params.user_tower)?;
    Ok(())
}

struct Lines<R: BufRead> {
    inner: std::io::Lines<R>,
    line: usize,
}

impl<R: BufRead> Lines<R> {
    fn next_line(&mut self) -> Result<String> {
        self.line += 1;
        match self.inner.next() {
            Some(l) => Ok(l?),
            None => Err(Error::parse(self.line, "unexpected end of checkpoint")),
        }
    }

    fn matrix(&mut self, name: &str, shape: Option<(usize, usize)>) -> Result<Matrix> {
        let header = self.next_line()?;
        let parts: Vec<&str> = header.split_whitespace().collect();
        if parts.len() != 4 || parts[0] != "matrix" || parts[1] != name {
            return Err(Error::parse(self.line, format!("expected `matrix {name} <rows> <cols>`, got `{header}`")));
        }
        let dim = |s: &str| s.parse::<usize>().map_err(|e| Error::parse(self.line, format!("bad dimension: {e}")));
        let (rows, cols) = (dim(parts[2])?, dim(parts[3])?);
        if let Some((r, c)) = shape {
            if r != rows {
                return Err(Error::DimensionMismatch { context: "checkpoint matrix rows", expected: r, actual: rows });
            }
            if c != cols {
                return Err(Error::DimensionMismatch { context: "checkpoint matrix cols", expected: c, actual: cols });
            }
        }
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let line = self.next_line()?;
            let start = data.len();
            for v in line.split(',').filter(|s| !s.is_empty()) {
                data.push(v.parse::<f64>().map_err(|e| Error::parse(self.line, format!("bad value `{v}`: {e}")))?);
            }
            if data.len() - start != cols {
                return Err(Error::DimensionMismatch { context: "checkpoint row width", expected: cols, actual: data.len() - start });
            }
        }
        Matrix::from_vec(rows, cols, data)
    }

    fn mlp(&mut self, prefix: &str, n_layers: usize, input: usize) -> Result<Mlp> {
        let mut layers = Vec::with_capacity(n_layers);
        let mut width = input;
        for k in 0..n_layers {
            let weight = self.matrix(&format!("{prefix}.{k}.weight"), None)?;
            if weight.cols() != width {
                return Err(Error::DimensionMismatch { context: "checkpoint layer input", expected: width, actual: weight.cols() });
            }
            let bias = self.matrix(&format!("{prefix}.{k}.bias"), Some((1, weight.rows())))?;
            width = weight.rows();
            layers.push(Dense { weight, bias: bias.into_vec() });
        }
        Ok(Mlp { layers })
    }
}

fn header_fields(line: &str, lineno: usize) -> Result<Vec<(String, String)>> {
    line.split_whitespace()
        .map(|tok| {
            tok.split_once('=')
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .ok_or_else(|| Error::parse(lineno, format!("bad header token `{tok}`")))
        })
        .collect()
}

pub fn read_checkpoint<R: BufRead>(reader: R) -> Result<TwoTowerParams> {
    let mut lines = Lines { inner: reader.lines(), line: 0 };
    let first = lines.next_line()?;
    let version = first
        .strip_prefix(MAGIC)
        .and_then(|rest| rest.trim().strip_prefix("version="))
        .ok_or_else(|| Error::parse(1, "not a two-tower checkpoint"))?;
    if version != VERSION.to_string() {
        return Err(Error::parse(1, format!("unsupported checkpoint version {version}")));
    }
    let fields = header_fields(&lines.next_line()?, 2)?;
    let get = |key: &str| {
        fields
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| Error::parse(2, format!("missing header field `{key}`")))
    };
    let num = |key: &str| -> Result<usize> {
        get(key)?.parse().map_err(|e| Error::parse(2, format!("bad `{key}`: {e}")))
    };
    let use_gnn_features: bool = get("use_gnn_features")?
        .parse()
        .map_err(|e| Error::parse(2, format!("bad `use_gnn_features`: {e}")))?;
    let dims = TowerDims { d_gnn: num("d_gnn")?, d_text: num("d_text")?, d_id: num("d_id")?, aux_dim: num("aux_dim")? };
    let (item_layers, user_layers) = (num("item_layers")?, num("user_layers")?);
    if item_layers == 0 || user_layers == 0 {
        return Err(Error::parse(2, "towers need at least one layer"));
    }
    let id_table = lines.matrix("id_table", None)?;
    if id_table.cols() != dims.d_id {
        return Err(Error::DimensionMismatch { context: "checkpoint id table width", expected: dims.d_id, actual: id_table.cols() });
    }
    let item_tower = lines.mlp("item", item_layers, dims.item_input())?;
    let user_tower = lines.mlp("user", user_layers, dims.user_input())?;
    let params = TwoTowerParams { dims, use_gnn_features, id_table, item_tower, user_tower };
    params.validate()?;
    Ok(params)
}
