use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use rayon::prelude::*;

use super::model::{hgnn_forward, HgnnParams};
use crate::cograph::HeteroGraph;
use crate::error::{Error, Result};
use crate::numerics::{norm, Matrix};

/// Exported per-item foundation embeddings, keyed by top-level item id.
#[derive(Debug, Clone, PartialEq)]
pub struct ItemEmbeddingStore {
    dim: usize,
    snapshot: String,
    vectors: BTreeMap<u64, Vec<f64>>,
}

impl ItemEmbeddingStore {
    pub fn new(dim: usize, snapshot: impl Into<String>) -> Result<Self> {
        let snapshot = snapshot.into();
        if snapshot.is_empty() || snapshot.contains(char::is_whitespace) {
            return Err(Error::validation(format!("snapshot id `{snapshot}` must be non-empty without whitespace")));
        }
        Ok(ItemEmbeddingStore { dim, snapshot, vectors: BTreeMap::new() })
    }

    /// Inserts a vector, which must be unit-norm (within 1e-9) or all zero.
    pub fn insert(&mut self, item_id: u64, vector: Vec<f64>) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::DimensionMismatch { context: "embedding store vector", expected: self.dim, actual: vector.len() });
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("embedding store vector"));
        }
        let n = norm(&vector);
        if n != 0.0 && (n - 1.0).abs() > 1e-9 {
            return Err(Error::validation(format!("embedding for item {item_id} has norm {n}, expected 1 or 0")));
        }
        self.vectors.insert(item_id, vector);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn snapshot(&self) -> &str {
        &self.snapshot
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, item_id: u64) -> Option<&[f64]> {
        self.vectors.get(&item_id).map(Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, &[f64])> {
        self.vectors.iter().map(|(k, v)| (*k, v.as_slice()))
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "d={} n={} snapshot={}", self.dim, self.vectors.len(), self.snapshot)?;
        for (id, v) in &self.vectors {
            let values: Vec<String> = v.iter().map(|x| x.to_string()).collect();
            writeln!(w, "{id}\t{}", values.join(","))?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines();
        let header = lines.next().ok_or_else(|| Error::parse(1, "missing header"))??;
        let (mut d, mut n, mut snap) = (None, None, None);
        for tok in header.split_whitespace() {
            let (k, v) = tok.split_once('=').ok_or_else(|| Error::parse(1, format!("bad header token `{tok}`")))?;
            match k {
                "d" => d = Some(v.parse::<usize>().map_err(|e| Error::parse(1, format!("bad d: {e}")))?),
                "n" => n = Some(v.parse::<usize>().map_err(|e| Error::parse(1, format!("bad n: {e}")))?),
                "snapshot" => snap = Some(v.to_string()),
                _ => return Err(Error::parse(1, format!("unknown header key `{k}`"))),
            }
        }
        let (d, n, snap) = match (d, n, snap) {
            (Some(d), Some(n), Some(s)) => (d, n, s),
            _ => return Err(Error::parse(1, "header must define d, n and snapshot")),
        };
        let mut store = ItemEmbeddingStore::new(d, snap)?;
        for (i, line) in lines.enumerate() {
            let line = line?;
            let lineno = i + 2;
            if line.trim().is_empty() {
                continue;
            }
            let (id, values) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(lineno, "expected `item_id<TAB>v1,v2,...`"))?;
            let id: u64 = id.parse().map_err(|e| Error::parse(lineno, format!("bad item id: {e}")))?;
            let v = values
                .split(',')
                .map(|s| s.parse::<f64>().map_err(|e| Error::parse(lineno, format!("bad value `{s}`: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            if store.vectors.contains_key(&id) {
                return Err(Error::parse(lineno, format!("duplicate item {id}")));
            }
            store.insert(id, v).map_err(|e| Error::parse(lineno, e.to_string()))?;
        }
        if store.len() != n {
            return Err(Error::validation(format!("store header declares {n} vectors, found {}", store.len())));
        }
        Ok(store)
    }
}

const EXPORT_CHUNK: usize = 256;

/// Embeds every graph node and collects the vectors into a store.
pub fn export_embeddings(
    graph: &HeteroGraph,
    features: &Matrix,
    params: &HgnnParams,
    fanouts: &[usize],
    seed: u64,
    snapshot: &str,
) -> Result<ItemEmbeddingStore> {
    let nodes: Vec<usize> = (0..graph.num_nodes()).collect();
    let parts: Vec<Result<Matrix>> = nodes
        .par_chunks(EXPORT_CHUNK)
        .map(|chunk| hgnn_forward(graph, features, params, chunk, fanouts, seed))
        .collect();
    let mut store = ItemEmbeddingStore::new(params.output_dim(), snapshot)?;
    for (chunk, part) in nodes.chunks(EXPORT_CHUNK).zip(parts) {
        let emb = part?;
        for (i, &v) in chunk.iter().enumerate() {
            store.insert(graph.node_id(v), emb.row(i).to_vec())?;
        }
    }
    Ok(store)
}
