//! Heterogeneous item-item co-interaction graph.
//!
//! Nodes are top-level catalog items; two items are joined when at least
//! `min_co_users` users consumed both. Child items (episodes) are lifted to
//! their parent before pairing. Each unordered pair of top-level types is a
//! relation with its own symmetric CSR adjacency.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};

use rand::seq::index;

use crate::corpus::{Catalog, InteractionEvent};
use crate::error::{Error, Result};
use crate::kv::KvMap;
use crate::numerics::Matrix;
use crate::rng;

/// Unordered pair of top-level type names, stored with `type_a <= type_b`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RelationType {
    pub type_a: String,
    pub type_b: String,
}

impl RelationType {
    pub fn new(a: &str, b: &str) -> Self {
        let (type_a, type_b) = if a <= b { (a, b) } else { (b, a) };
        RelationType { type_a: type_a.to_string(), type_b: type_b.to_string() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphBuildConfig {
    pub min_co_users: u32,
    /// Most recent distinct items kept per user before pairing.
    pub max_items_per_user: usize,
    /// Half-open `[start, end)` timestamp window; `None` keeps every event.
    pub window: Option<(i64, i64)>,
}

impl Default for GraphBuildConfig {
    fn default() -> Self {
        GraphBuildConfig { min_co_users: 1, max_items_per_user: 100, window: None }
    }
}

impl GraphBuildConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_co_users < 1 {
            return Err(Error::validation("min_co_users must be >= 1"));
        }
        if self.max_items_per_user < 2 {
            return Err(Error::validation("max_items_per_user must be >= 2"));
        }
        if let Some((s, e)) = self.window {
            if s >= e {
                return Err(Error::validation(format!("empty observation window [{s}, {e})")));
            }
        }
        Ok(())
    }

    /// Reads `min_co_users` and `max_items_per_user`; the window is left
    /// to the caller.
    pub fn from_kv(kv: &KvMap) -> Result<Self> {
        let mut c = GraphBuildConfig::default();
        c.read_kv(kv)?;
        Ok(c)
    }

    /// Overlays the keys present in `kv`.
    pub fn read_kv(&mut self, kv: &KvMap) -> Result<()> {
        kv.read("min_co_users", &mut self.min_co_users)?;
        kv.read("max_items_per_user", &mut self.max_items_per_user)
    }

    pub fn to_kv(&self) -> KvMap {
        let mut kv = KvMap::default();
        kv.insert("min_co_users", self.min_co_users);
        kv.insert("max_items_per_user", self.max_items_per_user);
        kv
    }
}

/// Compressed sparse rows over all graph nodes.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Csr {
    offsets: Vec<usize>,
    neighbors: Vec<u32>,
    weights: Vec<u32>,
}

impl Csr {
    /// `edges` holds `(a, b, w)` with `a < b`; both directions are stored and
    /// each row is sorted by neighbor index.
    fn symmetric(n: usize, edges: &[(u32, u32, u32)]) -> Self {
        let mut rows: Vec<Vec<(u32, u32)>> = vec![Vec::new(); n];
        for &(a, b, w) in edges {
            rows[a as usize].push((b, w));
            rows[b as usize].push((a, w));
        }
        let mut offsets = Vec::with_capacity(n + 1);
        let mut neighbors = Vec::new();
        let mut weights = Vec::new();
        offsets.push(0);
        for mut row in rows {
            row.sort_unstable();
            for (v, w) in row {
                neighbors.push(v);
                weights.push(w);
            }
            offsets.push(neighbors.len());
        }
        Csr { offsets, neighbors, weights }
    }

    fn row(&self, v: usize) -> (&[u32], &[u32]) {
        let (s, e) = (self.offsets[v], self.offsets[v + 1]);
        (&self.neighbors[s..e], &self.weights[s..e])
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Relation {
    kind: RelationType,
    adj: Csr,
}

/// An undirected edge between node indices `a < b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub weight: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeteroGraph {
    node_ids: Vec<u64>,
    node_types: Vec<usize>,
    type_names: Vec<String>,
    index: HashMap<u64, usize>,
    relations: Vec<Relation>,
    d_text: usize,
}

impl HeteroGraph {
    /// Assembles a graph from nodes and undirected edges given by node index.
    /// Self-loops are rejected; duplicate pairs are rejected.
    pub fn from_edges(
        nodes: Vec<(u64, String)>,
        type_names: Vec<String>,
        edges: &[Edge],
        d_text: usize,
    ) -> Result<Self> {
        let mut type_names = type_names;
        type_names.sort();
        type_names.dedup();
        let mut index = HashMap::with_capacity(nodes.len());
        let mut node_ids = Vec::with_capacity(nodes.len());
        let mut node_types = Vec::with_capacity(nodes.len());
        for (i, (id, ty)) in nodes.into_iter().enumerate() {
            let t = type_names
                .iter()
                .position(|n| *n == ty)
                .ok_or_else(|| Error::validation(format!("node {id} has type `{ty}` outside the graph's types")))?;
            if index.insert(id, i).is_some() {
                return Err(Error::validation(format!("duplicate node {id}")));
            }
            node_ids.push(id);
            node_types.push(t);
        }
        let mut kinds = Vec::new();
        for (i, a) in type_names.iter().enumerate() {
            for b in &type_names[i..] {
                kinds.push(RelationType::new(a, b));
            }
        }
        kinds.sort();
        let mut per_relation: Vec<Vec<(u32, u32, u32)>> = vec![Vec::new(); kinds.len()];
        let mut seen = std::collections::HashSet::new();
        for e in edges {
            if e.a >= e.b || e.b >= node_ids.len() {
                return Err(Error::validation(format!("invalid edge ({}, {})", e.a, e.b)));
            }
            if !seen.insert((e.a, e.b)) {
                return Err(Error::validation(format!(
                    "duplicate edge {} - {}",
                    node_ids[e.a], node_ids[e.b]
                )));
            }
            let kind = RelationType::new(&type_names[node_types[e.a]], &type_names[node_types[e.b]]);
            let r = kinds.binary_search(&kind).expect("all type pairs enumerated");
            per_relation[r].push((e.a as u32, e.b as u32, e.weight));
        }
        let relations = kinds
            .into_iter()
            .zip(per_relation)
            .map(|(kind, es)| Relation { kind, adj: Csr::symmetric(node_ids.len(), &es) })
            .collect();
        Ok(HeteroGraph { node_ids, node_types, type_names, index, relations, d_text })
    }

    pub fn num_nodes(&self) -> usize {
        self.node_ids.len()
    }

    pub fn num_relations(&self) -> usize {
        self.relations.len()
    }

    pub fn d_text(&self) -> usize {
        self.d_text
    }

    pub fn node_id(&self, node: usize) -> u64 {
        self.node_ids[node]
    }

    pub fn node_ids(&self) -> &[u64] {
        &self.node_ids
    }

    pub fn node_type(&self, node: usize) -> &str {
        &self.type_names[self.node_types[node]]
    }

    pub fn type_names(&self) -> &[String] {
        &self.type_names
    }

    pub fn node_index(&self, item_id: u64) -> Option<usize> {
        self.index.get(&item_id).copied()
    }

    pub fn relation(&self, r: usize) -> &RelationType {
        &self.relations[r].kind
    }

    /// Relation index connecting nodes of the two given types.
    pub fn relation_between(&self, type_a: &str, type_b: &str) -> Option<usize> {
        let kind = RelationType::new(type_a, type_b);
        self.relations.iter().position(|r| r.kind == kind)
    }

    pub fn neighbors(&self, node: usize, relation: usize) -> &[u32] {
        self.relations[relation].adj.row(node).0
    }

    pub fn neighbor_weights(&self, node: usize, relation: usize) -> &[u32] {
        self.relations[relation].adj.row(node).1
    }

    pub fn degree(&self, node: usize) -> usize {
        (0..self.relations.len()).map(|r| self.neighbors(node, r).len()).sum()
    }

    pub fn max_degree(&self) -> usize {
        (0..self.num_nodes()).map(|v| self.degree(v)).max().unwrap_or(0)
    }

    /// Every undirected edge once, as `(a < b)`, ordered by `(a, b)`.
    pub fn edges(&self) -> Vec<Edge> {
        let mut out = Vec::new();
        for rel in &self.relations {
            for a in 0..self.num_nodes() {
                let (ns, ws) = rel.adj.row(a);
                for (&b, &w) in ns.iter().zip(ws) {
                    if (b as usize) > a {
                        out.push(Edge { a, b: b as usize, weight: w });
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }

    pub fn num_edges(&self) -> usize {
        self.relations.iter().map(|r| r.adj.neighbors.len()).sum::<usize>() / 2
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        let r = match self.relation_between(self.node_type(a), self.node_type(b)) {
            Some(r) => r,
            None => return false,
        };
        self.neighbors(a, r).binary_search(&(b as u32)).is_ok()
    }

    /// Per-relation neighbor sample for `node` at GraphSAGE `layer`: all
    /// neighbors when the degree is within `fanout`, otherwise `fanout`
    /// distinct ones drawn uniformly. Keyed on `(seed, item_id, layer)`.
    pub fn neighbor_sample(&self, node: usize, fanout: usize, seed: u64, layer: usize) -> Result<Vec<Vec<u32>>> {
        if node >= self.num_nodes() {
            return Err(Error::validation(format!("unknown node index {node}")));
        }
        if fanout < 1 {
            return Err(Error::validation("fanout must be >= 1"));
        }
        let key = self.node_ids[node];
        Ok((0..self.relations.len())
            .map(|r| sample_neighbors(self.neighbors(node, r), fanout, seed, key, layer, r))
            .collect())
    }

    /// Rows of `catalog_features` (catalog order) rearranged into node order.
    pub fn node_features(&self, catalog: &Catalog, catalog_features: &Matrix) -> Result<Matrix> {
        if catalog_features.cols() != self.d_text {
            return Err(Error::DimensionMismatch {
                context: "graph node features",
                expected: self.d_text,
                actual: catalog_features.cols(),
            });
        }
        let mut m = Matrix::zeros(self.num_nodes(), self.d_text);
        for (v, &id) in self.node_ids.iter().enumerate() {
            let row = catalog.position(id).ok_or(Error::UnknownItem(id))?;
            m.row_mut(v).copy_from_slice(catalog_features.row(row));
        }
        Ok(m)
    }

    /// Copy without the given edges (matched on endpoints).
    pub fn without_edges(&self, removed: &[Edge]) -> Result<HeteroGraph> {
        let drop: std::collections::HashSet<(usize, usize)> = removed.iter().map(|e| (e.a, e.b)).collect();
        let kept: Vec<Edge> = self.edges().into_iter().filter(|e| !drop.contains(&(e.a, e.b))).collect();
        let nodes = (0..self.num_nodes())
            .map(|v| (self.node_ids[v], self.node_type(v).to_string()))
            .collect();
        HeteroGraph::from_edges(nodes, self.type_names.clone(), &kept, self.d_text)
    }

    pub fn write_snapshot<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "nodes={} relations={} d_text={}", self.num_nodes(), self.relations.len(), self.d_text)?;
        for v in 0..self.num_nodes() {
            writeln!(w, "{}\t{}", self.node_ids[v], self.node_type(v))?;
        }
        for rel in &self.relations {
            let mut lines = Vec::new();
            for a in 0..self.num_nodes() {
                let (ns, ws) = rel.adj.row(a);
                for (&b, &wt) in ns.iter().zip(ws) {
                    let (ia, ib) = (self.node_ids[a], self.node_ids[b as usize]);
                    if ia < ib {
                        lines.push((ia, ib, wt));
                    }
                }
            }
            lines.sort_unstable();
            writeln!(w, "relation\t{}\t{}\t{}", rel.kind.type_a, rel.kind.type_b, lines.len())?;
            for (a, b, wt) in lines {
                writeln!(w, "{a}\t{b}\t{wt}")?;
            }
        }
        Ok(())
    }

    pub fn read_snapshot<R: BufRead>(reader: R) -> Result<HeteroGraph> {
        let mut lines = reader.lines().enumerate();
        let mut next = |what: &str| -> Result<(usize, String)> {
            match lines.next() {
                Some((i, l)) => Ok((i + 1, l?)),
                None => Err(Error::parse(0, format!("snapshot truncated: expected {what}"))),
            }
        };
        let (ln, header) = next("header")?;
        let mut n = None;
        let mut r = None;
        let mut d = None;
        for tok in header.split_whitespace() {
            let (k, v) = tok
                .split_once('=')
                .ok_or_else(|| Error::parse(ln, format!("bad header token `{tok}`")))?;
            let v: usize = v.parse().map_err(|e| Error::parse(ln, format!("bad header value `{v}`: {e}")))?;
            match k {
                "nodes" => n = Some(v),
                "relations" => r = Some(v),
                "d_text" => d = Some(v),
                _ => return Err(Error::parse(ln, format!("unknown header key `{k}`"))),
            }
        }
        let (n, r, d) = match (n, r, d) {
            (Some(n), Some(r), Some(d)) => (n, r, d),
            _ => return Err(Error::parse(ln, "header must define nodes, relations and d_text")),
        };
        let mut nodes = Vec::with_capacity(n);
        let mut type_names: Vec<String> = Vec::new();
        for _ in 0..n {
            let (ln, l) = next("node line")?;
            let (id, ty) = l
                .split_once('\t')
                .ok_or_else(|| Error::parse(ln, "node line must be `item_id<TAB>item_type`"))?;
            let id: u64 = id.parse().map_err(|e| Error::parse(ln, format!("bad node id: {e}")))?;
            if !type_names.iter().any(|t| t == ty) {
                type_names.push(ty.to_string());
            }
            nodes.push((id, ty.to_string()));
        }
        let index: HashMap<u64, usize> = nodes.iter().enumerate().map(|(i, (id, _))| (*id, i)).collect();
        let mut edges = Vec::new();
        for _ in 0..r {
            let (ln, l) = next("relation line")?;
            let f: Vec<&str> = l.split('\t').collect();
            if f.len() != 4 || f[0] != "relation" {
                return Err(Error::parse(ln, "expected `relation<TAB>type_a<TAB>type_b<TAB>count`"));
            }
            for t in &f[1..3] {
                if !type_names.iter().any(|x| x == t) {
                    type_names.push(t.to_string());
                }
            }
            let m: usize = f[3].parse().map_err(|e| Error::parse(ln, format!("bad edge count: {e}")))?;
            for _ in 0..m {
                let (ln, l) = next("edge line")?;
                let f: Vec<&str> = l.split('\t').collect();
                if f.len() != 3 {
                    return Err(Error::parse(ln, "edge line must be `src<TAB>dst<TAB>weight`"));
                }
                let parse = |s: &str| s.parse::<u64>().map_err(|e| Error::parse(ln, format!("bad edge field `{s}`: {e}")));
                let (src, dst, w) = (parse(f[0])?, parse(f[1])?, parse(f[2])?);
                if src >= dst {
                    return Err(Error::parse(ln, "edge endpoints must satisfy src < dst"));
                }
                let a = *index.get(&src).ok_or_else(|| Error::parse(ln, format!("edge references unknown node {src}")))?;
                let b = *index.get(&dst).ok_or_else(|| Error::parse(ln, format!("edge references unknown node {dst}")))?;
                let (a, b) = if a < b { (a, b) } else { (b, a) };
                edges.push(Edge { a, b, weight: w as u32 });
            }
        }
        let graph = HeteroGraph::from_edges(nodes, type_names, &edges, d)?;
        if graph.num_relations() != r {
            return Err(Error::validation(format!(
                "snapshot declares {r} relations but its types imply {}",
                graph.num_relations()
            )));
        }
        Ok(graph)
    }
}

/// Uniform sample without replacement of at most `fanout` entries of
/// `neighbors`, keyed on `(seed, key, layer, relation)`. Preserves the
/// original order of the chosen entries.
pub fn sample_neighbors(neighbors: &[u32], fanout: usize, seed: u64, key: u64, layer: usize, relation: usize) -> Vec<u32> {
    if neighbors.len() <= fanout {
        return neighbors.to_vec();
    }
    let mut r = rng::stream(seed, &[key, layer as u64, relation as u64]);
    let mut picked = index::sample(&mut r, neighbors.len(), fanout).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| neighbors[i]).collect()
}

/// Builds the co-interaction graph over every top-level catalog item.
pub fn build_graph(events: &[InteractionEvent], catalog: &Catalog, cfg: &GraphBuildConfig) -> Result<HeteroGraph> {
    cfg.validate()?;
    let type_names: Vec<String> = catalog.types().top_level().map(|t| t.name.clone()).collect();
    let nodes: Vec<(u64, String)> = catalog
        .top_level_items()
        .map(|r| (r.item_id, r.item_type.clone()))
        .collect();
    let index: HashMap<u64, usize> = nodes.iter().enumerate().map(|(i, (id, _))| (*id, i)).collect();

    // user -> (timestamp, node) with child items lifted to their parent
    let mut per_user: BTreeMap<u64, Vec<(i64, usize)>> = BTreeMap::new();
    for e in events {
        let top = catalog.lift(e.item_id)?;
        if let Some((s, end)) = cfg.window {
            if e.timestamp < s || e.timestamp >= end {
                continue;
            }
        }
        per_user.entry(e.user_id).or_default().push((e.timestamp, index[&top]));
    }

    let mut counts: HashMap<(u32, u32), u32> = HashMap::new();
    let mut distinct = Vec::new();
    for history in per_user.values_mut() {
        // most recent first; ties broken by node index for determinism
        history.sort_unstable_by(|x, y| y.0.cmp(&x.0).then(x.1.cmp(&y.1)));
        distinct.clear();
        for &(_, v) in history.iter() {
            if !distinct.contains(&v) {
                distinct.push(v);
                if distinct.len() == cfg.max_items_per_user {
                    break;
                }
            }
        }
        for i in 0..distinct.len() {
            for j in (i + 1)..distinct.len() {
                let (a, b) = if distinct[i] < distinct[j] { (distinct[i], distinct[j]) } else { (distinct[j], distinct[i]) };
                *counts.entry((a as u32, b as u32)).or_insert(0) += 1;
            }
        }
    }
    let mut edges: Vec<Edge> = counts
        .into_iter()
        .filter(|&(_, c)| c >= cfg.min_co_users)
        .map(|((a, b), c)| Edge { a: a as usize, b: b as usize, weight: c })
        .collect();
    edges.sort_unstable();
    HeteroGraph::from_edges(nodes, type_names, &edges, catalog.d_text().unwrap_or(0))
}

/// Holds out `floor(holdout_fraction * |E|)` uniformly chosen edges.
pub fn edge_split(graph: &HeteroGraph, holdout_fraction: f64, seed: u64) -> Result<(HeteroGraph, Vec<Edge>)> {
    if !(0.0..1.0).contains(&holdout_fraction) {
        return Err(Error::validation(format!("holdout_fraction must lie in [0, 1), got {holdout_fraction}")));
    }
    let all = graph.edges();
    let n_hold = (holdout_fraction * all.len() as f64).floor() as usize;
    if n_hold == 0 {
        return Ok((graph.clone(), Vec::new()));
    }
    let mut r = rng::stream(seed, &[0xed6e]);
    let mut picked = index::sample(&mut r, all.len(), n_hold).into_vec();
    picked.sort_unstable();
    let held: Vec<Edge> = picked.into_iter().map(|i| all[i]).collect();
    let train = graph.without_edges(&held)?;
    Ok((train, held))
}
