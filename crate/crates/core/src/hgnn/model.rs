use std::collections::HashMap;

use rand::Rng;

use crate::cograph::{sample_neighbors, HeteroGraph};
use crate::error::{Error, Result};
use crate::numerics::{l2_normalize_backward, l2_normalize_rows, Dense, Matrix};

/// GraphSAGE weights. Layer `k` maps `[self ‖ neighbors]` (width `2·d_in`)
/// to `d_out`; the same weights serve every node type.
#[derive(Debug, Clone, PartialEq)]
pub struct HgnnParams {
    pub layers: Vec<Dense>,
}

impl HgnnParams {
    /// `dims` lists the representation width at every depth, starting with
    /// `d_text` and ending with the output dimension.
    pub fn glorot<R: Rng + ?Sized>(dims: &[usize], rng: &mut R) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(Error::validation("need at least one layer and positive dimensions"));
        }
        let layers = dims.windows(2).map(|w| Dense::glorot(2 * w[0], w[1], rng)).collect();
        Ok(HgnnParams { layers })
    }

    pub fn zeros_like(&self) -> Self {
        HgnnParams {
            layers: self
                .layers
                .iter()
                .map(|l| Dense::zeros(l.input_dim(), l.output_dim()))
                .collect(),
        }
    }

    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim() / 2
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].output_dim()
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| l.weight.is_finite() && l.bias.iter().all(|b| b.is_finite()))
    }

    pub fn add_assign(&mut self, other: &HgnnParams) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weight.add_assign(&b.weight);
            a.bias.iter_mut().zip(&b.bias).for_each(|(x, y)| *x += y);
        }
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.layers.iter().map(Dense::param_len).sum());
        self.layers.iter().for_each(|l| l.write_flat(&mut out));
        out
    }

    pub fn set_flat(&mut self, src: &[f64]) {
        let mut off = 0;
        for l in &mut self.layers {
            off += l.read_flat(&src[off..]);
        }
    }

    fn check(&self, d_text: usize) -> Result<()> {
        if self.input_dim() != d_text {
            return Err(Error::DimensionMismatch {
                context: "hgnn layer-0 input",
                expected: self.input_dim(),
                actual: d_text,
            });
        }
        for w in self.layers.windows(2) {
            if w[1].input_dim() != 2 * w[0].output_dim() {
                return Err(Error::DimensionMismatch {
                    context: "hgnn layer chaining",
                    expected: 2 * w[0].output_dim(),
                    actual: w[1].input_dim(),
                });
            }
        }
        Ok(())
    }
}

/// A node that is not in the stored graph, wired up by its own edge list.
#[derive(Debug, Clone, PartialEq)]
pub struct NewItem {
    pub item_id: u64,
    pub item_type: String,
    pub features: Vec<f64>,
    /// Item ids of existing graph nodes it connects to.
    pub edges: Vec<u64>,
}

/// Per-relation neighbor lists of a virtual node, sorted by node index.
struct VirtualNode<'a> {
    item_id: u64,
    features: &'a [f64],
    neighbors: Vec<Vec<u32>>,
}

/// Graph plus an optional virtual node addressed as index `num_nodes()`.
pub(crate) struct Topology<'a> {
    graph: &'a HeteroGraph,
    features: &'a Matrix,
    extra: Option<VirtualNode<'a>>,
}

impl<'a> Topology<'a> {
    pub(crate) fn new(graph: &'a HeteroGraph, features: &'a Matrix) -> Result<Self> {
        if features.rows() != graph.num_nodes() || features.cols() != graph.d_text() {
            return Err(Error::DimensionMismatch {
                context: "hgnn node features",
                expected: graph.num_nodes() * graph.d_text(),
                actual: features.rows() * features.cols(),
            });
        }
        Ok(Topology { graph, features, extra: None })
    }

    fn with_new_item(mut self, item: &'a NewItem) -> Result<Self> {
        let g = self.graph;
        if item.features.len() != g.d_text() {
            return Err(Error::DimensionMismatch {
                context: "new item features",
                expected: g.d_text(),
                actual: item.features.len(),
            });
        }
        if !g.type_names().contains(&item.item_type) {
            return Err(Error::validation(format!("new item type `{}` is not a graph node type", item.item_type)));
        }
        let mut neighbors = vec![Vec::new(); g.num_relations()];
        for &id in &item.edges {
            let v = g.node_index(id).ok_or(Error::UnknownItem(id))?;
            let r = g
                .relation_between(&item.item_type, g.node_type(v))
                .expect("both types belong to the graph");
            neighbors[r].push(v as u32);
        }
        for list in &mut neighbors {
            list.sort_unstable();
            list.dedup();
        }
        self.extra = Some(VirtualNode { item_id: item.item_id, features: &item.features, neighbors });
        Ok(self)
    }

    fn virtual_index(&self) -> usize {
        self.graph.num_nodes()
    }

    fn sample(&self, node: usize, fanout: usize, seed: u64, layer: usize) -> Vec<Vec<u32>> {
        match &self.extra {
            Some(x) if node == self.virtual_index() => x
                .neighbors
                .iter()
                .enumerate()
                .map(|(r, ns)| sample_neighbors(ns, fanout, seed, x.item_id, layer, r))
                .collect(),
            _ => (0..self.graph.num_relations())
                .map(|r| sample_neighbors(self.graph.neighbors(node, r), fanout, seed, self.graph.node_id(node), layer, r))
                .collect(),
        }
    }

    fn feature_row(&self, node: usize) -> &[f64] {
        match &self.extra {
            Some(x) if node == self.virtual_index() => x.features,
            _ => self.features.row(node),
        }
    }
}

/// Aggregation plan for one node at one layer: its own row and, per
/// non-empty relation, the rows of its sampled neighbors in the level below.
#[derive(Debug, Clone)]
struct NodePlan {
    self_pos: usize,
    groups: Vec<Vec<usize>>,
}

/// Activations of a sampled forward pass, kept for backpropagation.
pub(crate) struct ForwardPass {
    /// `levels[k]`: node indices whose depth-`k` representation is computed.
    levels: Vec<Vec<usize>>,
    /// `plans[k-1][p]`: how node `levels[k][p]` aggregates from depth `k-1`.
    plans: Vec<Vec<NodePlan>>,
    /// `inputs[k-1]`: concatenated `[self ‖ neighbors]` rows fed to layer `k`.
    inputs: Vec<Matrix>,
    /// `hidden[k-1]`: post-ReLU activations at depth `k`, for `0 < k < L`.
    hidden: Vec<Matrix>,
    /// Pre-normalisation output rows, aligned with `levels[L]`.
    raw: Matrix,
    pub(crate) embeddings: Matrix,
}

impl ForwardPass {
    pub(crate) fn targets(&self) -> &[usize] {
        &self.levels[self.levels.len() - 1]
    }
}

/// Fanout used when computing depth `layer` (1-based) of an `n_layers`
/// model: `fanouts[0]` is the first hop out from the targets.
fn fanout_for(fanouts: &[usize], n_layers: usize, layer: usize) -> usize {
    fanouts[n_layers - layer]
}

pub(crate) fn forward_pass(
    topo: &Topology<'_>,
    params: &HgnnParams,
    targets: &[usize],
    fanouts: &[usize],
    seed: u64,
) -> Result<ForwardPass> {
    params.check(topo.graph.d_text())?;
    let n_layers = params.n_layers();
    if fanouts.len() != n_layers {
        return Err(Error::DimensionMismatch { context: "fanouts per layer", expected: n_layers, actual: fanouts.len() });
    }
    if fanouts.contains(&0) {
        return Err(Error::validation("fanouts must be >= 1"));
    }
    let limit = topo.graph.num_nodes() + usize::from(topo.extra.is_some());
    let mut top = Vec::with_capacity(targets.len());
    let mut seen = HashMap::new();
    for &t in targets {
        if t >= limit {
            return Err(Error::validation(format!("target node {t} is not in the graph")));
        }
        if let std::collections::hash_map::Entry::Vacant(e) = seen.entry(t) {
            e.insert(top.len());
            top.push(t);
        }
    }

    let mut levels = vec![Vec::new(); n_layers + 1];
    let mut plans = vec![Vec::new(); n_layers];
    levels[n_layers] = top;
    for k in (1..=n_layers).rev() {
        let upper = levels[k].clone();
        let mut lower = upper.clone();
        let mut pos: HashMap<usize, usize> = lower.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        let fanout = fanout_for(fanouts, n_layers, k);
        let mut layer_plans = Vec::with_capacity(upper.len());
        for (p, &v) in upper.iter().enumerate() {
            let sample = topo.sample(v, fanout, seed, k);
            let groups = sample
                .into_iter()
                .filter(|g| !g.is_empty())
                .map(|g| {
                    g.into_iter()
                        .map(|u| {
                            let u = u as usize;
                            *pos.entry(u).or_insert_with(|| {
                                lower.push(u);
                                lower.len() - 1
                            })
                        })
                        .collect()
                })
                .collect();
            layer_plans.push(NodePlan { self_pos: p, groups });
        }
        levels[k - 1] = lower;
        plans[k - 1] = layer_plans;
    }

    let d0 = topo.graph.d_text();
    let mut h = Matrix::zeros(levels[0].len(), d0);
    for (i, &v) in levels[0].iter().enumerate() {
        h.row_mut(i).copy_from_slice(topo.feature_row(v));
    }
    let mut inputs = Vec::with_capacity(n_layers);
    let mut hidden = Vec::with_capacity(n_layers.saturating_sub(1));
    for k in 1..=n_layers {
        let d = h.cols();
        let mut x = Matrix::zeros(levels[k].len(), 2 * d);
        for (p, plan) in plans[k - 1].iter().enumerate() {
            let row = x.row_mut(p);
            row[..d].copy_from_slice(h.row(plan.self_pos));
            if plan.groups.is_empty() {
                continue;
            }
            let agg = &mut row[d..];
            for g in &plan.groups {
                let mut mean = vec![0.0; d];
                for &u in g {
                    for (m, hv) in mean.iter_mut().zip(h.row(u)) {
                        *m += hv;
                    }
                }
                let inv = g.len() as f64;
                for (a, m) in agg.iter_mut().zip(&mean) {
                    *a += m / inv;
                }
            }
            let n_groups = plan.groups.len() as f64;
            agg.iter_mut().for_each(|a| *a /= n_groups);
        }
        let mut z = params.layers[k - 1].forward(&x)?;
        if k < n_layers {
            crate::numerics::relu_in_place(z.as_mut_slice());
        }
        inputs.push(x);
        if k < n_layers {
            hidden.push(z.clone());
        }
        h = z;
    }
    let embeddings = l2_normalize_rows(&h);
    Ok(ForwardPass { levels, plans, inputs, hidden, raw: h, embeddings })
}

/// Accumulates parameter gradients given `grad_emb`, the gradient of the
/// loss w.r.t. the normalised embeddings (rows aligned with the targets).
pub(crate) fn backward_pass(params: &HgnnParams, fp: &ForwardPass, grad_emb: &Matrix, grads: &mut HgnnParams) {
    let n_layers = params.n_layers();
    let mut g = Matrix::zeros(fp.raw.rows(), fp.raw.cols());
    for i in 0..fp.raw.rows() {
        l2_normalize_backward(fp.raw.row(i), grad_emb.row(i), g.row_mut(i));
    }
    for k in (1..=n_layers).rev() {
        let x = &fp.inputs[k - 1];
        let gx = params.layers[k - 1].backward(x, &g, &mut grads.layers[k - 1]);
        if k == 1 {
            break;
        }
        let d = x.cols() / 2;
        let mut gh = Matrix::zeros(fp.levels[k - 1].len(), d);
        for (p, plan) in fp.plans[k - 1].iter().enumerate() {
            let row = gx.row(p);
            for (a, b) in gh.row_mut(plan.self_pos).iter_mut().zip(&row[..d]) {
                *a += b;
            }
            let n_groups = plan.groups.len() as f64;
            for grp in &plan.groups {
                let scale = 1.0 / (n_groups * grp.len() as f64);
                for &u in grp {
                    for (a, b) in gh.row_mut(u).iter_mut().zip(&row[d..]) {
                        *a += b * scale;
                    }
                }
            }
        }
        for (gv, &hv) in gh.as_mut_slice().iter_mut().zip(fp.hidden[k - 2].as_slice()) {
            if hv <= 0.0 {
                *gv = 0.0;
            }
        }
        g = gh;
    }
}

/// Unit-norm (or all-zero) embeddings of `targets`, rows in the order given.
pub fn hgnn_forward(
    graph: &HeteroGraph,
    features: &Matrix,
    params: &HgnnParams,
    targets: &[usize],
    fanouts: &[usize],
    seed: u64,
) -> Result<Matrix> {
    let topo = Topology::new(graph, features)?;
    let fp = forward_pass(&topo, params, targets, fanouts, seed)?;
    Ok(gather_rows(&fp, targets))
}

pub(crate) fn gather_rows(fp: &ForwardPass, targets: &[usize]) -> Matrix {
    let pos: HashMap<usize, usize> = fp.targets().iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let d = fp.embeddings.cols();
    let mut out = Matrix::zeros(targets.len(), d);
    for (i, t) in targets.iter().enumerate() {
        out.row_mut(i).copy_from_slice(fp.embeddings.row(pos[t]));
    }
    out
}

/// Embeds an item absent from the graph using its own features and edges.
/// Existing nodes keep their stored adjacency.
pub fn infer_new_item(
    graph: &HeteroGraph,
    features: &Matrix,
    params: &HgnnParams,
    item: &NewItem,
    fanouts: &[usize],
    seed: u64,
) -> Result<Vec<f64>> {
    let topo = Topology::new(graph, features)?.with_new_item(item)?;
    let target = topo.virtual_index();
    let fp = forward_pass(&topo, params, &[target], fanouts, seed)?;
    Ok(fp.embeddings.row(0).to_vec())
}
