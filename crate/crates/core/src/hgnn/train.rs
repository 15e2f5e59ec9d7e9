use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use super::model::{backward_pass, forward_pass, hgnn_forward, HgnnParams, Topology};
use crate::cograph::{edge_split, Edge, HeteroGraph};
use crate::error::{Error, Result};
use crate::kv::{join_list, KvMap};
use crate::numerics::{dot, AdamConfig, AdamState, Matrix};
use crate::rng;

/// Pairs per gradient work unit. Fixed so results do not depend on the
/// number of worker threads.
const CHUNK_PAIRS: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct HgnnConfig {
    pub n_layers: usize,
    pub hidden_dim: usize,
    pub out_dim: usize,
    /// Neighbor cap per hop, starting with the hop nearest the targets.
    pub fanouts: Vec<usize>,
    pub margin: f64,
    pub negatives_per_positive: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
    /// Fraction of edges held out for the per-epoch AUC.
    pub holdout_fraction: f64,
}

impl Default for HgnnConfig {
    fn default() -> Self {
        HgnnConfig {
            n_layers: 2,
            hidden_dim: 64,
            out_dim: 64,
            fanouts: vec![15, 10],
            margin: 0.4,
            negatives_per_positive: 5,
            epochs: 5,
            batch_size: 128,
            lr: 5e-3,
            seed: 0,
            holdout_fraction: 0.05,
        }
    }
}

impl HgnnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_layers < 1 || self.hidden_dim < 1 || self.out_dim < 1 {
            return Err(Error::validation("hgnn layers and dimensions must be >= 1"));
        }
        if self.fanouts.len() != self.n_layers {
            return Err(Error::validation(format!(
                "{} fanouts given for {} layers",
                self.fanouts.len(),
                self.n_layers
            )));
        }
        if self.fanouts.iter().any(|&f| f < 1) {
            return Err(Error::validation("fanouts must be >= 1"));
        }
        if !(self.margin > 0.0) {
            return Err(Error::validation("margin must be > 0"));
        }
        if self.negatives_per_positive < 1 || self.batch_size < 1 {
            return Err(Error::validation("negatives_per_positive and batch_size must be >= 1"));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::validation("lr must be a finite value >= 0"));
        }
        if !(0.0..1.0).contains(&self.holdout_fraction) {
            return Err(Error::validation("holdout_fraction must lie in [0, 1)"));
        }
        Ok(())
    }

    /// Representation width at every depth, from `d_text` to `out_dim`.
    pub fn dims(&self, d_text: usize) -> Vec<usize> {
        let mut dims = vec![d_text];
        dims.extend(std::iter::repeat_n(self.hidden_dim, self.n_layers - 1));
        dims.push(self.out_dim);
        dims
    }

    pub fn init_params(&self, d_text: usize) -> Result<HgnnParams> {
        let mut r = rng::stream(self.seed, &[0x1417]);
        HgnnParams::glorot(&self.dims(d_text), &mut r)
    }

    pub fn from_kv(kv: &KvMap) -> Result<Self> {
        let mut c = HgnnConfig::default();
        kv.read("n_layers", &mut c.n_layers)?;
        kv.read("hidden_dim", &mut c.hidden_dim)?;
        kv.read("out_dim", &mut c.out_dim)?;
        kv.read_list("fanouts", &mut c.fanouts)?;
        kv.read("margin", &mut c.margin)?;
        kv.read("negatives_per_positive", &mut c.negatives_per_positive)?;
        kv.read("epochs", &mut c.epochs)?;
        kv.read("batch_size", &mut c.batch_size)?;
        kv.read("lr", &mut c.lr)?;
        kv.read("seed", &mut c.seed)?;
        kv.read("holdout_fraction", &mut c.holdout_fraction)?;
        Ok(c)
    }

    pub fn to_kv(&self) -> KvMap {
        let mut kv = KvMap::default();
        kv.insert("n_layers", self.n_layers);
        kv.insert("hidden_dim", self.hidden_dim);
        kv.insert("out_dim", self.out_dim);
        kv.insert("fanouts", join_list(&self.fanouts));
        kv.insert("margin", self.margin);
        kv.insert("negatives_per_positive", self.negatives_per_positive);
        kv.insert("epochs", self.epochs);
        kv.insert("batch_size", self.batch_size);
        kv.insert("lr", self.lr);
        kv.insert("seed", self.seed);
        kv.insert("holdout_fraction", self.holdout_fraction);
        kv
    }
}

/// Hinge loss `max(0, q·n − q·p + margin)` and its gradients w.r.t. `q`, `p`, `n`.
pub fn margin_loss(q: &[f64], p: &[f64], n: &[f64], margin: f64) -> (f64, Vec<f64>, Vec<f64>, Vec<f64>) {
    let d = q.len();
    let loss = dot(q, n) - dot(q, p) + margin;
    if loss <= 0.0 {
        return (0.0, vec![0.0; d], vec![0.0; d], vec![0.0; d]);
    }
    let gq = n.iter().zip(p).map(|(a, b)| a - b).collect();
    let gp = q.iter().map(|x| -x).collect();
    let gn = q.to_vec();
    (loss, gq, gp, gn)
}

/// One positive pair with its sampled negatives, as node indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainingTuple {
    pub query: usize,
    pub positive: usize,
    pub negatives: Vec<usize>,
}

/// Summed hinge loss over `tuples` and the matching parameter gradient.
fn tuple_loss_sum(
    topo: &Topology<'_>,
    params: &HgnnParams,
    tuples: &[TrainingTuple],
    fanouts: &[usize],
    margin: f64,
    seed: u64,
) -> Result<(f64, HgnnParams)> {
    let mut targets = Vec::new();
    for t in tuples {
        targets.push(t.query);
        targets.push(t.positive);
        targets.extend_from_slice(&t.negatives);
    }
    let fp = forward_pass(topo, params, &targets, fanouts, seed)?;
    let pos: std::collections::HashMap<usize, usize> =
        fp.targets().iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let emb = &fp.embeddings;
    let mut grad_emb = Matrix::zeros(emb.rows(), emb.cols());
    let mut total = 0.0;
    for t in tuples {
        let (iq, ip) = (pos[&t.query], pos[&t.positive]);
        for n in &t.negatives {
            let i_n = pos[n];
            let (l, gq, gp, gn) = margin_loss(emb.row(iq), emb.row(ip), emb.row(i_n), margin);
            if l == 0.0 {
                continue;
            }
            total += l;
            for (row, g) in [(iq, gq), (ip, gp), (i_n, gn)] {
                grad_emb.row_mut(row).iter_mut().zip(&g).for_each(|(a, b)| *a += b);
            }
        }
    }
    let mut grads = params.zeros_like();
    backward_pass(params, &fp, &grad_emb, &mut grads);
    Ok((total, grads))
}

/// Mean hinge loss over every (tuple, negative) and its gradient.
/// Work is split into fixed chunks that may run in parallel; chunk results
/// are summed in order.
pub fn batch_loss(
    graph: &HeteroGraph,
    features: &Matrix,
    params: &HgnnParams,
    tuples: &[TrainingTuple],
    fanouts: &[usize],
    margin: f64,
    seed: u64,
) -> Result<(f64, HgnnParams)> {
    let topo = Topology::new(graph, features)?;
    let count: usize = tuples.iter().map(|t| t.negatives.len()).sum();
    if count == 0 {
        return Ok((0.0, params.zeros_like()));
    }
    let parts: Vec<Result<(f64, HgnnParams)>> = tuples
        .par_chunks(CHUNK_PAIRS)
        .map(|chunk| tuple_loss_sum(&topo, params, chunk, fanouts, margin, seed))
        .collect();
    let mut loss = 0.0;
    let mut grads = params.zeros_like();
    for part in parts {
        let (l, g) = part?;
        loss += l;
        grads.add_assign(&g);
    }
    let scale = 1.0 / count as f64;
    let mut flat = grads.to_flat();
    flat.iter_mut().for_each(|g| *g *= scale);
    grads.set_flat(&flat);
    Ok((loss * scale, grads))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub mean_loss: f64,
    /// Held-out edge AUC against an equal number of sampled non-edges.
    pub auc: Option<f64>,
}

fn sample_negatives<R: Rng + ?Sized>(n_nodes: usize, count: usize, exclude: [usize; 2], r: &mut R) -> Vec<usize> {
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let v = r.random_range(0..n_nodes);
        if !exclude.contains(&v) {
            out.push(v);
        }
    }
    out
}

/// Up to `count` distinct non-adjacent node pairs `(a < b)`.
pub fn sample_non_edges(graph: &HeteroGraph, count: usize, seed: u64) -> Vec<(usize, usize)> {
    let n = graph.num_nodes();
    let mut r = rng::stream(seed, &[0x0e_d9e]);
    let mut out = std::collections::BTreeSet::new();
    let max_pairs = n * n.saturating_sub(1) / 2 - graph.num_edges().min(n * n.saturating_sub(1) / 2);
    let target = count.min(max_pairs);
    let mut attempts = 0usize;
    while out.len() < target && attempts < 100 * (count + 10) {
        attempts += 1;
        let a = r.random_range(0..n);
        let b = r.random_range(0..n);
        if a == b {
            continue;
        }
        let (a, b) = if a < b { (a, b) } else { (b, a) };
        if !graph.has_edge(a, b) {
            out.insert((a, b));
        }
    }
    out.into_iter().collect()
}

/// Probability that a random positive outscores a random negative, ties
/// counting half. Computed from midranks of the pooled scores.
pub fn rank_auc(positive: &[f64], negative: &[f64]) -> Option<f64> {
    if positive.is_empty() || negative.is_empty() {
        return None;
    }
    let mut pooled: Vec<(f64, bool)> = positive
        .iter()
        .map(|&s| (s, true))
        .chain(negative.iter().map(|&s| (s, false)))
        .collect();
    pooled.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < pooled.len() {
        let mut j = i;
        while j + 1 < pooled.len() && pooled[j + 1].0 == pooled[i].0 {
            j += 1;
        }
        let midrank = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += midrank * pooled[i..=j].iter().filter(|x| x.1).count() as f64;
        i = j + 1;
    }
    let (np, nn) = (positive.len() as f64, negative.len() as f64);
    Some((rank_sum - np * (np + 1.0) / 2.0) / (np * nn))
}

/// Link-prediction AUC of dot-product scores over `graph` embeddings.
pub fn edge_auc(
    graph: &HeteroGraph,
    features: &Matrix,
    params: &HgnnParams,
    positives: &[Edge],
    negatives: &[(usize, usize)],
    fanouts: &[usize],
    seed: u64,
) -> Result<Option<f64>> {
    let all: Vec<usize> = (0..graph.num_nodes()).collect();
    let emb = hgnn_forward(graph, features, params, &all, fanouts, seed)?;
    let pos: Vec<f64> = positives.iter().map(|e| dot(emb.row(e.a), emb.row(e.b))).collect();
    let neg: Vec<f64> = negatives.iter().map(|&(a, b)| dot(emb.row(a), emb.row(b))).collect();
    Ok(rank_auc(&pos, &neg))
}

#[derive(Debug, Clone)]
pub struct HgnnTraining {
    pub params: HgnnParams,
    pub history: Vec<EpochMetrics>,
}

/// Trains GraphSAGE weights with the max-margin link objective. Positive
/// pairs are graph edges; negatives are uniform random nodes.
pub fn train_hgnn(graph: &HeteroGraph, features: &Matrix, cfg: &HgnnConfig) -> Result<HgnnTraining> {
    cfg.validate()?;
    if graph.num_edges() == 0 {
        return Err(Error::Empty("hgnn training needs a graph with at least one edge".into()));
    }
    if graph.num_nodes() < 3 {
        return Err(Error::validation("hgnn training needs at least 3 nodes to draw negatives"));
    }
    let (train_graph, held) = edge_split(graph, cfg.holdout_fraction, rng::derive_seed(cfg.seed, &[0x5b1]))?;
    let held_neg = sample_non_edges(graph, held.len(), cfg.seed);
    let mut edges = train_graph.edges();
    if edges.is_empty() {
        return Err(Error::Empty("no training edges left after the hold-out split".into()));
    }

    let mut params = cfg.init_params(graph.d_text())?;
    let mut adam = AdamState::new(params.to_flat().len(), AdamConfig { lr: cfg.lr, ..AdamConfig::default() });
    let eval_seed = rng::derive_seed(cfg.seed, &[0xe7a1]);
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let mut r = rng::stream(cfg.seed, &[0xe90c, epoch as u64]);
        edges.shuffle(&mut r);
        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        for (b, batch) in edges.chunks(cfg.batch_size).enumerate() {
            let tuples: Vec<TrainingTuple> = batch
                .iter()
                .map(|e| {
                    let (q, p) = if r.random_bool(0.5) { (e.a, e.b) } else { (e.b, e.a) };
                    let negatives = sample_negatives(graph.num_nodes(), cfg.negatives_per_positive, [q, p], &mut r);
                    TrainingTuple { query: q, positive: p, negatives }
                })
                .collect();
            let sample_seed = rng::derive_seed(cfg.seed, &[epoch as u64, b as u64]);
            let (loss, grads) = batch_loss(&train_graph, features, &params, &tuples, &cfg.fanouts, cfg.margin, sample_seed)?;
            let mut flat = params.to_flat();
            adam.step(&mut flat, &grads.to_flat())?;
            params.set_flat(&flat);
            loss_sum += loss;
            batches += 1;
        }
        let auc = edge_auc(&train_graph, features, &params, &held, &held_neg, &cfg.fanouts, eval_seed)?;
        history.push(EpochMetrics { epoch, mean_loss: loss_sum / batches as f64, auc });
    }
    if !params.is_finite() {
        return Err(Error::NonFinite("hgnn parameters after training"));
    }
    Ok(HgnnTraining { params, history })
}
