use std::collections::BTreeMap;
use std::ops::Range;

use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::features::{build_user_profile, FeatureContext, ItemFeatureBundle, UserProfile};
use super::model::{item_inputs, user_inputs, TowerDims, TwoTowerParams};
use crate::corpus::InteractionEvent;
use crate::error::{Error, Result};
use crate::kv::{join_list, KvMap};
use crate::numerics::{l2_normalize_backward, l2_normalize_rows, AdamConfig, AdamState, Matrix, MlpCache};
use crate::rng;

/// Examples per gradient work unit, fixed so results do not depend on the
/// number of worker threads.
const CHUNK_ROWS: usize = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct TwoTowerConfig {
    pub d_final: usize,
    pub hidden: Vec<usize>,
    pub temperature: f64,
    pub window_days: u32,
    pub batch_size: usize,
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
    pub use_gnn_features: bool,
    /// Train on every item type jointly; otherwise only on `target_type`.
    pub unified: bool,
    pub target_type: String,
    pub d_id: usize,
    pub aux_dim: usize,
}

impl Default for TwoTowerConfig {
    fn default() -> Self {
        TwoTowerConfig {
            d_final: 64,
            hidden: vec![128],
            temperature: 0.05,
            window_days: 90,
            batch_size: 256,
            epochs: 4,
            lr: 2e-3,
            seed: 0,
            use_gnn_features: true,
            unified: true,
            target_type: String::new(),
            d_id: 32,
            aux_dim: 0,
        }
    }
}

impl TwoTowerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::validation("temperature must be > 0"));
        }
        if self.window_days < 1 {
            return Err(Error::validation("window_days must be >= 1"));
        }
        if self.batch_size < 2 {
            return Err(Error::validation("batch_size must be >= 2 for in-batch negatives"));
        }
        if self.d_final < 1 || self.d_id < 1 || self.hidden.iter().any(|&h| h < 1) {
            return Err(Error::validation("tower widths must be >= 1"));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::validation("lr must be a finite value >= 0"));
        }
        if !self.unified && self.target_type.is_empty() {
            return Err(Error::validation("a type-specific model needs target_type"));
        }
        Ok(())
    }

    pub fn from_kv(kv: &KvMap) -> Result<Self> {
        let mut c = TwoTowerConfig::default();
        kv.read("d_final", &mut c.d_final)?;
        kv.read_list("hidden", &mut c.hidden)?;
        kv.read("temperature", &mut c.temperature)?;
        kv.read("window_days", &mut c.window_days)?;
        kv.read("batch_size", &mut c.batch_size)?;
        kv.read("epochs", &mut c.epochs)?;
        kv.read("lr", &mut c.lr)?;
        kv.read("seed", &mut c.seed)?;
        kv.read("use_gnn_features", &mut c.use_gnn_features)?;
        kv.read("unified", &mut c.unified)?;
        kv.read("target_type", &mut c.target_type)?;
        kv.read("d_id", &mut c.d_id)?;
        kv.read("aux_dim", &mut c.aux_dim)?;
        Ok(c)
    }

    pub fn to_kv(&self) -> KvMap {
        let mut kv = KvMap::default();
        kv.insert("d_final", self.d_final);
        kv.insert("hidden", join_list(&self.hidden));
        kv.insert("temperature", self.temperature);
        kv.insert("window_days", self.window_days);
        kv.insert("batch_size", self.batch_size);
        kv.insert("epochs", self.epochs);
        kv.insert("lr", self.lr);
        kv.insert("seed", self.seed);
        kv.insert("use_gnn_features", self.use_gnn_features);
        kv.insert("unified", self.unified);
        kv.insert("target_type", &self.target_type);
        kv.insert("d_id", self.d_id);
        kv.insert("aux_dim", self.aux_dim);
        kv
    }
}

/// Mean over rows of `-log softmax(S_i)_i` with `S = U Vᵀ / τ`, plus the
/// gradients with respect to `U` and `V`.
pub fn in_batch_softmax_loss(users: &Matrix, items: &Matrix, temperature: f64) -> Result<(f64, Matrix, Matrix)> {
    if users.shape() != items.shape() {
        return Err(Error::DimensionMismatch { context: "in-batch softmax rows", expected: users.rows(), actual: items.rows() });
    }
    let b = users.rows();
    if b < 2 {
        return Err(Error::validation("in-batch softmax needs at least 2 pairs"));
    }
    if !(temperature > 0.0) {
        return Err(Error::validation("temperature must be > 0"));
    }
    let mut probs = crate::numerics::matmul_transpose_b(users, items)?;
    let mut loss = 0.0;
    for i in 0..b {
        let row = probs.row_mut(i);
        row.iter_mut().for_each(|s| *s /= temperature);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for s in row.iter_mut() {
            *s = (*s - max).exp();
            sum += *s;
        }
        row.iter_mut().for_each(|s| *s /= sum);
        loss -= row[i].ln();
    }
    // dL/dS_ij = (p_ij - [i = j]) / B, and S carries a 1/τ factor.
    let scale = 1.0 / (b as f64 * temperature);
    for i in 0..b {
        let row = probs.row_mut(i);
        row[i] -= 1.0;
        row.iter_mut().for_each(|g| *g *= scale);
    }
    let grad_users = crate::numerics::matmul(&probs, items)?;
    let grad_items = crate::numerics::matmul(&probs.transpose(), users)?;
    Ok((loss / b as f64, grad_users, grad_items))
}

struct ChunkForward {
    range: Range<usize>,
    user: MlpCache,
    item: MlpCache,
}

fn forward_chunks<P, B>(params: &TwoTowerParams, profiles: &[P], bundles: &[B]) -> Result<(Vec<ChunkForward>, Matrix, Matrix)>
where
    P: std::borrow::Borrow<UserProfile> + Sync,
    B: std::borrow::Borrow<ItemFeatureBundle> + Sync,
{
    if profiles.len() != bundles.len() {
        return Err(Error::DimensionMismatch { context: "profiles per positive", expected: bundles.len(), actual: profiles.len() });
    }
    let n = profiles.len();
    let ranges: Vec<Range<usize>> = (0..n).step_by(CHUNK_ROWS).map(|s| s..(s + CHUNK_ROWS).min(n)).collect();
    let chunks = ranges
        .into_par_iter()
        .map(|range| {
            let user = params.user_tower.forward(user_inputs(params, &profiles[range.clone()])?)?;
            let item = params.item_tower.forward(item_inputs(params, &bundles[range.clone()])?)?;
            Ok(ChunkForward { range, user, item })
        })
        .collect::<Result<Vec<_>>>()?;
    let d = params.d_final();
    let mut users = Matrix::zeros(n, d);
    let mut items = Matrix::zeros(n, d);
    for c in &chunks {
        let (u, v) = (l2_normalize_rows(&c.user.output), l2_normalize_rows(&c.item.output));
        for (k, i) in c.range.clone().enumerate() {
            users.row_mut(i).copy_from_slice(u.row(k));
            items.row_mut(i).copy_from_slice(v.row(k));
        }
    }
    Ok((chunks, users, items))
}

fn normalize_backward(raw: &Matrix, grad: &Matrix, range: Range<usize>) -> Matrix {
    let mut g = Matrix::zeros(raw.rows(), raw.cols());
    for (k, i) in range.enumerate() {
        l2_normalize_backward(raw.row(k), grad.row(i), g.row_mut(k));
    }
    g
}

/// In-batch softmax loss of `(profile, positive)` pairs and its gradient
/// with respect to every parameter, including the shared id table.
pub fn two_tower_loss<P, B>(
    params: &TwoTowerParams,
    profiles: &[P],
    positives: &[B],
    temperature: f64,
) -> Result<(f64, TwoTowerParams)>
where
    P: std::borrow::Borrow<UserProfile> + Sync,
    B: std::borrow::Borrow<ItemFeatureBundle> + Sync,
{
    let (chunks, users, items) = forward_chunks(params, profiles, positives)?;
    let (loss, gu, gv) = in_batch_softmax_loss(&users, &items, temperature)?;
    let d = params.dims;
    let parts: Vec<TwoTowerParams> = chunks
        .par_iter()
        .map(|c| {
            let mut grads = params.zeros_like();
            let g_user = normalize_backward(&c.user.output, &gu, c.range.clone());
            let gx_user = params.user_tower.backward(&c.user, g_user, &mut grads.user_tower);
            let g_item = normalize_backward(&c.item.output, &gv, c.range.clone());
            let gx_item = params.item_tower.backward(&c.item, g_item, &mut grads.item_tower);
            for (k, i) in c.range.clone().enumerate() {
                let b = positives[i].borrow();
                let g = &gx_item.row(k)[d.d_gnn + d.d_text..];
                grads.id_table.row_mut(b.id_row).iter_mut().zip(g).for_each(|(a, x)| *a += x);
                let p = profiles[i].borrow();
                if p.history_rows.is_empty() {
                    continue;
                }
                let share = 1.0 / p.history_rows.len() as f64;
                let g = &gx_user.row(k)[d.d_gnn..d.d_gnn + d.d_id];
                for &r in &p.history_rows {
                    grads.id_table.row_mut(r).iter_mut().zip(g).for_each(|(a, x)| *a += x * share);
                }
            }
            grads
        })
        .collect();
    let mut grads = params.zeros_like();
    for g in &parts {
        grads.add_assign(g);
    }
    Ok((loss, grads))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoTowerMetrics {
    pub n_examples: usize,
    /// Mean batch loss of a pass over the training data before any update.
    pub initial_loss: f64,
    /// Mean batch loss observed while training, per epoch.
    pub epoch_losses: Vec<f64>,
}

impl TwoTowerMetrics {
    pub fn final_loss(&self) -> f64 {
        self.epoch_losses.last().copied().unwrap_or(self.initial_loss)
    }
}

#[derive(Debug, Clone)]
pub struct TwoTowerTraining {
    pub params: TwoTowerParams,
    pub metrics: TwoTowerMetrics,
}

/// A training pair: the user's history strictly before the event, and the
/// top-level item consumed.
pub(super) struct Example {
    pub(super) user_id: u64,
    pub(super) history: Range<usize>,
    pub(super) user_slot: usize,
    pub(super) cutoff: i64,
    pub(super) positive: usize,
}

pub(super) fn build_examples(
    events: &[InteractionEvent],
    ctx: &FeatureContext<'_>,
    cfg: &TwoTowerConfig,
) -> Result<(Vec<Vec<InteractionEvent>>, Vec<Example>)> {
    let catalog = ctx.catalog();
    let mut by_user: BTreeMap<u64, Vec<InteractionEvent>> = BTreeMap::new();
    for e in events {
        by_user.entry(e.user_id).or_default().push(*e);
    }
    let window = i64::from(cfg.window_days) * crate::corpus::SECONDS_PER_DAY;
    let mut histories = Vec::with_capacity(by_user.len());
    let mut examples = Vec::new();
    for (slot, (user_id, mut evs)) in by_user.into_iter().enumerate() {
        evs.sort_by_key(|e| (e.timestamp, e.item_id));
        for e in &evs {
            let top = catalog.lift(e.item_id)?;
            let record = catalog.get(top)?;
            if !cfg.unified && record.item_type != cfg.target_type {
                continue;
            }
            let lo = evs.partition_point(|x| x.timestamp < e.timestamp - window);
            let hi = evs.partition_point(|x| x.timestamp < e.timestamp);
            let positive = catalog.position(top).ok_or(Error::UnknownItem(top))?;
            examples.push(Example { user_id, history: lo..hi, user_slot: slot, cutoff: e.timestamp, positive });
        }
        histories.push(evs);
    }
    Ok((histories, examples))
}

fn batch_inputs(
    batch: &[&Example],
    histories: &[Vec<InteractionEvent>],
    ctx: &FeatureContext<'_>,
    window_days: u32,
) -> Result<(Vec<UserProfile>, Vec<usize>)> {
    let profiles = batch
        .iter()
        .map(|ex| {
            let h = &histories[ex.user_slot][ex.history.clone()];
            build_user_profile(ex.user_id, h, ex.cutoff, window_days, ctx)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((profiles, batch.iter().map(|ex| ex.positive).collect()))
}

/// Trains both towers on `(profile at event time, positive item)` pairs
/// with in-batch negatives.
pub fn train_two_tower(events: &[InteractionEvent], ctx: &FeatureContext<'_>, cfg: &TwoTowerConfig) -> Result<TwoTowerTraining> {
    cfg.validate()?;
    if cfg.use_gnn_features && ctx.d_gnn() == 0 {
        return Err(Error::validation("use_gnn_features needs foundation embeddings"));
    }
    let catalog = ctx.catalog();
    let (histories, examples) = build_examples(events, ctx, cfg)?;
    if examples.len() < 2 {
        return Err(Error::Empty(format!("two-tower training needs at least 2 examples, found {}", examples.len())));
    }
    let bundles = catalog.items().iter().map(|r| ctx.bundle(r.item_id)).collect::<Result<Vec<_>>>()?;
    let dims = TowerDims { d_gnn: ctx.d_gnn(), d_text: ctx.d_text(), d_id: cfg.d_id, aux_dim: ctx.aux_dim() };
    let mut params = TwoTowerParams::init(dims, catalog.len(), &cfg.hidden, cfg.d_final, cfg.use_gnn_features, cfg.seed);
    let mut adam = AdamState::new(params.param_len(), AdamConfig { lr: cfg.lr, ..AdamConfig::default() });

    let batch_size = cfg.batch_size.min(examples.len());
    let order_for = |epoch: u64| {
        let mut order: Vec<&Example> = examples.iter().collect();
        order.shuffle(&mut rng::stream(cfg.seed, &[0x7e0c, epoch]));
        order
    };
    let run_batch = |params: &TwoTowerParams, batch: &[&Example]| -> Result<(f64, TwoTowerParams)> {
        let (profiles, positives) = batch_inputs(batch, &histories, ctx, cfg.window_days)?;
        let items: Vec<&ItemFeatureBundle> = positives.iter().map(|&p| &bundles[p]).collect();
        two_tower_loss(params, &profiles, &items, cfg.temperature)
    };

    let mut initial = 0.0;
    let mut n_batches = 0usize;
    for batch in order_for(0).chunks(batch_size).filter(|b| b.len() >= 2) {
        let (profiles, positives) = batch_inputs(batch, &histories, ctx, cfg.window_days)?;
        let items: Vec<&ItemFeatureBundle> = positives.iter().map(|&p| &bundles[p]).collect();
        let (_, users, vecs) = forward_chunks(&params, &profiles, &items)?;
        initial += in_batch_softmax_loss(&users, &vecs, cfg.temperature)?.0;
        n_batches += 1;
    }
    let initial_loss = initial / n_batches as f64;

    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let mut sum = 0.0;
        let mut count = 0usize;
        for batch in order_for(epoch as u64 + 1).chunks(batch_size).filter(|b| b.len() >= 2) {
            let (loss, grads) = run_batch(&params, batch)?;
            let mut flat = params.to_flat();
            adam.step(&mut flat, &grads.to_flat())?;
            params.set_flat(&flat);
            sum += loss;
            count += 1;
        }
        epoch_losses.push(sum / count as f64);
    }
    if !params.is_finite() {
        return Err(Error::NonFinite("two-tower parameters after training"));
    }
    Ok(TwoTowerTraining {
        params,
        metrics: TwoTowerMetrics { n_examples: examples.len(), initial_loss, epoch_losses },
    })
}
