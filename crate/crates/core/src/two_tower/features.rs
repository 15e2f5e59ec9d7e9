use crate::corpus::{Catalog, InteractionEvent, SECONDS_PER_DAY};
use crate::error::{Error, Result};
use crate::hgnn::ItemEmbeddingStore;
use crate::numerics::Matrix;

/// Foundation embedding of `item_id`. Child items inherit their parent's
/// vector; a top-level item missing from the store uses `fallback` (for
/// example an inductively inferred vector) when one is given.
pub fn resolve_item_embedding(
    item_id: u64,
    store: &ItemEmbeddingStore,
    catalog: &Catalog,
    fallback: Option<&[f64]>,
) -> Result<Vec<f64>> {
    let top = catalog.lift(item_id)?;
    if let Some(v) = store.get(top) {
        return Ok(v.to_vec());
    }
    match fallback {
        Some(f) if f.len() == store.dim() => Ok(f.to_vec()),
        Some(f) => Err(Error::DimensionMismatch { context: "fallback embedding", expected: store.dim(), actual: f.len() }),
        None => Err(Error::Unresolvable(item_id)),
    }
}

/// Tower inputs of one item. The layout is the same for every item type.
#[derive(Debug, Clone, PartialEq)]
pub struct ItemFeatureBundle {
    pub item_id: u64,
    pub item_type: String,
    pub gnn: Vec<f64>,
    pub text: Vec<f64>,
    /// Row of the shared id-embedding table.
    pub id_row: usize,
}

/// User-tower inputs built from a window of interaction history.
#[derive(Debug, Clone, PartialEq)]
pub struct UserProfile {
    pub user_id: u64,
    pub gnn_history_mean: Vec<f64>,
    /// Id-table rows of the window items, one entry per event. Their mean
    /// is taken from the live table so gradients reach those rows.
    pub history_rows: Vec<usize>,
    pub aux_taste: Vec<f64>,
}

impl UserProfile {
    pub fn empty(user_id: u64, d_gnn: usize, aux_dim: usize) -> Self {
        UserProfile { user_id, gnn_history_mean: vec![0.0; d_gnn], history_rows: Vec::new(), aux_taste: vec![0.0; aux_dim] }
    }

    pub fn id_history_mean(&self, table: &Matrix) -> Vec<f64> {
        let mut mean = vec![0.0; table.cols()];
        if self.history_rows.is_empty() {
            return mean;
        }
        for &r in &self.history_rows {
            mean.iter_mut().zip(table.row(r)).for_each(|(m, v)| *m += v);
        }
        let n = self.history_rows.len() as f64;
        mean.iter_mut().for_each(|m| *m /= n);
        mean
    }
}

/// Catalog-aligned lookup of everything the towers consume.
#[derive(Debug, Clone)]
pub struct FeatureContext<'a> {
    catalog: &'a Catalog,
    text: &'a Matrix,
    /// Resolved foundation vector per catalog position.
    gnn: Vec<Option<Vec<f64>>>,
    d_gnn: usize,
    aux_dim: usize,
}

impl<'a> FeatureContext<'a> {
    /// Without a store every foundation vector is zero with width `d_gnn`.
    pub fn new(
        catalog: &'a Catalog,
        text: &'a Matrix,
        store: Option<&ItemEmbeddingStore>,
        d_gnn: usize,
        aux_dim: usize,
    ) -> Result<Self> {
        if text.rows() != catalog.len() {
            return Err(Error::DimensionMismatch { context: "text feature rows", expected: catalog.len(), actual: text.rows() });
        }
        let (gnn, d_gnn) = match store {
            Some(s) => {
                let gnn = catalog
                    .items()
                    .iter()
                    .map(|r| store_vector(s, r.parent_id.unwrap_or(r.item_id)))
                    .collect();
                (gnn, s.dim())
            }
            None => (vec![Some(vec![0.0; d_gnn]); catalog.len()], d_gnn),
        };
        Ok(FeatureContext { catalog, text, gnn, d_gnn, aux_dim })
    }

    /// Supplies the vector for a top-level item absent from the store; its
    /// child items inherit it.
    pub fn with_fallback(mut self, item_id: u64, vector: Vec<f64>) -> Result<Self> {
        if vector.len() != self.d_gnn {
            return Err(Error::DimensionMismatch { context: "fallback embedding", expected: self.d_gnn, actual: vector.len() });
        }
        if !self.catalog.is_top_level(item_id)? {
            return Err(Error::validation(format!("fallback item {item_id} is not a top-level item")));
        }
        for (pos, r) in self.catalog.items().iter().enumerate() {
            if r.parent_id.unwrap_or(r.item_id) == item_id && self.gnn[pos].is_none() {
                self.gnn[pos] = Some(vector.clone());
            }
        }
        Ok(self)
    }

    pub fn catalog(&self) -> &Catalog {
        self.catalog
    }

    pub fn d_gnn(&self) -> usize {
        self.d_gnn
    }

    pub fn d_text(&self) -> usize {
        self.text.cols()
    }

    pub fn aux_dim(&self) -> usize {
        self.aux_dim
    }

    fn position(&self, item_id: u64) -> Result<usize> {
        self.catalog.position(item_id).ok_or(Error::UnknownItem(item_id))
    }

    pub fn gnn(&self, item_id: u64) -> Result<&[f64]> {
        self.gnn[self.position(item_id)?].as_deref().ok_or(Error::Unresolvable(item_id))
    }

    pub fn bundle(&self, item_id: u64) -> Result<ItemFeatureBundle> {
        let pos = self.position(item_id)?;
        Ok(ItemFeatureBundle {
            item_id,
            item_type: self.catalog.items()[pos].item_type.clone(),
            gnn: self.gnn(item_id)?.to_vec(),
            text: self.text.row(pos).to_vec(),
            id_row: pos,
        })
    }
}

fn store_vector(store: &ItemEmbeddingStore, top: u64) -> Option<Vec<f64>> {
    store.get(top).map(<[f64]>::to_vec)
}

/// Profile from `events` with `cutoff_time - window_days·86400 <= t < cutoff_time`.
/// Every event in the window counts, repeats included.
pub fn build_user_profile(
    user_id: u64,
    events: &[InteractionEvent],
    cutoff_time: i64,
    window_days: u32,
    ctx: &FeatureContext<'_>,
) -> Result<UserProfile> {
    let start = cutoff_time - i64::from(window_days) * SECONDS_PER_DAY;
    let mut profile = UserProfile::empty(user_id, ctx.d_gnn(), ctx.aux_dim());
    for e in events {
        if e.user_id != user_id {
            return Err(Error::validation(format!("event of user {} in the profile of user {user_id}", e.user_id)));
        }
        if e.timestamp < start || e.timestamp >= cutoff_time {
            continue;
        }
        let v = ctx.gnn(e.item_id)?;
        profile.gnn_history_mean.iter_mut().zip(v).for_each(|(m, x)| *m += x);
        profile.history_rows.push(ctx.position(e.item_id)?);
    }
    if !profile.history_rows.is_empty() {
        let n = profile.history_rows.len() as f64;
        profile.gnn_history_mean.iter_mut().for_each(|m| *m /= n);
    }
    Ok(profile)
}
