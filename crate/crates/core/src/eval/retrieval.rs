use std::collections::{BTreeMap, HashSet};

use rayon::prelude::*;

use super::split::EvalSplit;
use crate::corpus::InteractionEvent;
use crate::error::{Error, Result};
use crate::numerics::{dot, Matrix};
use crate::two_tower::{build_user_profile, item_tower_batch, user_tower_forward, FeatureContext, TwoTowerParams, UserProfile};

/// Item-tower outputs for a candidate set.
#[derive(Debug, Clone, PartialEq)]
pub struct ItemIndex {
    ids: Vec<u64>,
    vectors: Matrix,
}

impl ItemIndex {
    pub fn new(ids: Vec<u64>, vectors: Matrix) -> Result<Self> {
        if ids.len() != vectors.rows() {
            return Err(Error::DimensionMismatch { context: "item index rows", expected: ids.len(), actual: vectors.rows() });
        }
        Ok(ItemIndex { ids, vectors })
    }

    /// Encodes every top-level item of `item_type`.
    pub fn for_type(params: &TwoTowerParams, ctx: &FeatureContext<'_>, item_type: &str) -> Result<Self> {
        let ids: Vec<u64> = ctx.catalog().top_level_of_type(item_type).map(|r| r.item_id).collect();
        let bundles = ids.iter().map(|&id| ctx.bundle(id)).collect::<Result<Vec<_>>>()?;
        let vectors = item_tower_batch(params, &bundles)?;
        ItemIndex::new(ids, vectors)
    }

    pub fn ids(&self) -> &[u64] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn vector(&self, i: usize) -> &[f64] {
        self.vectors.row(i)
    }
}

/// Exact top-`k` by dot product, skipping `exclusions`. Ties go to the
/// lower item id.
pub fn recommend_top_k(user: &[f64], index: &ItemIndex, k: usize, exclusions: &HashSet<u64>) -> Result<Vec<(u64, f64)>> {
    if k == 0 {
        return Err(Error::validation("k must be >= 1"));
    }
    if index.vectors.cols() != user.len() && !index.is_empty() {
        return Err(Error::DimensionMismatch { context: "user vector", expected: index.vectors.cols(), actual: user.len() });
    }
    let mut scored: Vec<(u64, f64)> = index
        .ids
        .iter()
        .enumerate()
        .filter(|(_, id)| !exclusions.contains(id))
        .map(|(i, &id)| (id, dot(user, index.vectors.row(i))))
        .collect();
    if scored.is_empty() {
        return Err(Error::Empty("no candidates left after exclusions".into()));
    }
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored.truncate(k);
    Ok(scored)
}

/// Hits over test events of one top-level item type.
#[derive(Debug, Clone, PartialEq)]
pub struct HitRate {
    pub item_type: String,
    pub k: usize,
    pub hits: usize,
    pub n_events: usize,
}

impl HitRate {
    pub fn value(&self) -> f64 {
        self.hits as f64 / self.n_events as f64
    }
}

fn group_by_user(events: &[InteractionEvent]) -> BTreeMap<u64, Vec<InteractionEvent>> {
    let mut out: BTreeMap<u64, Vec<InteractionEvent>> = BTreeMap::new();
    for e in events {
        out.entry(e.user_id).or_default().push(*e);
    }
    out
}

/// Event-level Hit-Rate@K per top-level type. Each test event hits when its
/// (lifted) item is among the user's top `k` items of that type, ranked from
/// a profile of train-window events only. Types without test events are
/// omitted.
pub fn hit_rate_at_k(
    split: &EvalSplit,
    params: &TwoTowerParams,
    ctx: &FeatureContext<'_>,
    k: usize,
    window_days: u32,
) -> Result<Vec<HitRate>> {
    if k == 0 {
        return Err(Error::validation("k must be >= 1"));
    }
    let catalog = ctx.catalog();
    let types: Vec<String> = catalog.types().top_level().map(|t| t.name.clone()).collect();
    let indexes = types
        .iter()
        .map(|t| ItemIndex::for_type(params, ctx, t))
        .collect::<Result<Vec<_>>>()?;
    let type_slot = |item_id: u64| -> Result<(usize, u64)> {
        let top = catalog.lift(item_id)?;
        let ty = &catalog.get(top)?.item_type;
        Ok((types.iter().position(|t| t == ty).expect("top-level type"), top))
    };

    let train = group_by_user(&split.train);
    let test: Vec<(u64, Vec<InteractionEvent>)> = group_by_user(&split.test).into_iter().collect();
    let per_user = test
        .par_iter()
        .map(|(user, events)| -> Result<Vec<(usize, usize)>> {
            let history = train.get(user).map(Vec::as_slice).unwrap_or(&[]);
            let profile = if history.is_empty() {
                UserProfile::empty(*user, ctx.d_gnn(), ctx.aux_dim())
            } else {
                build_user_profile(*user, history, split.cutoff_time, window_days, ctx)?
            };
            let u = user_tower_forward(&profile, params)?;
            let exclusions = history.iter().map(|e| catalog.lift(e.item_id)).collect::<Result<HashSet<u64>>>()?;
            let mut top: Vec<Option<HashSet<u64>>> = vec![None; types.len()];
            let mut tally = vec![(0usize, 0usize); types.len()];
            for e in events {
                let (slot, truth) = type_slot(e.item_id)?;
                if top[slot].is_none() {
                    let list = match recommend_top_k(&u, &indexes[slot], k, &exclusions) {
                        Ok(list) => list.into_iter().map(|(id, _)| id).collect(),
                        Err(Error::Empty(_)) => HashSet::new(),
                        Err(e) => return Err(e),
                    };
                    top[slot] = Some(list);
                }
                tally[slot].1 += 1;
                if top[slot].as_ref().is_some_and(|s| s.contains(&truth)) {
                    tally[slot].0 += 1;
                }
            }
            Ok(tally)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut totals = vec![(0usize, 0usize); types.len()];
    for tally in per_user {
        for (t, (h, n)) in totals.iter_mut().zip(tally) {
            t.0 += h;
            t.1 += n;
        }
    }
    Ok(types
        .into_iter()
        .zip(totals)
        .filter(|(_, (_, n))| *n > 0)
        .map(|(item_type, (hits, n_events))| HitRate { item_type, k, hits, n_events })
        .collect())
}
