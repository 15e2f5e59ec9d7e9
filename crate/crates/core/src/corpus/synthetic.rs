//! Seeded synthetic catalogs and interaction logs with planted topics.
//!
//! Topics are shared across item types: a user who likes topic 3 shows
//! likes topic 3 audiobooks too. That is the signal a unified model can
//! exploit and a type-specific one cannot.

use std::collections::HashMap;

use rand::distr::weighted::WeightedIndex;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::Distribution;

use super::features::{dominant_mixture, sample_dirichlet, TopicFeatureModel};
use super::{Catalog, InteractionEvent, ItemRecord, ItemTypes, SECONDS_PER_DAY};
use crate::error::{Error, Result};
use crate::kv::{join_list, KvMap};
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub n_users: usize,
    /// Top-level item types to generate.
    pub item_types: Vec<String>,
    /// One count per entry of `item_types`.
    pub n_items_per_type: Vec<usize>,
    /// Child items generated per parent, for types that have a child type.
    pub episodes_per_show: usize,
    /// Probability that an event on a parent item is redirected to one of its children.
    pub episode_share: f64,
    pub n_topics: usize,
    pub d_text: usize,
    pub noise_std: f64,
    pub events_per_user: usize,
    pub horizon_days: usize,
    /// Dirichlet concentration of user topic preferences; small is peaky.
    pub user_concentration: f64,
    pub start_time: i64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n_users: 2000,
            item_types: vec!["show".into(), "audiobook".into()],
            n_items_per_type: vec![400, 100],
            episodes_per_show: 2,
            episode_share: 0.25,
            n_topics: 20,
            d_text: 16,
            noise_std: 0.5,
            events_per_user: 24,
            horizon_days: 111,
            user_concentration: 0.2,
            start_time: 1_700_000_000,
            seed: 42,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self, types: &ItemTypes) -> Result<()> {
        let counts = [
            ("n_users", self.n_users),
            ("n_topics", self.n_topics),
            ("d_text", self.d_text),
            ("events_per_user", self.events_per_user),
            ("horizon_days", self.horizon_days),
        ];
        for (name, v) in counts {
            if v < 1 {
                return Err(Error::validation(format!("{name} must be >= 1")));
            }
        }
        if self.item_types.is_empty() || self.item_types.len() != self.n_items_per_type.len() {
            return Err(Error::validation("item_types and n_items_per_type must be non-empty and the same length"));
        }
        if self.n_items_per_type.iter().any(|&n| n < 1) {
            return Err(Error::validation("every n_items_per_type entry must be >= 1"));
        }
        for t in &self.item_types {
            match types.get(t) {
                Some(ty) if ty.parent_type.is_none() => {}
                _ => return Err(Error::validation(format!("`{t}` is not a known top-level item type"))),
            }
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::validation("noise_std must be >= 0"));
        }
        if !(0.0..=1.0).contains(&self.episode_share) {
            return Err(Error::validation("episode_share must lie in [0, 1]"));
        }
        if !(self.user_concentration > 0.0 && self.user_concentration.is_finite()) {
            return Err(Error::validation("user_concentration must be > 0"));
        }
        if self.start_time < 0 {
            return Err(Error::validation("start_time must be >= 0"));
        }
        Ok(())
    }

    pub fn from_kv(kv: &KvMap) -> Result<Self> {
        let mut c = SyntheticConfig::default();
        kv.read("n_users", &mut c.n_users)?;
        kv.read_list("item_types", &mut c.item_types)?;
        kv.read_list("n_items_per_type", &mut c.n_items_per_type)?;
        kv.read("episodes_per_show", &mut c.episodes_per_show)?;
        kv.read("episode_share", &mut c.episode_share)?;
        kv.read("n_topics", &mut c.n_topics)?;
        kv.read("d_text", &mut c.d_text)?;
        kv.read("noise_std", &mut c.noise_std)?;
        kv.read("events_per_user", &mut c.events_per_user)?;
        kv.read("horizon_days", &mut c.horizon_days)?;
        kv.read("user_concentration", &mut c.user_concentration)?;
        kv.read("start_time", &mut c.start_time)?;
        kv.read("seed", &mut c.seed)?;
        Ok(c)
    }

    pub fn to_kv(&self) -> KvMap {
        let mut kv = KvMap::default();
        kv.insert("n_users", self.n_users);
        kv.insert("item_types", self.item_types.join(","));
        kv.insert("n_items_per_type", join_list(&self.n_items_per_type));
        kv.insert("episodes_per_show", self.episodes_per_show);
        kv.insert("episode_share", self.episode_share);
        kv.insert("n_topics", self.n_topics);
        kv.insert("d_text", self.d_text);
        kv.insert("noise_std", self.noise_std);
        kv.insert("events_per_user", self.events_per_user);
        kv.insert("horizon_days", self.horizon_days);
        kv.insert("user_concentration", self.user_concentration);
        kv.insert("start_time", self.start_time);
        kv.insert("seed", self.seed);
        kv
    }
}

/// The planted structure behind a synthetic dataset.
#[derive(Debug, Clone)]
pub struct LatentTruth {
    pub item_dominant_topic: HashMap<u64, usize>,
    pub user_preferences: HashMap<u64, Vec<f64>>,
    pub features: TopicFeatureModel,
}

impl LatentTruth {
    pub fn user_top_topic(&self, user_id: u64) -> Option<usize> {
        let p = self.user_preferences.get(&user_id)?;
        p.iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
            .map(|(k, _)| k)
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub catalog: Catalog,
    /// Sorted by `(timestamp, user_id, item_id)`.
    pub events: Vec<InteractionEvent>,
    pub truth: LatentTruth,
}

pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<SyntheticDataset> {
    let types = ItemTypes::default();
    cfg.validate(&types)?;
    let mut r = rng::stream(cfg.seed, &[0x5e_ed]);

    // Top-level items with a balanced, shuffled dominant-topic assignment.
    let mut records = Vec::new();
    let mut dominant = HashMap::new();
    let mut mixtures = HashMap::new();
    let mut next_id = 0u64;
    for (ty, &n) in cfg.item_types.iter().zip(&cfg.n_items_per_type) {
        let mut topics: Vec<usize> = (0..n).map(|j| j % cfg.n_topics).collect();
        topics.shuffle(&mut r);
        for topic in topics {
            dominant.insert(next_id, topic);
            mixtures.insert(next_id, dominant_mixture(cfg.n_topics, topic));
            records.push(ItemRecord { item_id: next_id, item_type: ty.clone(), parent_id: None, features: None });
            next_id += 1;
        }
    }
    let n_top = records.len();

    let mut children: HashMap<u64, Vec<u64>> = HashMap::new();
    if cfg.episodes_per_show > 0 {
        for i in 0..n_top {
            let parent = records[i].item_id;
            let Some(child_ty) = types.child_of(&records[i].item_type) else {
                continue;
            };
            let child_ty = child_ty.name.clone();
            for _ in 0..cfg.episodes_per_show {
                let topic = dominant[&parent];
                dominant.insert(next_id, topic);
                mixtures.insert(next_id, dominant_mixture(cfg.n_topics, topic));
                children.entry(parent).or_default().push(next_id);
                records.push(ItemRecord {
                    item_id: next_id,
                    item_type: child_ty.clone(),
                    parent_id: Some(parent),
                    features: None,
                });
                next_id += 1;
            }
        }
    }

    let model = TopicFeatureModel::new(mixtures, cfg.n_topics, cfg.d_text, cfg.noise_std, cfg.seed)?;
    for rec in &mut records {
        rec.features = Some(model.features(rec.item_id)?);
    }
    let catalog = Catalog::new(types, records)?;

    let top_mix: Vec<&Vec<f64>> = (0..n_top as u64).map(|id| &model.mixtures[&id]).collect();
    let horizon = cfg.horizon_days as i64 * SECONDS_PER_DAY;
    let mut user_preferences = HashMap::new();
    let mut events = Vec::with_capacity(cfg.n_users * cfg.events_per_user);
    for u in 0..cfg.n_users as u64 {
        let mut ur = rng::stream(cfg.seed, &[0x05e7, u]);
        let pref = sample_dirichlet(cfg.user_concentration, cfg.n_topics, &mut ur);
        let weights: Vec<f64> = top_mix
            .iter()
            .map(|m| m.iter().zip(&pref).map(|(a, b)| a * b).sum())
            .collect();
        let dist = WeightedIndex::new(&weights)
            .map_err(|e| Error::validation(format!("degenerate affinity weights: {e}")))?;
        for _ in 0..cfg.events_per_user {
            let mut item = dist.sample(&mut ur) as u64;
            if let Some(kids) = children.get(&item) {
                if ur.random_bool(cfg.episode_share) {
                    item = kids[ur.random_range(0..kids.len())];
                }
            }
            let timestamp = cfg.start_time + ur.random_range(0..horizon);
            events.push(InteractionEvent { user_id: u, item_id: item, timestamp });
        }
        user_preferences.insert(u, pref);
    }
    events.sort_by_key(|e| (e.timestamp, e.user_id, e.item_id));

    Ok(SyntheticDataset {
        catalog,
        events,
        truth: LatentTruth { item_dominant_topic: dominant, user_preferences, features: model },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{text_features, write_catalog, write_interactions, FeatureProvider};
    use crate::numerics::{dot, norm};
    use std::collections::HashSet;

    fn small() -> SyntheticConfig {
        SyntheticConfig {
            n_users: 10,
            n_items_per_type: vec![20, 20],
            episodes_per_show: 0,
            n_topics: 4,
            d_text: 6,
            events_per_user: 15,
            ..SyntheticConfig::default()
        }
    }

    #[test]
    fn size_contract() {
        let d = generate_synthetic(&small()).unwrap();
        assert_eq!(d.catalog.len(), 40);
        let users: HashSet<u64> = d.events.iter().map(|e| e.user_id).collect();
        assert_eq!(users.len(), 10);
        assert_eq!(d.events.len(), 150);
    }

    #[test]
    fn same_seed_is_byte_identical() {
        let render = |d: &SyntheticDataset| {
            let mut buf = Vec::new();
            write_catalog(&d.catalog, &mut buf).unwrap();
            write_interactions(&d.events, &mut buf).unwrap();
            buf
        };
        let cfg = SyntheticConfig { episodes_per_show: 2, ..small() };
        assert_eq!(render(&generate_synthetic(&cfg).unwrap()), render(&generate_synthetic(&cfg).unwrap()));
        let other = SyntheticConfig { seed: 7, ..cfg.clone() };
        assert_ne!(render(&generate_synthetic(&cfg).unwrap()), render(&generate_synthetic(&other).unwrap()));
    }

    #[test]
    fn episodes_hang_off_shows() {
        let cfg = SyntheticConfig { episodes_per_show: 3, episode_share: 0.5, ..small() };
        let d = generate_synthetic(&cfg).unwrap();
        assert_eq!(d.catalog.len(), 40 + 20 * 3);
        for item in d.catalog.items().iter().filter(|r| r.item_type == "episode") {
            let parent = d.catalog.get(item.parent_id.unwrap()).unwrap();
            assert_eq!(parent.item_type, "show");
            assert_eq!(d.truth.item_dominant_topic[&item.item_id], d.truth.item_dominant_topic[&parent.item_id]);
        }
        assert!(d.events.iter().any(|e| d.catalog.get(e.item_id).unwrap().item_type == "episode"));
    }

    #[test]
    fn timestamps_within_horizon() {
        let cfg = small();
        let d = generate_synthetic(&cfg).unwrap();
        let end = cfg.start_time + cfg.horizon_days as i64 * SECONDS_PER_DAY;
        assert!(d.events.iter().all(|e| e.timestamp >= cfg.start_time && e.timestamp < end));
    }

    #[test]
    fn users_prefer_their_top_topic() {
        // Direct counting against the planted truth.
        let cfg = SyntheticConfig { n_users: 200, n_topics: 5, events_per_user: 30, ..small() };
        let d = generate_synthetic(&cfg).unwrap();
        let mut on_top = 0usize;
        for e in &d.events {
            let top = d.truth.user_top_topic(e.user_id).unwrap();
            if d.truth.item_dominant_topic[&e.item_id] == top {
                on_top += 1;
            }
        }
        let frac = on_top as f64 / d.events.len() as f64;
        assert!(frac > 1.0 / cfg.n_topics as f64, "fraction {frac}");
    }

    #[test]
    fn zero_noise_features_cluster_by_topic() {
        let cfg = SyntheticConfig { noise_std: 0.0, ..small() };
        let d = generate_synthetic(&cfg).unwrap();
        let feats = text_features(&d.catalog, FeatureProvider::Precomputed).unwrap();
        let cos = |i: usize, j: usize| {
            let (a, b) = (feats.row(i), feats.row(j));
            dot(a, b) / (norm(a) * norm(b))
        };
        let topic = |i: usize| d.truth.item_dominant_topic[&d.catalog.items()[i].item_id];
        let n = d.catalog.len();
        let mut min_same = f64::INFINITY;
        let mut max_diff = f64::NEG_INFINITY;
        for i in 0..n {
            for j in (i + 1)..n {
                if topic(i) == topic(j) {
                    min_same = min_same.min(cos(i, j));
                } else {
                    max_diff = max_diff.max(cos(i, j));
                }
            }
        }
        assert!(min_same > max_diff, "same {min_same} vs different {max_diff}");
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let types = ItemTypes::default();
        assert!(SyntheticConfig { n_users: 0, ..small() }.validate(&types).is_err());
        assert!(SyntheticConfig { noise_std: -1.0, ..small() }.validate(&types).is_err());
        assert!(SyntheticConfig { item_types: vec!["episode".into(), "show".into()], ..small() }
            .validate(&types)
            .is_err());
        assert!(SyntheticConfig { n_items_per_type: vec![3], ..small() }.validate(&types).is_err());
    }

    #[test]
    fn config_round_trips_through_key_value_text() {
        let cfg = SyntheticConfig { noise_std: 0.125, seed: 99, ..small() };
        let kv = KvMap::parse(&cfg.to_kv().to_text()).unwrap();
        assert_eq!(SyntheticConfig::from_kv(&kv).unwrap(), cfg);
    }
}
