use std::fmt::Write as _;

use super::retrieval::hit_rate_at_k;
use super::split::{temporal_split, temporal_split_at, EvalSplit};
use crate::cograph::{build_graph, GraphBuildConfig, HeteroGraph};
use crate::corpus::{Catalog, InteractionEvent, SECONDS_PER_DAY};
use crate::error::{Error, Result};
use crate::hgnn::{export_embeddings, train_hgnn, HgnnConfig, HgnnParams, HgnnTraining, ItemEmbeddingStore};
use crate::kv::KvMap;
use crate::numerics::Matrix;
use crate::rng;
use crate::two_tower::{train_two_tower, FeatureContext, TwoTowerConfig};

/// Catalog, interaction log and catalog-ordered text features.
#[derive(Debug, Clone, Copy)]
pub struct Dataset<'a> {
    pub catalog: &'a Catalog,
    pub events: &'a [InteractionEvent],
    pub text: &'a Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub graph: GraphBuildConfig,
    pub hgnn: HgnnConfig,
    pub two_tower: TwoTowerConfig,
    pub k: usize,
    pub train_days: u32,
    pub test_days: u32,
    /// How much older the frozen foundation model's data is.
    pub frozen_lag_days: u32,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            graph: GraphBuildConfig { min_co_users: 8, ..GraphBuildConfig::default() },
            hgnn: HgnnConfig::default(),
            two_tower: TwoTowerConfig::default(),
            k: 10,
            train_days: 90,
            test_days: 14,
            frozen_lag_days: 7,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.graph.validate()?;
        self.hgnn.validate()?;
        self.two_tower.validate()?;
        if self.k < 1 || self.train_days < 1 {
            return Err(Error::validation("k and train_days must be >= 1"));
        }
        Ok(())
    }

    /// Sections `graph.`, `hgnn.`, `two_tower.` and `eval.`.
    pub fn from_kv(kv: &KvMap) -> Result<Self> {
        let eval = kv.section("eval");
        let mut c = ExperimentConfig {
            hgnn: HgnnConfig::from_kv(&kv.section("hgnn"))?,
            two_tower: TwoTowerConfig::from_kv(&kv.section("two_tower"))?,
            ..ExperimentConfig::default()
        };
        c.graph.read_kv(&kv.section("graph"))?;
        eval.read("k", &mut c.k)?;
        eval.read("train_days", &mut c.train_days)?;
        eval.read("test_days", &mut c.test_days)?;
        eval.read("frozen_lag_days", &mut c.frozen_lag_days)?;
        Ok(c)
    }

    pub fn to_kv(&self) -> KvMap {
        let mut kv = KvMap::default();
        for (prefix, section) in [("graph", self.graph.to_kv()), ("hgnn", self.hgnn.to_kv()), ("two_tower", self.two_tower.to_kv())] {
            for (k, v) in section.iter() {
                kv.insert(format!("{prefix}.{k}"), v);
            }
        }
        kv.insert("eval.k", self.k);
        kv.insert("eval.train_days", self.train_days);
        kv.insert("eval.test_days", self.test_days);
        kv.insert("eval.frozen_lag_days", self.frozen_lag_days);
        kv
    }
}

/// Graph, trained encoder and exported embeddings for one training window.
#[derive(Debug, Clone)]
pub struct Foundation {
    pub graph: HeteroGraph,
    pub training: HgnnTraining,
    pub store: ItemEmbeddingStore,
}

/// Builds the co-interaction graph from `events`, trains the encoder and
/// exports an embedding for every top-level item.
pub fn train_foundation(
    events: &[InteractionEvent],
    catalog: &Catalog,
    text: &Matrix,
    graph_cfg: &GraphBuildConfig,
    hgnn_cfg: &HgnnConfig,
    snapshot: &str,
) -> Result<Foundation> {
    let graph = build_graph(events, catalog, graph_cfg)?;
    let features = graph.node_features(catalog, text)?;
    let training = train_hgnn(&graph, &features, hgnn_cfg)?;
    let store = export_foundation(&graph, &features, &training.params, hgnn_cfg, snapshot)?;
    Ok(Foundation { graph, training, store })
}

/// Exports every node with the sampling seed tied to `hgnn_cfg.seed`.
pub fn export_foundation(
    graph: &HeteroGraph,
    features: &Matrix,
    params: &HgnnParams,
    hgnn_cfg: &HgnnConfig,
    snapshot: &str,
) -> Result<ItemEmbeddingStore> {
    let seed = rng::derive_seed(hgnn_cfg.seed, &[0xe4e0]);
    export_embeddings(graph, features, params, &hgnn_cfg.fanouts, seed, snapshot)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Variant {
    /// All item types, foundation features on.
    Unified,
    /// Trained only on events of one top-level type.
    TypeSpecific(String),
    /// Unified with the foundation slots zeroed.
    WithoutGnn,
    /// Unified on foundation embeddings from an older window.
    FrozenHgnn,
}

impl Variant {
    pub fn label(&self) -> String {
        match self {
            Variant::Unified => "Unified 2T".into(),
            Variant::TypeSpecific(t) => format!("{} specific 2T", capitalize(t)),
            Variant::WithoutGnn => "Unified 2T w/o GNN".into(),
            Variant::FrozenHgnn => "Unified 2T frozen HGNN".into(),
        }
    }
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    c.next().map(|f| f.to_uppercase().chain(c).collect()).unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub variant: String,
    pub item_type: String,
    pub k: usize,
    pub hr: f64,
    pub n_events: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AblationReport {
    pub rows: Vec<AblationRow>,
}

impl AblationReport {
    pub fn hr(&self, variant: &str, item_type: &str) -> Option<f64> {
        self.rows.iter().find(|r| r.variant == variant && r.item_type == item_type).map(|r| r.hr)
    }

    /// One `variant<TAB>item_type<TAB>k<TAB>hr<TAB>n_events` line per row.
    pub fn to_structured(&self) -> String {
        self.rows
            .iter()
            .map(|r| format!("{}\t{}\t{}\t{}\t{}\n", r.variant, r.item_type, r.k, r.hr, r.n_events))
            .collect()
    }

    pub fn parse_structured(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 5 {
                return Err(Error::parse(i + 1, "expected 5 tab-separated fields"));
            }
            let num = |s: &str| s.parse::<usize>().map_err(|e| Error::parse(i + 1, e.to_string()));
            let hr = f[3].parse::<f64>().map_err(|e| Error::parse(i + 1, e.to_string()))?;
            rows.push(AblationRow { variant: f[0].into(), item_type: f[1].into(), k: num(f[2])?, hr, n_events: num(f[4])? });
        }
        Ok(AblationReport { rows })
    }

    /// One line per variant: `label | type hr | type hr`, columns aligned.
    pub fn to_table(&self) -> String {
        let mut variants: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !variants.contains(&r.variant.as_str()) {
                variants.push(&r.variant);
            }
        }
        let width = variants.iter().map(|v| v.len()).max().unwrap_or(0);
        let mut out = String::new();
        for v in variants {
            let _ = write!(out, "{v:<width$}");
            for r in self.rows.iter().filter(|r| r.variant == v) {
                let _ = write!(out, " | {} {:.3}", r.item_type, r.hr);
            }
            out.push('\n');
        }
        out
    }
}

/// Rows of Hit-Rate@K for a trained model on `split`.
pub fn evaluate_rows(
    label: &str,
    split: &EvalSplit,
    params: &crate::two_tower::TwoTowerParams,
    ctx: &FeatureContext<'_>,
    k: usize,
    window_days: u32,
) -> Result<Vec<AblationRow>> {
    Ok(hit_rate_at_k(split, params, ctx, k, window_days)?
        .into_iter()
        .map(|h| AblationRow { variant: label.to_string(), item_type: h.item_type.clone(), k, hr: h.value(), n_events: h.n_events })
        .collect())
}

/// Trains and evaluates each variant on the same temporal split. The
/// type-specific variant reports only its own type.
pub fn run_ablations(data: Dataset<'_>, cfg: &ExperimentConfig, variants: &[Variant]) -> Result<AblationReport> {
    cfg.validate()?;
    if data.catalog.types().top_level().count() < 2 {
        return Err(Error::validation("ablations need at least two top-level item types"));
    }
    let split = temporal_split(data.events, cfg.train_days, cfg.test_days)?;
    let needs_current = variants.iter().any(|v| matches!(v, Variant::Unified | Variant::TypeSpecific(_)));
    let current = if needs_current {
        Some(train_foundation(&split.train, data.catalog, data.text, &cfg.graph, &cfg.hgnn, "current")?)
    } else {
        None
    };

    let mut report = AblationReport::default();
    for variant in variants {
        let mut tt = cfg.two_tower.clone();
        let frozen;
        let store = match variant {
            Variant::Unified => current.as_ref().map(|f| &f.store),
            Variant::TypeSpecific(t) => {
                if data.catalog.types().top_level().all(|ty| &ty.name != t) {
                    return Err(Error::validation(format!("unknown top-level type `{t}`")));
                }
                tt.unified = false;
                tt.target_type = t.clone();
                current.as_ref().map(|f| &f.store)
            }
            Variant::WithoutGnn => {
                tt.use_gnn_features = false;
                None
            }
            Variant::FrozenHgnn => {
                let anchor = split.anchor - i64::from(cfg.frozen_lag_days) * SECONDS_PER_DAY;
                let old = temporal_split_at(data.events, anchor, cfg.train_days, cfg.test_days)?;
                frozen = train_foundation(&old.train, data.catalog, data.text, &cfg.graph, &cfg.hgnn, "frozen")?;
                Some(&frozen.store)
            }
        };
        let ctx = FeatureContext::new(data.catalog, data.text, store, cfg.hgnn.out_dim, tt.aux_dim)?;
        let model = train_two_tower(&split.train, &ctx, &tt)?;
        let mut rows = evaluate_rows(&variant.label(), &split, &model.params, &ctx, cfg.k, tt.window_days)?;
        if let Variant::TypeSpecific(t) = variant {
            rows.retain(|r| &r.item_type == t);
        }
        report.rows.extend(rows);
    }
    Ok(report)
}
