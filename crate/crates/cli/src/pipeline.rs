//! Subcommands. Each reads upstream artifacts from the work directory,
//! writes its own, and leaves a manifest next to them.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use gfm_core::cograph::{build_graph, HeteroGraph};
use gfm_core::corpus::{
    check_events, generate_synthetic, parse_catalog, parse_interactions, text_features, write_catalog,
    write_interactions, Catalog, FeatureProvider, InteractionEvent, ItemRecord, ItemTypes,
};
use gfm_core::eval::{evaluate_rows, export_foundation, recommend_top_k, run_ablations, temporal_split, AblationReport, Dataset, EvalSplit, ItemIndex, Variant};
use gfm_core::hgnn::{train_hgnn, ItemEmbeddingStore};
use gfm_core::two_tower::{
    build_user_profile, read_checkpoint, train_two_tower, user_tower_forward, write_checkpoint, FeatureContext, TwoTowerParams,
    UserProfile,
};
use gfm_core::Matrix;
use sha2::{Digest, Sha256};

use crate::config::PipelineConfig;
use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Command {
    GenData,
    BuildGraph,
    TrainHgnn,
    Train2t,
    Evaluate,
    Ablate,
    Recommend { user: u64, k: usize },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::GenData => "gen-data",
            Command::BuildGraph => "build-graph",
            Command::TrainHgnn => "train-hgnn",
            Command::Train2t => "train-2t",
            Command::Evaluate => "evaluate",
            Command::Ablate => "ablate",
            Command::Recommend { .. } => "recommend",
        }
    }
}

/// What a command produced.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub artifacts: Vec<PathBuf>,
    pub manifest: PathBuf,
    /// Human-readable summary for standard output.
    pub summary: String,
}

struct Run<'a> {
    cfg: &'a PipelineConfig,
    threads: Option<usize>,
    timings: Vec<(&'static str, f64)>,
    artifacts: Vec<PathBuf>,
    summary: String,
}

impl Run<'_> {
    fn timed<T>(&mut self, phase: &'static str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let t = Instant::now();
        let out = f()?;
        self.timings.push((phase, t.elapsed().as_secs_f64()));
        Ok(out)
    }

    fn write(&mut self, path: PathBuf, f: impl FnOnce(&mut BufWriter<File>) -> gfm_core::Result<()>) -> Result<()> {
        let io = |source| CliError::Io { path: path.clone(), source };
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(io)?;
        }
        let mut w = BufWriter::new(File::create(&path).map_err(io)?);
        f(&mut w)?;
        w.flush().map_err(io)?;
        self.artifacts.push(path);
        Ok(())
    }
}

/// Runs `command`, on a dedicated pool of `threads` workers when given.
pub fn run_command(command: &Command, cfg: &PipelineConfig, threads: Option<usize>) -> Result<Outcome> {
    match threads {
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build()?.install(|| dispatch(command, cfg, threads)),
        None => dispatch(command, cfg, None),
    }
}

fn dispatch(command: &Command, cfg: &PipelineConfig, threads: Option<usize>) -> Result<Outcome> {
    let mut run = Run { cfg, threads, timings: Vec::new(), artifacts: Vec::new(), summary: String::new() };
    match command {
        Command::GenData => gen_data(&mut run)?,
        Command::BuildGraph => build_graph_cmd(&mut run)?,
        Command::TrainHgnn => train_hgnn_cmd(&mut run)?,
        Command::Train2t => train_2t(&mut run)?,
        Command::Evaluate => evaluate(&mut run)?,
        Command::Ablate => ablate(&mut run)?,
        Command::Recommend { user, k } => recommend(&mut run, *user, *k)?,
    }
    let manifest = cfg.paths.manifest(command.name());
    let text = manifest_text(command, &run)?;
    let io = |source| CliError::Io { path: manifest.clone(), source };
    fs::write(&manifest, text).map_err(io)?;
    Ok(Outcome { artifacts: run.artifacts, manifest, summary: run.summary })
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

fn manifest_text(command: &Command, run: &Run<'_>) -> Result<String> {
    let mut out = String::new();
    let _ = writeln!(out, "command = {}", command.name());
    if let Command::Recommend { user, k } = command {
        let _ = writeln!(out, "args = --user {user} --k {k}");
    }
    let _ = writeln!(out, "seed = {}", run.cfg.seed);
    let _ = writeln!(out, "config_hash = {}", run.cfg.hash());
    let threads = run.threads.map_or_else(|| "default".to_string(), |n| n.to_string());
    let _ = writeln!(out, "threads = {threads}");
    for (phase, secs) in &run.timings {
        let _ = writeln!(out, "timing.{phase}_s = {secs:.3}");
    }
    for path in &run.artifacts {
        let _ = writeln!(out, "artifact = {} sha256:{}", path.display(), sha256_file(path)?);
    }
    for (k, v) in run.cfg.to_kv().iter() {
        let _ = writeln!(out, "config.{k} = {v}");
    }
    Ok(out)
}

fn open(path: &Path, artifact: &'static str, producer: &'static str) -> Result<BufReader<File>> {
    match File::open(path) {
        Ok(f) => Ok(BufReader::new(f)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            Err(CliError::MissingArtifact { artifact, path: path.to_path_buf(), producer })
        }
        Err(source) => Err(CliError::Io { path: path.to_path_buf(), source }),
    }
}

fn corrupt(artifact: &'static str, path: &Path) -> impl FnOnce(gfm_core::Error) -> CliError {
    let path = path.to_path_buf();
    move |source| CliError::CorruptArtifact { artifact, path, source }
}

/// Catalog, catalog-ordered text features and the checked event log.
struct Loaded {
    catalog: Catalog,
    text: Matrix,
    events: Vec<InteractionEvent>,
}

impl Loaded {
    fn dataset(&self) -> Dataset<'_> {
        Dataset { catalog: &self.catalog, events: &self.events, text: &self.text }
    }
}

fn load_data(cfg: &PipelineConfig) -> Result<Loaded> {
    let p = &cfg.paths;
    let base = p.catalog.parent();
    let catalog = parse_catalog(open(&p.catalog, "catalog", "gen-data")?, ItemTypes::default(), base)
        .map_err(corrupt("catalog", &p.catalog))?;
    let events = parse_interactions(open(&p.interactions, "interaction log", "gen-data")?)
        .map_err(corrupt("interaction log", &p.interactions))?;
    check_events(&events, &catalog)?;
    let text = text_features(&catalog, FeatureProvider::Precomputed)?;
    Ok(Loaded { catalog, text, events })
}

fn split(cfg: &PipelineConfig, data: &Loaded) -> Result<EvalSplit> {
    Ok(temporal_split(&data.events, cfg.experiment.train_days, cfg.experiment.test_days)?)
}

fn load_graph(cfg: &PipelineConfig) -> Result<HeteroGraph> {
    let path = cfg.paths.graph();
    HeteroGraph::read_snapshot(open(&path, "graph snapshot", "build-graph")?).map_err(corrupt("graph snapshot", &path))
}

fn load_store(cfg: &PipelineConfig) -> Result<ItemEmbeddingStore> {
    let path = cfg.paths.embeddings();
    ItemEmbeddingStore::read(open(&path, "embedding store", "train-hgnn")?).map_err(corrupt("embedding store", &path))
}

fn load_model(cfg: &PipelineConfig) -> Result<TwoTowerParams> {
    let path = cfg.paths.checkpoint();
    read_checkpoint(open(&path, "two-tower checkpoint", "train-2t")?).map_err(corrupt("two-tower checkpoint", &path))
}

fn gen_data(run: &mut Run<'_>) -> Result<()> {
    let cfg = run.cfg;
    let data = run.timed("generate", || Ok(generate_synthetic(&cfg.synthetic)?))?;
    let text = text_features(&data.catalog, FeatureProvider::SyntheticTopic(&data.truth.features))?;
    let items = data
        .catalog
        .items()
        .iter()
        .enumerate()
        .map(|(i, r)| ItemRecord { features: Some(text.row(i).to_vec()), ..r.clone() })
        .collect();
    let catalog = Catalog::new(data.catalog.types().clone(), items)?;
    run.write(cfg.paths.catalog.clone(), |w| write_catalog(&catalog, w))?;
    run.write(cfg.paths.interactions.clone(), |w| write_interactions(&data.events, w))?;
    run.summary = format!("{} items, {} events\n", catalog.len(), data.events.len());
    Ok(())
}

fn build_graph_cmd(run: &mut Run<'_>) -> Result<()> {
    let cfg = run.cfg;
    let data = run.timed("load", || load_data(cfg))?;
    let split = split(cfg, &data)?;
    let graph = run.timed("build", || Ok(build_graph(&split.train, &data.catalog, &cfg.experiment.graph)?))?;
    run.write(cfg.paths.graph(), |w| graph.write_snapshot(w))?;
    run.summary = format!("{} nodes, {} edges\n", graph.num_nodes(), graph.num_edges());
    Ok(())
}

fn train_hgnn_cmd(run: &mut Run<'_>) -> Result<()> {
    let cfg = run.cfg;
    let data = run.timed("load", || load_data(cfg))?;
    let graph = load_graph(cfg)?;
    let split = split(cfg, &data)?;
    let features = graph.node_features(&data.catalog, &data.text)?;
    let hgnn = &cfg.experiment.hgnn;
    let training = run.timed("train", || Ok(train_hgnn(&graph, &features, hgnn)?))?;
    let snapshot = format!("t{}", split.anchor);
    let store = run.timed("export", || Ok(export_foundation(&graph, &features, &training.params, hgnn, &snapshot)?))?;
    run.write(cfg.paths.embeddings(), |w| store.write(w))?;
    for m in &training.history {
        let auc = m.auc.map_or_else(|| "-".to_string(), |a| format!("{a:.4}"));
        let _ = writeln!(run.summary, "epoch {} loss {:.5} auc {auc}", m.epoch, m.mean_loss);
    }
    Ok(())
}

fn train_2t(run: &mut Run<'_>) -> Result<()> {
    let cfg = run.cfg;
    let tt = &cfg.experiment.two_tower;
    let data = run.timed("load", || load_data(cfg))?;
    let store = if tt.use_gnn_features { Some(load_store(cfg)?) } else { None };
    let split = split(cfg, &data)?;
    let ctx = FeatureContext::new(&data.catalog, &data.text, store.as_ref(), cfg.experiment.hgnn.out_dim, tt.aux_dim)?;
    let model = run.timed("train", || Ok(train_two_tower(&split.train, &ctx, tt)?))?;
    run.write(cfg.paths.checkpoint(), |w| write_checkpoint(&model.params, w))?;
    let m = &model.metrics;
    run.summary = format!("{} examples, loss {:.4} -> {:.4}\n", m.n_examples, m.initial_loss, m.final_loss());
    Ok(())
}

/// Label of the variant the configured model corresponds to.
fn variant_label(cfg: &PipelineConfig) -> String {
    let tt = &cfg.experiment.two_tower;
    if !tt.unified {
        Variant::TypeSpecific(tt.target_type.clone()).label()
    } else if !tt.use_gnn_features {
        Variant::WithoutGnn.label()
    } else {
        Variant::Unified.label()
    }
}

fn evaluate(run: &mut Run<'_>) -> Result<()> {
    let cfg = run.cfg;
    let data = run.timed("load", || load_data(cfg))?;
    let params = load_model(cfg)?;
    let store = if params.use_gnn_features { Some(load_store(cfg)?) } else { None };
    let ctx = FeatureContext::new(&data.catalog, &data.text, store.as_ref(), params.dims.d_gnn, params.dims.aux_dim)?;
    params.check_compatible(data.catalog.len(), ctx.d_gnn(), ctx.d_text())?;
    let split = split(cfg, &data)?;
    let e = &cfg.experiment;
    let rows = run.timed("evaluate", || {
        Ok(evaluate_rows(&variant_label(cfg), &split, &params, &ctx, e.k, e.two_tower.window_days)?)
    })?;
    let report = AblationReport { rows };
    run.write(cfg.paths.report(), |w| Ok(w.write_all(report.to_structured().as_bytes())?))?;
    run.summary = report.to_table();
    Ok(())
}

/// The top-level type with the fewest events.
fn minority_type(data: &Loaded) -> Result<String> {
    let types: Vec<String> = data.catalog.types().top_level().map(|t| t.name.clone()).collect();
    let mut counts = vec![0usize; types.len()];
    for e in &data.events {
        let top = data.catalog.lift(e.item_id)?;
        let ty = &data.catalog.get(top)?.item_type;
        if let Some(i) = types.iter().position(|t| t == ty) {
            counts[i] += 1;
        }
    }
    let i = (0..types.len())
        .filter(|&i| counts[i] > 0)
        .min_by_key(|&i| (counts[i], i))
        .ok_or_else(|| CliError::BadConfig("no events on any top-level type".into()))?;
    Ok(types[i].clone())
}

fn ablate(run: &mut Run<'_>) -> Result<()> {
    let cfg = run.cfg;
    let data = run.timed("load", || load_data(cfg))?;
    let variants = [Variant::Unified, Variant::TypeSpecific(minority_type(&data)?), Variant::WithoutGnn, Variant::FrozenHgnn];
    let report = run.timed("ablate", || Ok(run_ablations(data.dataset(), &cfg.experiment, &variants)?))?;
    run.write(cfg.paths.ablation_report(), |w| Ok(w.write_all(report.to_structured().as_bytes())?))?;
    run.summary = report.to_table();
    Ok(())
}

/// Top-`k` items of every top-level type for one user, ranked from their
/// whole history. Consumed items are excluded.
fn recommend(run: &mut Run<'_>, user: u64, k: usize) -> Result<()> {
    let cfg = run.cfg;
    let data = run.timed("load", || load_data(cfg))?;
    let params = load_model(cfg)?;
    let store = if params.use_gnn_features { Some(load_store(cfg)?) } else { None };
    let ctx = FeatureContext::new(&data.catalog, &data.text, store.as_ref(), params.dims.d_gnn, params.dims.aux_dim)?;
    params.check_compatible(data.catalog.len(), ctx.d_gnn(), ctx.d_text())?;
    let history: Vec<InteractionEvent> = data.events.iter().filter(|e| e.user_id == user).copied().collect();
    let profile = match data.events.iter().map(|e| e.timestamp).max() {
        Some(last) if !history.is_empty() => {
            build_user_profile(user, &history, last + 1, cfg.experiment.two_tower.window_days, &ctx)?
        }
        _ => UserProfile::empty(user, ctx.d_gnn(), ctx.aux_dim()),
    };
    let u = user_tower_forward(&profile, &params)?;
    let seen = history.iter().map(|e| data.catalog.lift(e.item_id)).collect::<gfm_core::Result<HashSet<u64>>>()?;
    let mut lines = String::new();
    for ty in data.catalog.types().top_level() {
        let index = ItemIndex::for_type(&params, &ctx, &ty.name)?;
        let top = match recommend_top_k(&u, &index, k, &seen) {
            Err(gfm_core::Error::Empty(_)) => Vec::new(),
            other => other?,
        };
        for (rank, (id, score)) in top.into_iter().enumerate() {
            let _ = writeln!(lines, "{}\t{}\t{id}\t{score}", ty.name, rank + 1);
        }
    }
    run.write(cfg.paths.recommendations(user), |w| Ok(w.write_all(lines.as_bytes())?))?;
    run.summary = lines;
    Ok(())
}
