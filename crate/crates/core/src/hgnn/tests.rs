use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::cograph::{edge_split, Edge, HeteroGraph};
use crate::numerics::{dot, grad_check, Matrix};

fn random_graph(n: usize, p: f64, d: usize, seed: u64) -> (HeteroGraph, Matrix) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nodes = (0..n as u64).map(|i| (i * 10 + 3, if i % 3 == 0 { "audiobook" } else { "show" }.to_string())).collect();
    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if rng.random_bool(p) {
                edges.push(Edge { a, b, weight: 1 });
            }
        }
    }
    let g = HeteroGraph::from_edges(nodes, vec!["show".into(), "audiobook".into()], &edges, d).unwrap();
    (g, Matrix::glorot(n, d, &mut rng))
}

fn small_config() -> HgnnConfig {
    HgnnConfig {
        hidden_dim: 6,
        out_dim: 5,
        fanouts: vec![3, 2],
        negatives_per_positive: 2,
        epochs: 2,
        batch_size: 4,
        ..HgnnConfig::default()
    }
}

#[test]
fn gradients_match_finite_differences() {
    let (g, f) = random_graph(9, 0.4, 4, 11);
    let cfg = small_config();
    let params = cfg.init_params(4).unwrap();
    let tuples: Vec<TrainingTuple> = g
        .edges()
        .iter()
        .enumerate()
        .map(|(i, e)| TrainingTuple { query: e.a, positive: e.b, negatives: vec![(e.a + 2 + i) % 9, (e.b + 5) % 9] })
        .filter(|t| !t.negatives.contains(&t.query) && !t.negatives.contains(&t.positive))
        .collect();
    assert!(tuples.len() >= 3);
    // a wide margin keeps every hinge active so the loss is smooth
    let margin = 3.0;
    let (_, grads) = batch_loss(&g, &f, &params, &tuples, &cfg.fanouts, margin, 7).unwrap();
    let x = params.to_flat();
    let mut probe = params.clone();
    let err = grad_check(
        |v| {
            probe.set_flat(v);
            batch_loss(&g, &f, &probe, &tuples, &cfg.fanouts, margin, 7).unwrap().0
        },
        &x,
        &grads.to_flat(),
        1e-5,
    );
    assert!(err < 1e-4, "max relative error {err}");
}

#[test]
fn zero_learning_rate_leaves_parameters_unchanged() {
    let (g, f) = random_graph(12, 0.3, 4, 2);
    let cfg = HgnnConfig { lr: 0.0, ..small_config() };
    let trained = train_hgnn(&g, &f, &cfg).unwrap();
    assert_eq!(trained.params, cfg.init_params(4).unwrap());
    assert_eq!(trained.history.len(), 2);
}

#[test]
fn training_is_deterministic_across_thread_counts() {
    let (g, f) = random_graph(30, 0.2, 4, 3);
    let cfg = HgnnConfig { epochs: 1, ..small_config() };
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| train_hgnn(&g, &f, &cfg).unwrap())
    };
    let (a, b) = (run(1), run(4));
    assert_eq!(a.params, b.params);
    assert_eq!(a.history, b.history);
}

#[test]
fn embeddings_follow_node_relabelling() {
    let (g, f) = random_graph(10, 0.35, 3, 4);
    let params = HgnnConfig { fanouts: vec![50, 50], ..small_config() }.init_params(3).unwrap();
    let all: Vec<usize> = (0..10).collect();
    let base = hgnn_forward(&g, &f, &params, &all, &[50, 50], 1).unwrap();

    let perm: Vec<usize> = vec![7, 2, 9, 0, 5, 1, 8, 3, 6, 4];
    let nodes = perm.iter().map(|&v| (g.node_id(v), g.node_type(v).to_string())).collect();
    let inv: Vec<usize> = (0..10).map(|v| perm.iter().position(|&p| p == v).unwrap()).collect();
    let edges: Vec<Edge> = g
        .edges()
        .iter()
        .map(|e| {
            let (a, b) = (inv[e.a], inv[e.b]);
            Edge { a: a.min(b), b: a.max(b), weight: e.weight }
        })
        .collect();
    let g2 = HeteroGraph::from_edges(nodes, g.type_names().to_vec(), &edges, 3).unwrap();
    let mut f2 = Matrix::zeros(10, 3);
    for (i, &v) in perm.iter().enumerate() {
        f2.row_mut(i).copy_from_slice(f.row(v));
    }
    let moved = hgnn_forward(&g2, &f2, &params, &all, &[50, 50], 1).unwrap();
    for (i, &v) in perm.iter().enumerate() {
        for (x, y) in moved.row(i).iter().zip(base.row(v)) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}

#[test]
fn duplicate_of_existing_node_gets_its_embedding() {
    let (g, f) = random_graph(12, 0.3, 4, 5);
    let params = small_config().init_params(4).unwrap();
    let fanouts = [100, 100];
    let v = (0..12).max_by_key(|&v| g.degree(v)).unwrap();
    let mut edges = Vec::new();
    for r in 0..g.num_relations() {
        edges.extend(g.neighbors(v, r).iter().map(|&u| g.node_id(u as usize)));
    }
    let item = NewItem { item_id: 9999, item_type: g.node_type(v).to_string(), features: f.row(v).to_vec(), edges };
    let fresh = infer_new_item(&g, &f, &params, &item, &fanouts, 0).unwrap();
    let stored = hgnn_forward(&g, &f, &params, &[v], &fanouts, 0).unwrap();
    for (x, y) in fresh.iter().zip(stored.row(0)) {
        assert!((x - y).abs() < 1e-12);
    }
}

#[test]
fn duplicate_under_its_own_id_is_bit_identical_with_sampling() {
    let (g, f) = random_graph(20, 0.4, 4, 6);
    let params = small_config().init_params(4).unwrap();
    let fanouts = [3, 2];
    for v in 0..20 {
        let mut edges = Vec::new();
        for r in 0..g.num_relations() {
            edges.extend(g.neighbors(v, r).iter().map(|&u| g.node_id(u as usize)));
        }
        let item = NewItem { item_id: g.node_id(v), item_type: g.node_type(v).to_string(), features: f.row(v).to_vec(), edges };
        let fresh = infer_new_item(&g, &f, &params, &item, &fanouts, 21).unwrap();
        let stored = hgnn_forward(&g, &f, &params, &[v], &fanouts, 21).unwrap();
        let bits = |xs: &[f64]| xs.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&fresh), bits(stored.row(0)), "node {v}");
    }
}

/// Counts positive-over-negative wins pair by pair, ties as one half.
fn brute_force_auc(pos: &[f64], neg: &[f64]) -> f64 {
    let mut wins = 0.0;
    for p in pos {
        for n in neg {
            wins += if p > n {
                1.0
            } else if p == n {
                0.5
            } else {
                0.0
            };
        }
    }
    wins / (pos.len() * neg.len()) as f64
}

#[test]
fn recovers_planted_clusters() {
    let n = 60;
    let d = 8;
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let cluster = |v: usize| v % 2;
    let nodes = (0..n as u64).map(|i| (i, if i % 4 < 2 { "show" } else { "audiobook" }.to_string())).collect();
    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            let p = if cluster(a) == cluster(b) { 0.9 } else { 0.02 };
            if rng.random_bool(p) {
                edges.push(Edge { a, b, weight: 1 });
            }
        }
    }
    let mut features = Matrix::zeros(n, d);
    for v in 0..n {
        for j in 0..d {
            let signal = if j == cluster(v) { 1.0 } else { 0.0 };
            features.set(v, j, signal + 0.8 * (rng.random::<f64>() - 0.5));
        }
    }
    let g = HeteroGraph::from_edges(nodes, vec!["show".into(), "audiobook".into()], &edges, d).unwrap();
    let (train_graph, held) = edge_split(&g, 0.15, 9).unwrap();
    let cfg = HgnnConfig { holdout_fraction: 0.0, ..HgnnConfig::default() };
    let trained = train_hgnn(&train_graph, &features, &cfg).unwrap();
    let negatives = sample_non_edges(&g, held.len(), 3);
    let all: Vec<usize> = (0..n).collect();
    let emb = hgnn_forward(&train_graph, &features, &trained.params, &all, &cfg.fanouts, 0).unwrap();
    let pos: Vec<f64> = held.iter().map(|e| dot(emb.row(e.a), emb.row(e.b))).collect();
    let neg: Vec<f64> = negatives.iter().map(|&(a, b)| dot(emb.row(a), emb.row(b))).collect();
    let oracle = brute_force_auc(&pos, &neg);
    assert!((rank_auc(&pos, &neg).unwrap() - oracle).abs() < 1e-12);
    assert!(oracle >= 0.9, "held-out AUC {oracle}");
    let first = trained.history.first().unwrap().mean_loss;
    let last = trained.history.last().unwrap().mean_loss;
    assert!(last < first, "loss {first} -> {last}");
}

#[test]
fn store_export_covers_every_node() {
    let (g, f) = random_graph(15, 0.3, 4, 8);
    let params = small_config().init_params(4).unwrap();
    let store = export_embeddings(&g, &f, &params, &[3, 2], 0, "s1").unwrap();
    assert_eq!(store.len(), 15);
    assert_eq!(store.dim(), 5);
    let direct = hgnn_forward(&g, &f, &params, &[4], &[3, 2], 0).unwrap();
    assert_eq!(store.get(g.node_id(4)).unwrap(), direct.row(0));
}

#[test]
fn rejects_graphs_without_edges() {
    let nodes = (0..4u64).map(|i| (i, "show".to_string())).collect();
    let g = HeteroGraph::from_edges(nodes, vec!["show".into()], &[], 2).unwrap();
    assert!(train_hgnn(&g, &Matrix::zeros(4, 2), &small_config()).is_err());
}
