use gfm_core::corpus::{generate_synthetic, text_features, FeatureProvider, SyntheticConfig};
use gfm_core::eval::{temporal_split, train_foundation, ExperimentConfig};
use gfm_core::two_tower::{train_two_tower, FeatureContext};

#[test]
fn default_training_cuts_the_loss_by_a_fifth() {
    let data = generate_synthetic(&SyntheticConfig::default()).unwrap();
    let text = text_features(&data.catalog, FeatureProvider::SyntheticTopic(&data.truth.features)).unwrap();
    let cfg = ExperimentConfig::default();
    let split = temporal_split(&data.events, cfg.train_days, cfg.test_days).unwrap();
    let f = train_foundation(&split.train, &data.catalog, &text, &cfg.graph, &cfg.hgnn, "t").unwrap();
    let ctx = FeatureContext::new(&data.catalog, &text, Some(&f.store), 0, 0).unwrap();
    let trained = train_two_tower(&split.train, &ctx, &cfg.two_tower).unwrap();
    let m = &trained.metrics;
    assert_eq!(m.epoch_losses.len(), cfg.two_tower.epochs);
    assert!(m.final_loss() <= 0.8 * m.initial_loss, "loss {} -> {}", m.initial_loss, m.final_loss());
    assert!(trained.params.is_finite());
}
