//! Shared fixtures for the benchmarks.

use gfm_core::cograph::{build_graph, GraphBuildConfig, HeteroGraph};
use gfm_core::corpus::{generate_synthetic, text_features, FeatureProvider, SyntheticConfig, SyntheticDataset};
use gfm_core::eval::{train_foundation, ExperimentConfig, Foundation};
use gfm_core::hgnn::HgnnConfig;
use gfm_core::Matrix;

pub struct Fixture {
    pub data: SyntheticDataset,
    pub text: Matrix,
    pub experiment: ExperimentConfig,
}

impl Fixture {
    /// The default synthetic dataset, or a scaled-down one.
    pub fn new(n_users: usize) -> Self {
        let data = generate_synthetic(&SyntheticConfig { n_users, ..SyntheticConfig::default() }).expect("valid config");
        let text = text_features(&data.catalog, FeatureProvider::SyntheticTopic(&data.truth.features)).expect("features");
        Fixture { data, text, experiment: ExperimentConfig::default() }
    }

    pub fn graph(&self) -> HeteroGraph {
        build_graph(&self.data.events, &self.data.catalog, &self.experiment.graph).expect("graph")
    }

    pub fn graph_with(&self, cfg: &GraphBuildConfig) -> HeteroGraph {
        build_graph(&self.data.events, &self.data.catalog, cfg).expect("graph")
    }

    /// A quickly trained foundation model over the whole log.
    pub fn foundation(&self, epochs: usize) -> Foundation {
        let hgnn = HgnnConfig { epochs, holdout_fraction: 0.0, ..self.experiment.hgnn.clone() };
        train_foundation(&self.data.events, &self.data.catalog, &self.text, &self.experiment.graph, &hgnn, "bench")
            .expect("foundation")
    }
}
