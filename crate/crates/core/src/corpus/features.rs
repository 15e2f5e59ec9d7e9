use std::collections::HashMap;

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use super::Catalog;
use crate::error::{Error, Result};
use crate::numerics::{l2_normalize, Matrix};
use crate::rng;

/// Maps topic mixtures into a `d_text`-dimensional feature space and adds
/// per-item Gaussian noise. Stands in for a sentence encoder on synthetic data.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicFeatureModel {
    pub mixtures: HashMap<u64, Vec<f64>>,
    pub n_topics: usize,
    pub d_text: usize,
    pub noise_std: f64,
    pub seed: u64,
    /// `n_topics × d_text`; topic `k` maps to axis `k` when `d_text >= n_topics`.
    projection: Matrix,
}

impl TopicFeatureModel {
    pub fn new(
        mixtures: HashMap<u64, Vec<f64>>,
        n_topics: usize,
        d_text: usize,
        noise_std: f64,
        seed: u64,
    ) -> Result<Self> {
        if n_topics == 0 || d_text == 0 {
            return Err(Error::validation("topic feature model needs n_topics >= 1 and d_text >= 1"));
        }
        if !(noise_std >= 0.0 && noise_std.is_finite()) {
            return Err(Error::validation(format!("noise_std must be >= 0, got {noise_std}")));
        }
        if let Some((id, m)) = mixtures.iter().find(|(_, m)| m.len() != n_topics) {
            return Err(Error::validation(format!(
                "item {id} has a {}-topic mixture, expected {n_topics}",
                m.len()
            )));
        }
        let mut projection = Matrix::zeros(n_topics, d_text);
        if d_text >= n_topics {
            for k in 0..n_topics {
                projection.set(k, k, 1.0);
            }
        } else {
            let mut r = rng::stream(seed, &[0x70_70]);
            for k in 0..n_topics {
                let row = projection.row_mut(k);
                for v in row.iter_mut() {
                    *v = StandardNormal.sample(&mut r);
                }
                l2_normalize(row);
            }
        }
        Ok(TopicFeatureModel { mixtures, n_topics, d_text, noise_std, seed, projection })
    }

    pub fn features(&self, item_id: u64) -> Result<Vec<f64>> {
        let mix = self.mixtures.get(&item_id).ok_or(Error::UnknownItem(item_id))?;
        let mut out = vec![0.0; self.d_text];
        for (k, &w) in mix.iter().enumerate() {
            for (o, p) in out.iter_mut().zip(self.projection.row(k)) {
                *o += w * p;
            }
        }
        if self.noise_std > 0.0 {
            let noise = Normal::new(0.0, self.noise_std).expect("validated noise_std");
            let mut r = rng::stream(self.seed, &[0x6e_6f_69_73_65, item_id]);
            for o in &mut out {
                *o += noise.sample(&mut r);
            }
        }
        Ok(out)
    }
}

/// Where item text features come from.
#[derive(Debug, Clone, Copy)]
pub enum FeatureProvider<'a> {
    /// Use the vectors stored in the catalog.
    Precomputed,
    SyntheticTopic(&'a TopicFeatureModel),
}

/// One row per catalog item, in catalog order.
pub fn text_features(catalog: &Catalog, provider: FeatureProvider<'_>) -> Result<Matrix> {
    match provider {
        FeatureProvider::Precomputed => {
            let d = catalog
                .d_text()
                .ok_or_else(|| Error::validation("catalog has no precomputed features"))?;
            let mut m = Matrix::zeros(catalog.len(), d);
            for (i, item) in catalog.items().iter().enumerate() {
                let f = item.features.as_ref().ok_or_else(|| {
                    Error::validation(format!("item {} has no precomputed features", item.item_id))
                })?;
                m.row_mut(i).copy_from_slice(f);
            }
            Ok(m)
        }
        FeatureProvider::SyntheticTopic(model) => {
            let mut m = Matrix::zeros(catalog.len(), model.d_text);
            for (i, item) in catalog.items().iter().enumerate() {
                m.row_mut(i).copy_from_slice(&model.features(item.item_id)?);
            }
            Ok(m)
        }
    }
}

/// Topic mixture with `dominant` weighted 0.7 and the remainder spread
/// evenly over the other topics.
pub fn dominant_mixture(n_topics: usize, dominant: usize) -> Vec<f64> {
    if n_topics == 1 {
        return vec![1.0];
    }
    let rest = 0.3 / (n_topics - 1) as f64;
    let mut m = vec![rest; n_topics];
    m[dominant] = 0.7;
    m
}

pub(crate) fn sample_dirichlet<R: Rng + ?Sized>(alpha: f64, n: usize, r: &mut R) -> Vec<f64> {
    let gamma = rand_distr::Gamma::new(alpha, 1.0).expect("alpha > 0");
    let mut v: Vec<f64> = (0..n).map(|_| gamma.sample(r)).collect();
    let s: f64 = v.iter().sum();
    if s > 0.0 {
        v.iter_mut().for_each(|x| *x /= s);
    } else {
        v.iter_mut().for_each(|x| *x = 1.0 / n as f64);
    }
    v
}
