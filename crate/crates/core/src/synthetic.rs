//! Seeded synthetic datasets with known structure, used by the examples,
//! the tests and the acceptance suite.

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use crate::amf::{reconstruct, AmfModel};
use crate::correlation::CorrelationDataset;
use crate::error::{LavaError, Result};
use crate::io::{EmbeddingMatrix, FeatureMatrix, SampleLabels};
use crate::matrix::Matrix;
use crate::rng::{derive_seed, rng_from_seed};

/// Correlation data generated from planted modules and presences.
#[derive(Debug, Clone)]
pub struct PlantedData {
    pub truth: AmfModel,
    pub data: CorrelationDataset,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantedSpec {
    pub num_localities: usize,
    pub num_features: usize,
    pub num_modules: usize,
    pub noise_sigma: f64,
    /// Chance that a module is present in a given locality.
    pub presence_rate: f64,
}

impl Default for PlantedSpec {
    fn default() -> Self {
        PlantedSpec {
            num_localities: 200,
            num_features: 25,
            num_modules: 4,
            noise_sigma: 0.02,
            presence_rate: 0.4,
        }
    }
}

/// Modules with disjoint random supports (values in `[0.5, 1]`), so they are
/// mutually orthogonal; each locality carries each module with probability
/// `presence_rate` (at least one) at a presence in `[0.3, 1]`. The data is
/// the max-reconstruction plus Gaussian noise, clipped to `[0, 1]`.
pub fn planted(spec: PlantedSpec, seed: u64) -> Result<PlantedData> {
    let k = spec.num_features * spec.num_features.saturating_sub(1) / 2;
    if spec.num_modules == 0 || k < spec.num_modules || spec.num_localities == 0 {
        return Err(LavaError::param("planted data needs modules, pairs and localities"));
    }
    let mut rng = rng_from_seed(derive_seed(seed, "planted", 0));
    let mut cols: Vec<usize> = (0..k).collect();
    cols.shuffle(&mut rng);
    let mut modules = Matrix::zeros(spec.num_modules, k);
    for (slot, &c) in cols.iter().enumerate() {
        // roughly half the pairs belong to some module; the rest stay empty
        if slot % 2 == 0 {
            let m = (slot / 2) % spec.num_modules;
            modules.set(m, c, rng.random_range(0.5..=1.0));
        }
    }
    let mut presences = Matrix::zeros(spec.num_localities, spec.num_modules);
    for i in 0..spec.num_localities {
        let mut any = false;
        for m in 0..spec.num_modules {
            if rng.random::<f64>() < spec.presence_rate {
                presences.set(i, m, rng.random_range(0.3..=1.0));
                any = true;
            }
        }
        if !any {
            let m = rng.random_range(0..spec.num_modules);
            presences.set(i, m, rng.random_range(0.3..=1.0));
        }
    }
    let truth = AmfModel::new(modules, presences)?;
    let mut c = reconstruct(&truth);
    if spec.noise_sigma > 0.0 {
        let noise = Normal::new(0.0, spec.noise_sigma).map_err(|e| LavaError::param(e.to_string()))?;
        for v in c.as_mut_slice() {
            *v = (*v + noise.sample(&mut rng)).clamp(0.0, 1.0);
        }
    }
    let data = CorrelationDataset::from_matrix(&c, spec.num_features, 0.75)?;
    Ok(PlantedData { truth, data })
}

/// Points on a regular `rows x cols` lattice with unit spacing.
pub fn uniform_grid(rows: usize, cols: usize) -> Result<EmbeddingMatrix> {
    EmbeddingMatrix::new(Matrix::from_fn(rows * cols, 2, |i, d| {
        if d == 0 {
            (i % cols) as f64
        } else {
            (i / cols) as f64
        }
    }))
}

/// Paired embedding, feature and label data.
#[derive(Debug, Clone)]
pub struct SampleDataset {
    pub embeddings: EmbeddingMatrix,
    pub features: FeatureMatrix,
    pub labels: SampleLabels,
}

/// Three Gaussian blobs in a 2-D latent space. Within blob `b` a distinct
/// group of features shares a latent factor, so their correlations are
/// high there and near zero elsewhere. Labels name the blob (`a`, `b`, `c`).
/// Feature 19 of 20 is mostly constant, exercising the constant filter.
pub fn clustered_samples(num_samples: usize, num_features: usize, seed: u64) -> Result<SampleDataset> {
    if num_samples < 3 || num_features < 6 {
        return Err(LavaError::param("need at least 3 samples and 6 features"));
    }
    let mut rng = rng_from_seed(derive_seed(seed, "clustered", 0));
    let unit = Normal::new(0.0, 1.0).unwrap();
    let centers = [(-4.0, 0.0), (4.0, 0.0), (0.0, 6.0)];
    let names = ["a", "b", "c"];
    let group = num_features / 4;
    let mut emb = Matrix::zeros(num_samples, 2);
    let mut feat = Matrix::zeros(num_samples, num_features);
    let mut labels = Vec::with_capacity(num_samples);
    for s in 0..num_samples {
        let b = s % 3;
        emb.set(s, 0, centers[b].0 + 1.5 * unit.sample(&mut rng));
        emb.set(s, 1, centers[b].1 + 1.5 * unit.sample(&mut rng));
        let factor: f64 = unit.sample(&mut rng);
        for j in 0..num_features {
            let mut v = unit.sample(&mut rng);
            if j / group == b && j < 3 * group {
                v += 2.0 * factor;
            }
            feat.set(s, j, v);
        }
        if rng.random::<f64>() < 0.9 {
            feat.set(s, num_features - 1, 0.0);
        }
        labels.push(names[b].to_string());
    }
    let feature_names = (0..num_features).map(|j| format!("feat{j}")).collect();
    Ok(SampleDataset {
        embeddings: EmbeddingMatrix::new(emb)?,
        features: FeatureMatrix::new(feat, Some(feature_names))?,
        labels: SampleLabels {
            name: "cluster".into(),
            labels,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::cosine_similarity;

    #[test]
    fn planted_modules_are_orthogonal() {
        let p = planted(PlantedSpec::default(), 3).unwrap();
        assert_eq!(p.data.num_pairs(), 300);
        assert_eq!(p.data.num_localities(), 200);
        for a in 0..4 {
            for b in a + 1..4 {
                let cos = cosine_similarity(p.truth.modules.row(a), p.truth.modules.row(b));
                assert_eq!(cos, 0.0);
            }
        }
        assert!(p.truth.presences.iter_rows().all(|r| r.iter().any(|&v| v > 0.0)));
    }

    #[test]
    fn generators_are_seeded() {
        let a = clustered_samples(60, 20, 1).unwrap();
        let b = clustered_samples(60, 20, 1).unwrap();
        assert_eq!(a.features.matrix(), b.features.matrix());
        assert_eq!(a.labels.vocabulary(), vec!["a", "b", "c"]);
        assert_eq!(uniform_grid(4, 5).unwrap().num_samples(), 20);
    }
}
