//! Probe placement: choose `ell` latent points whose n-neighborhoods
//! reproduce the relative in-degree centrality of the sample neighborhoods.
//!
//! Samples are weighted by `(in_neighborhood / E)^alpha * (1 / avg_n_distance)^beta`,
//! weighted k-means centroids become probes, and DIRECT searches
//! `(alpha, beta)` to minimize the L1 gap between neighborhood and locality
//! in-degree (both normalized to sum to `n`).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::direct::{self, DirectOptions};
use crate::error::{LavaError, Result};
use crate::io::{self, EmbeddingMatrix, MatrixFormat};
use crate::kmeans::{weighted_kmeans_with, KMeansOptions};
use crate::matrix::Matrix;
use crate::neighbors::{knn, CentralityProfile};

pub const PROBES_FILE: &str = "probes.bin";
pub const MEMBERS_FILE: &str = "members.bin";
pub const REPORT_FILE: &str = "placement.json";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlacementConfig {
    pub direct_budget: usize,
    pub direct_epsilon: f64,
    /// Half width of the alpha/beta search box; `None` means `2 * latent dim`.
    pub search_half_width: Option<f64>,
    pub kmeans_max_iters: usize,
    pub kmeans_restarts: usize,
    /// Seed shared by every k-means run so the DIRECT objective is deterministic.
    pub seed: u64,
}

impl Default for PlacementConfig {
    fn default() -> Self {
        PlacementConfig {
            direct_budget: 40,
            direct_epsilon: 1e-4,
            search_half_width: None,
            kmeans_max_iters: 300,
            kmeans_restarts: 1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlacementParams {
    pub alpha: f64,
    pub beta: f64,
}

/// Probes and the n nearest samples of each, nearest first.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalitySet {
    pub probes: Matrix,
    pub members: Vec<Vec<usize>>,
}

impl LocalitySet {
    pub fn ell(&self) -> usize {
        self.probes.rows()
    }

    pub fn n(&self) -> usize {
        self.members.first().map_or(0, Vec::len)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        io::ensure_dir(dir)?;
        io::save_matrix(&self.probes, dir.join(PROBES_FILE), MatrixFormat::Binary)?;
        io::save_index_matrix(&self.members, &dir.join(MEMBERS_FILE))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let probes = io::load_matrix(dir.join(PROBES_FILE), MatrixFormat::Binary)?;
        let members = io::load_index_matrix(&dir.join(MEMBERS_FILE))?;
        if members.len() != probes.rows() {
            return Err(LavaError::format(
                dir.join(MEMBERS_FILE),
                format!("{} member rows for {} probes", members.len(), probes.rows()),
            ));
        }
        Ok(LocalitySet { probes, members })
    }

    /// Checks that every member index addresses one of `num_samples` samples.
    pub fn check_samples(&self, num_samples: usize) -> Result<()> {
        for (l, row) in self.members.iter().enumerate() {
            if let Some(&bad) = row.iter().find(|&&i| i >= num_samples) {
                return Err(LavaError::data(format!(
                    "locality {l} references sample {bad}, but only {num_samples} samples exist"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlacementEvaluation {
    pub alpha: f64,
    pub beta: f64,
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlacementReport {
    pub schema_version: u32,
    pub num_samples: usize,
    pub n: usize,
    pub ell: usize,
    pub search_box: [f64; 2],
    pub best_alpha: f64,
    pub best_beta: f64,
    pub best_loss: f64,
    pub evaluations: Vec<PlacementEvaluation>,
    pub locality_in_degree: Vec<usize>,
}

/// `round(E * o / n)`, rounding halves away from zero.
pub fn locality_count(num_samples: usize, overlap: f64, n: usize) -> Result<usize> {
    if n == 0 || !(overlap > 0.0) {
        return Err(LavaError::param("n and o must be positive"));
    }
    let ell = (num_samples as f64 * overlap / n as f64).round();
    if ell < 1.0 {
        return Err(LavaError::param(format!(
            "E * o / n = {} rounds to zero localities",
            num_samples as f64 * overlap / n as f64
        )));
    }
    Ok(ell as usize)
}

/// Per-sample k-means weights.
///
/// Zero average distances are replaced by the smallest positive one; a zero
/// in-degree gives weight 0 for `alpha > 0`, factor 1 for `alpha == 0`, and
/// is replaced by the smallest positive in-degree for `alpha < 0`.
pub fn sample_weights(profile: &CentralityProfile, params: PlacementParams) -> Vec<f64> {
    let e = profile.num_samples() as f64;
    let min_dist = profile
        .avg_n_distance
        .iter()
        .cloned()
        .filter(|&d| d > 0.0)
        .fold(f64::INFINITY, f64::min);
    let min_dist = if min_dist.is_finite() { min_dist } else { 1.0 };
    let min_count = profile
        .in_neighborhood
        .iter()
        .cloned()
        .filter(|&c| c > 0)
        .min()
        .unwrap_or(1);
    profile
        .in_neighborhood
        .iter()
        .zip(&profile.avg_n_distance)
        .map(|(&count, &dist)| {
            let centrality = if count > 0 {
                (count as f64 / e).powf(params.alpha)
            } else if params.alpha > 0.0 {
                0.0
            } else if params.alpha == 0.0 {
                1.0
            } else {
                (min_count as f64 / e).powf(params.alpha)
            };
            let dist = if dist > 0.0 { dist } else { min_dist };
            centrality * (1.0 / dist).powf(params.beta)
        })
        .collect()
}

/// Number of localities each sample belongs to.
pub fn locality_in_degree(localities: &LocalitySet, num_samples: usize) -> Vec<usize> {
    let mut deg = vec![0usize; num_samples];
    for row in &localities.members {
        for &i in row {
            deg[i] += 1;
        }
    }
    deg
}

/// Sum over samples of `|in_neighborhood / E - in_locality / ell|`.
pub fn placement_loss(profile: &CentralityProfile, localities: &LocalitySet) -> f64 {
    let e = profile.num_samples();
    let ell = localities.ell() as f64;
    let deg = locality_in_degree(localities, e);
    profile
        .in_neighborhood
        .iter()
        .zip(&deg)
        .map(|(&nb, &loc)| (nb as f64 / e as f64 - loc as f64 / ell).abs())
        .sum()
}

/// Localities as the n nearest samples around each probe.
pub fn build_localities(embeddings: &EmbeddingMatrix, probes: Matrix, n: usize) -> Result<LocalitySet> {
    let index = knn(embeddings.matrix(), &probes, n)?;
    Ok(LocalitySet {
        members: index.to_rows(),
        probes,
    })
}

/// Symmetric alpha/beta search box half width for a latent dimensionality.
pub fn search_half_width(cfg: &PlacementConfig, latent_dim: usize) -> f64 {
    cfg.search_half_width.unwrap_or(2.0 * latent_dim as f64)
}

/// Places localities for one `(alpha, beta)`. Returns `None` when fewer
/// samples than `ell` carry positive weight.
pub fn place_with_params(
    embeddings: &EmbeddingMatrix,
    profile: &CentralityProfile,
    ell: usize,
    n: usize,
    params: PlacementParams,
    cfg: &PlacementConfig,
) -> Result<Option<LocalitySet>> {
    let weights = sample_weights(profile, params);
    let positive = weights.iter().filter(|&&w| w > 0.0).count();
    if positive < ell || weights.iter().any(|w| !w.is_finite()) {
        return Ok(None);
    }
    let opts = KMeansOptions {
        max_iters: cfg.kmeans_max_iters,
        restarts: cfg.kmeans_restarts,
    };
    let km = weighted_kmeans_with(embeddings.matrix(), &weights, ell, cfg.seed, &opts)?;
    build_localities(embeddings, km.centroids, n).map(Some)
}

/// Runs DIRECT over `(alpha, beta)` and returns the localities of the best pair.
pub fn optimize_placement(
    embeddings: &EmbeddingMatrix,
    profile: &CentralityProfile,
    config: &PipelineConfig,
) -> Result<(LocalitySet, PlacementReport)> {
    let n = config.neighborhood_size()?;
    let e = embeddings.num_samples();
    if n >= e {
        return Err(LavaError::param(format!(
            "n must be smaller than the number of samples (n = {n}, E = {e})"
        )));
    }
    if profile.num_samples() != e {
        return Err(LavaError::param("centrality profile does not match embeddings"));
    }
    let ell = locality_count(e, config.overlap()?, n)?;
    let cfg = &config.placement;
    if cfg.direct_budget < 1 {
        return Err(LavaError::param("DIRECT evaluation budget must be at least 1"));
    }
    let half = search_half_width(cfg, embeddings.dim());
    // worst case: the two normalized in-degree vectors each sum to n
    let penalty = 2.0 * n as f64;

    let objective = |x: &[f64]| -> f64 {
        let params = PlacementParams {
            alpha: x[0],
            beta: x[1],
        };
        match place_with_params(embeddings, profile, ell, n, params, cfg) {
            Ok(Some(loc)) => placement_loss(profile, &loc),
            _ => penalty,
        }
    };
    let opts = DirectOptions {
        max_evaluations: cfg.direct_budget,
        epsilon: cfg.direct_epsilon,
        ..DirectOptions::default()
    };
    let res = direct::minimize(objective, &[-half, -half], &[half, half], &opts)?;

    let best = PlacementParams {
        alpha: res.x[0],
        beta: res.x[1],
    };
    let localities = place_with_params(embeddings, profile, ell, n, best, cfg)?.ok_or_else(|| {
        LavaError::Numerical("no (alpha, beta) in the search box gives enough weighted samples".into())
    })?;
    let best_loss = placement_loss(profile, &localities);
    let report = PlacementReport {
        schema_version: 1,
        num_samples: e,
        n,
        ell,
        search_box: [-half, half],
        best_alpha: best.alpha,
        best_beta: best.beta,
        best_loss,
        evaluations: res
            .evaluations
            .iter()
            .map(|ev| PlacementEvaluation {
                alpha: ev.x[0],
                beta: ev.x[1],
                loss: ev.value,
            })
            .collect(),
        locality_in_degree: locality_in_degree(&localities, e),
    };
    Ok((localities, report))
}
