//! Stability-based choice of the module count: repeated AMF runs, k-medoids
//! over the pooled modules with cosine distance, and the silhouette width
//! of that clustering.

use rand::seq::index::sample;
use rayon::prelude::*;
use serde::Serialize;

use crate::amf::{fit, AmfConfig, AmfRunResult};
use crate::correlation::CorrelationDataset;
use crate::error::{LavaError, Result};
use crate::matrix::{cosine_similarity, norm, Matrix};
use crate::rng::{derive_seed, rng_from_seed};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionConfig {
    pub num_runs: usize,
    pub candidate_module_counts: Vec<usize>,
    pub medoid_restarts: usize,
    /// Module count to keep; `None` applies the default rule in [`choose_module_count`].
    pub chosen_module_count: Option<usize>,
    /// Give every run of a candidate the same seed (determinism checks).
    pub reuse_seed: bool,
    pub seed: u64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            num_runs: 10,
            candidate_module_counts: vec![9],
            medoid_restarts: 5,
            chosen_module_count: None,
            reuse_seed: false,
            seed: 0,
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_runs < 2 {
            return Err(LavaError::param("num_runs must be at least 2"));
        }
        if self.candidate_module_counts.is_empty() || self.candidate_module_counts.contains(&0) {
            return Err(LavaError::param(
                "candidates must be a non-empty list of positive counts",
            ));
        }
        if self.medoid_restarts < 1 {
            return Err(LavaError::param("medoid_restarts must be at least 1"));
        }
        Ok(())
    }

    pub fn run_seed(&self, num_modules: usize, run: usize) -> u64 {
        let run = if self.reuse_seed { 0 } else { run as u64 };
        derive_seed(self.seed, &format!("amf-run-m{num_modules}"), run)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MedoidClustering {
    pub medoids: Vec<usize>,
    /// Position in `medoids` of each vector's medoid.
    pub assignments: Vec<usize>,
    pub cost: f64,
}

/// `1 - cos`, with zero vectors at distance 1 from everything but themselves.
pub fn cosine_distance_matrix(vectors: &Matrix) -> Matrix {
    let n = vectors.rows();
    let mut d = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let v = (1.0 - cosine_similarity(vectors.row(i), vectors.row(j))).max(0.0);
            d.set(i, j, v);
            d.set(j, i, v);
        }
    }
    d
}

fn assign(d: &Matrix, medoids: &[usize]) -> (Vec<usize>, f64) {
    let mut cost = 0.0;
    let assignments = (0..d.rows())
        .map(|j| {
            let (pos, dist) = medoids
                .iter()
                .enumerate()
                .map(|(p, &m)| (p, d.get(j, m)))
                .fold((0, f64::INFINITY), |b, x| if x.1 < b.1 { x } else { b });
            cost += dist;
            pos
        })
        .collect();
    (assignments, cost)
}

fn total_cost(d: &Matrix, medoids: &[usize]) -> f64 {
    (0..d.rows())
        .map(|j| medoids.iter().map(|&m| d.get(j, m)).fold(f64::INFINITY, f64::min))
        .sum()
}

fn build_init(d: &Matrix, k: usize) -> Vec<usize> {
    let n = d.rows();
    let first = (0..n)
        .map(|i| (i, (0..n).map(|j| d.get(i, j)).sum::<f64>()))
        .fold((0, f64::INFINITY), |b, x| if x.1 < b.1 { x } else { b })
        .0;
    let mut medoids = vec![first];
    let mut nearest: Vec<f64> = (0..n).map(|j| d.get(j, first)).collect();
    while medoids.len() < k {
        let (pick, _) = (0..n)
            .filter(|i| !medoids.contains(i))
            .map(|i| {
                let gain: f64 = (0..n).map(|j| (nearest[j] - d.get(j, i)).max(0.0)).sum();
                (i, gain)
            })
            .fold((usize::MAX, f64::NEG_INFINITY), |b, x| if x.1 > b.1 { x } else { b });
        medoids.push(pick);
        for (j, near) in nearest.iter_mut().enumerate() {
            *near = near.min(d.get(j, pick));
        }
    }
    medoids
}

fn swap_phase(d: &Matrix, medoids: &mut [usize]) -> f64 {
    let n = d.rows();
    let mut cost = total_cost(d, medoids);
    loop {
        let mut best: Option<(usize, usize, f64)> = None;
        for pos in 0..medoids.len() {
            let old = medoids[pos];
            for h in 0..n {
                if medoids.contains(&h) {
                    continue;
                }
                medoids[pos] = h;
                let c = total_cost(d, medoids);
                medoids[pos] = old;
                if c < cost - 1e-12 && best.is_none_or(|b| c < b.2) {
                    best = Some((pos, h, c));
                }
            }
        }
        match best {
            Some((pos, h, c)) => {
                medoids[pos] = h;
                cost = c;
            }
            None => return cost,
        }
    }
}

/// PAM over cosine distances: the first attempt starts from the greedy
/// BUILD initialization, later ones from random medoids; the cheapest
/// result is kept.
pub fn k_medoids_cosine(vectors: &Matrix, k: usize, restarts: usize, seed: u64) -> Result<MedoidClustering> {
    let n = vectors.rows();
    if k == 0 || k > n {
        return Err(LavaError::param(format!("k = {k} must be in [1, {n}]")));
    }
    let d = cosine_distance_matrix(vectors);
    let mut best: Option<(Vec<usize>, f64)> = None;
    for r in 0..restarts.max(1) {
        let mut medoids = if r == 0 {
            build_init(&d, k)
        } else {
            let mut rng = rng_from_seed(derive_seed(seed, "kmedoids", r as u64));
            sample(&mut rng, n, k).into_vec()
        };
        let cost = swap_phase(&d, &mut medoids);
        if best.as_ref().is_none_or(|b| cost < b.1) {
            best = Some((medoids, cost));
        }
    }
    let (medoids, _) = best.unwrap();
    let (assignments, cost) = assign(&d, &medoids);
    Ok(MedoidClustering {
        medoids,
        assignments,
        cost,
    })
}

/// Mean silhouette width under cosine distance. Members of singleton
/// clusters score 0.
pub fn silhouette_cosine(vectors: &Matrix, assignments: &[usize]) -> Result<f64> {
    let n = vectors.rows();
    if assignments.len() != n {
        return Err(LavaError::param("one assignment per vector required"));
    }
    let mut labels: Vec<usize> = assignments.to_vec();
    labels.sort_unstable();
    labels.dedup();
    if labels.len() < 2 {
        return Err(LavaError::param("silhouette needs at least two clusters"));
    }
    let d = cosine_distance_matrix(vectors);
    let mut total = 0.0;
    for i in 0..n {
        let mut sums = vec![0.0; labels.len()];
        let mut counts = vec![0usize; labels.len()];
        for (j, a) in assignments.iter().enumerate() {
            if j != i {
                let l = labels.binary_search(a).unwrap();
                sums[l] += d.get(i, j);
                counts[l] += 1;
            }
        }
        let own = labels.binary_search(&assignments[i]).unwrap();
        if counts[own] == 0 {
            continue;
        }
        let a = sums[own] / counts[own] as f64;
        let b = (0..labels.len())
            .filter(|&l| l != own && counts[l] > 0)
            .map(|l| sums[l] / counts[l] as f64)
            .fold(f64::INFINITY, f64::min);
        let denom = a.max(b);
        if denom > 0.0 {
            total += (b - a) / denom;
        }
    }
    Ok(total / n as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MedoidRef {
    pub run: usize,
    pub module: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateSummary {
    pub num_modules: usize,
    pub cosine_similarity_mean: f64,
    pub cosine_similarity_std: f64,
    pub overestimation_ratio_mean: f64,
    pub overestimation_ratio_std: f64,
    pub final_loss_mean: f64,
    pub final_loss_std: f64,
    /// `None` when fewer than two nonzero modules were pooled.
    pub silhouette: Option<f64>,
    pub pooled_modules: usize,
    pub medoids: Vec<MedoidRef>,
    pub best_run: usize,
    pub run_final_loss: Vec<f64>,
    pub run_cosine_similarity: Vec<f64>,
    pub run_overestimation_ratio: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionReport {
    pub schema_version: u32,
    pub num_runs: usize,
    pub candidates: Vec<CandidateSummary>,
    pub chosen_module_count: usize,
    pub chosen_run: usize,
}

impl SelectionReport {
    pub fn candidate(&self, num_modules: usize) -> Option<&CandidateSummary> {
        self.candidates.iter().find(|c| c.num_modules == num_modules)
    }
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn summarize(num_modules: usize, runs: &[AmfRunResult], sel: &SelectionConfig) -> Result<CandidateSummary> {
    let losses: Vec<f64> = runs.iter().map(|r| r.final_loss).collect();
    let cos: Vec<f64> = runs.iter().map(|r| r.cosine_similarity_mean).collect();
    let over: Vec<f64> = runs.iter().map(|r| r.overestimation_ratio).collect();

    let mut pooled_rows = Vec::new();
    let mut origin = Vec::new();
    for (r, run) in runs.iter().enumerate() {
        for m in 0..run.model.num_modules() {
            let row = run.model.modules.row(m);
            if norm(row) > 0.0 {
                pooled_rows.push(row.to_vec());
                origin.push(MedoidRef { run: r, module: m });
            }
        }
    }
    let k = num_modules.min(pooled_rows.len());
    let (silhouette, medoids) = if k >= 2 {
        let pooled = Matrix::from_rows(&pooled_rows)?;
        let seed = derive_seed(sel.seed, "medoids", num_modules as u64);
        let clustering = k_medoids_cosine(&pooled, k, sel.medoid_restarts, seed)?;
        let s = silhouette_cosine(&pooled, &clustering.assignments)?;
        let meds = clustering.medoids.iter().map(|&i| origin[i].clone()).collect();
        (Some(s), meds)
    } else {
        (None, Vec::new())
    };
    let best_run = losses
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |b, (i, &l)| if l < b.1 { (i, l) } else { b })
        .0;
    let (cm, cs) = mean_std(&cos);
    let (om, os) = mean_std(&over);
    let (lm, ls) = mean_std(&losses);
    Ok(CandidateSummary {
        num_modules,
        cosine_similarity_mean: cm,
        cosine_similarity_std: cs,
        overestimation_ratio_mean: om,
        overestimation_ratio_std: os,
        final_loss_mean: lm,
        final_loss_std: ls,
        silhouette,
        pooled_modules: pooled_rows.len(),
        medoids,
        best_run,
        run_final_loss: losses,
        run_cosine_similarity: cos,
        run_overestimation_ratio: over,
    })
}

/// Default choice: the smallest module count whose mean cosine similarity
/// is within 5% of the best candidate's; equal counts resolved by the
/// higher silhouette.
pub fn choose_module_count(candidates: &[CandidateSummary]) -> usize {
    let best = candidates
        .iter()
        .map(|c| c.cosine_similarity_mean)
        .fold(f64::NEG_INFINITY, f64::max);
    let cutoff = best - 0.05 * best.abs();
    candidates
        .iter()
        .filter(|c| c.cosine_similarity_mean >= cutoff)
        .min_by(|a, b| {
            a.num_modules.cmp(&b.num_modules).then(
                b.silhouette
                    .unwrap_or(f64::NEG_INFINITY)
                    .total_cmp(&a.silhouette.unwrap_or(f64::NEG_INFINITY)),
            )
        })
        .map(|c| c.num_modules)
        .expect("at least one candidate")
}

/// Runs `num_runs` fits per candidate module count and summarizes their
/// stability. Returns the report and, per candidate, its lowest-loss run.
pub fn select_modules(
    c: &CorrelationDataset,
    selection: &SelectionConfig,
    amf: &AmfConfig,
) -> Result<(SelectionReport, Vec<AmfRunResult>)> {
    selection.validate()?;
    let jobs: Vec<(usize, usize)> = selection
        .candidate_module_counts
        .iter()
        .flat_map(|&m| (0..selection.num_runs).map(move |r| (m, r)))
        .collect();
    let results: Vec<AmfRunResult> = jobs
        .par_iter()
        .map(|&(m, r)| {
            let cfg = AmfConfig {
                num_modules: m,
                seed: selection.run_seed(m, r),
                ..amf.clone()
            };
            fit(c, &cfg)
        })
        .collect::<Result<_>>()?;

    let mut summaries = Vec::new();
    let mut best_runs = Vec::new();
    for (ci, &m) in selection.candidate_module_counts.iter().enumerate() {
        let runs = &results[ci * selection.num_runs..(ci + 1) * selection.num_runs];
        let summary = summarize(m, runs, selection)?;
        best_runs.push(runs[summary.best_run].clone());
        summaries.push(summary);
    }
    let chosen = match selection.chosen_module_count {
        Some(m) if selection.candidate_module_counts.contains(&m) => m,
        Some(m) => {
            return Err(LavaError::param(format!(
                "chosen module count {m} is not among the candidates"
            )))
        }
        None => choose_module_count(&summaries),
    };
    let chosen_run = summaries.iter().find(|s| s.num_modules == chosen).unwrap().best_run;
    Ok((
        SelectionReport {
            schema_version: 1,
            num_runs: selection.num_runs,
            candidates: summaries,
            chosen_module_count: chosen,
            chosen_run,
        },
        best_runs,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_vector_its_own_medoid() {
        let v = Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]).unwrap();
        let c = k_medoids_cosine(&v, 3, 1, 0).unwrap();
        assert_eq!(c.cost, 0.0);
        let mut m = c.medoids.clone();
        m.sort_unstable();
        assert_eq!(m, vec![0, 1, 2]);
        assert!(k_medoids_cosine(&v, 4, 1, 0).is_err());
    }

    #[test]
    fn orthogonal_bundles_separate() {
        let v = Matrix::from_rows(&[
            [1.0, 0.05, 0.0],
            [1.0, 0.0, 0.04],
            [0.9, 0.02, 0.0],
            [0.0, 0.03, 1.0],
            [0.05, 0.0, 0.95],
            [0.0, 0.01, 1.1],
        ])
        .unwrap();
        let c = k_medoids_cosine(&v, 2, 3, 1).unwrap();
        let a = &c.assignments;
        assert!(a[0] == a[1] && a[1] == a[2]);
        assert!(a[3] == a[4] && a[4] == a[5]);
        assert_ne!(a[0], a[3]);
        assert!(silhouette_cosine(&v, a).unwrap() > 0.9);
    }

    #[test]
    fn silhouette_needs_two_clusters() {
        let v = Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0]]).unwrap();
        assert!(silhouette_cosine(&v, &[0, 0]).is_err());
        // two singletons score 0
        assert_eq!(silhouette_cosine(&v, &[0, 1]).unwrap(), 0.0);
    }

    #[test]
    fn duplicate_clusters_score_one() {
        let v = Matrix::from_rows(&[[1.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.0, 1.0]]).unwrap();
        assert_eq!(silhouette_cosine(&v, &[0, 0, 1, 1]).unwrap(), 1.0);
    }

    #[test]
    fn default_choice_rule() {
        let mk = |m, cos, sil| CandidateSummary {
            num_modules: m,
            cosine_similarity_mean: cos,
            cosine_similarity_std: 0.0,
            overestimation_ratio_mean: 0.0,
            overestimation_ratio_std: 0.0,
            final_loss_mean: 0.0,
            final_loss_std: 0.0,
            silhouette: Some(sil),
            pooled_modules: 0,
            medoids: vec![],
            best_run: 0,
            run_final_loss: vec![],
            run_cosine_similarity: vec![],
            run_overestimation_ratio: vec![],
        };
        let cands = vec![mk(2, 0.80, 0.9), mk(4, 0.96, 0.7), mk(8, 0.99, 0.3)];
        assert_eq!(choose_module_count(&cands), 4);
    }

    #[test]
    fn config_validation() {
        let mut s = SelectionConfig {
            num_runs: 1,
            ..SelectionConfig::default()
        };
        assert!(s.validate().is_err());
        s.num_runs = 2;
        s.candidate_module_counts.clear();
        assert!(s.validate().is_err());
    }
}
