//! Exact Euclidean k-nearest-neighbor search and in-degree centrality.
//!
//! Search is brute force: every query scans every point. Distance ties are
//! broken by the lower point index, so results are identical across
//! platforms and thread counts.

use rand::seq::index::sample;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{LavaError, Result};
use crate::io::{EmbeddingMatrix, FeatureMatrix};
use crate::matrix::{squared_euclidean, Matrix};
use crate::rng::rng_from_seed;

/// Row `q` holds the `n` nearest points to query `q`, nearest first.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborIndex {
    n: usize,
    neighbors: Vec<usize>,
    distances: Vec<f64>,
}

impl NeighborIndex {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_queries(&self) -> usize {
        self.neighbors.len().checked_div(self.n).unwrap_or(0)
    }

    pub fn neighbors(&self, q: usize) -> &[usize] {
        &self.neighbors[q * self.n..(q + 1) * self.n]
    }

    pub fn distances(&self, q: usize) -> &[f64] {
        &self.distances[q * self.n..(q + 1) * self.n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[usize]> {
        self.neighbors.chunks_exact(self.n)
    }

    pub fn to_rows(&self) -> Vec<Vec<usize>> {
        self.rows().map(<[usize]>::to_vec).collect()
    }
}

/// How often each sample appears in the sample-based n-neighborhoods, and
/// its mean distance to its own n nearest neighbors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CentralityProfile {
    pub in_neighborhood: Vec<usize>,
    pub avg_n_distance: Vec<f64>,
}

impl CentralityProfile {
    pub fn num_samples(&self) -> usize {
        self.in_neighborhood.len()
    }
}

fn nearest_for(points: &Matrix, query: &[f64], skip: Option<usize>, n: usize) -> Vec<(f64, usize)> {
    let mut cand: Vec<(f64, usize)> = (0..points.rows())
        .filter(|&j| Some(j) != skip)
        .map(|j| (squared_euclidean(query, points.row(j)), j))
        .collect();
    let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if n < cand.len() {
        cand.select_nth_unstable_by(n, cmp);
        cand.truncate(n);
    }
    cand.sort_unstable_by(cmp);
    cand
}

fn collect(n: usize, rows: Vec<Vec<(f64, usize)>>) -> NeighborIndex {
    let mut neighbors = Vec::with_capacity(rows.len() * n);
    let mut distances = Vec::with_capacity(rows.len() * n);
    for row in rows {
        for (d2, j) in row {
            neighbors.push(j);
            distances.push(d2.sqrt());
        }
    }
    NeighborIndex {
        n,
        neighbors,
        distances,
    }
}

fn check_n(n: usize, num_points: usize) -> Result<()> {
    if n == 0 {
        return Err(LavaError::param("n must be at least 1"));
    }
    if n >= num_points {
        return Err(LavaError::param(format!(
            "n must be smaller than the number of points (n = {n}, points = {num_points})"
        )));
    }
    Ok(())
}

/// n nearest `points` for each row of `queries` (queries are not points).
pub fn knn(points: &Matrix, queries: &Matrix, n: usize) -> Result<NeighborIndex> {
    check_n(n, points.rows())?;
    if points.cols() != queries.cols() {
        return Err(LavaError::param(format!(
            "points have dimension {} but queries have {}",
            points.cols(),
            queries.cols()
        )));
    }
    let rows = (0..queries.rows())
        .into_par_iter()
        .map(|q| nearest_for(points, queries.row(q), None, n))
        .collect();
    Ok(collect(n, rows))
}

/// n nearest other points for each listed point, excluding the point itself.
pub fn knn_of_points(points: &Matrix, query_idx: &[usize], n: usize) -> Result<NeighborIndex> {
    check_n(n, points.rows())?;
    if let Some(&bad) = query_idx.iter().find(|&&q| q >= points.rows()) {
        return Err(LavaError::param(format!("query index {bad} out of range")));
    }
    let rows = query_idx
        .par_iter()
        .map(|&q| nearest_for(points, points.row(q), Some(q), n))
        .collect();
    Ok(collect(n, rows))
}

/// n nearest other points for every point.
pub fn knn_self(points: &Matrix, n: usize) -> Result<NeighborIndex> {
    let all: Vec<usize> = (0..points.rows()).collect();
    knn_of_points(points, &all, n)
}

/// Centrality statistics from a self-neighborhood index.
pub fn centrality_profile(index: &NeighborIndex) -> CentralityProfile {
    let e = index.num_queries();
    let mut in_neighborhood = vec![0usize; e];
    for row in index.rows() {
        for &j in row {
            in_neighborhood[j] += 1;
        }
    }
    let avg_n_distance = (0..e)
        .map(|q| index.distances(q).iter().sum::<f64>() / index.n() as f64)
        .collect();
    CentralityProfile {
        in_neighborhood,
        avg_n_distance,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JaccardPoint {
    pub size: usize,
    pub mean_jaccard: f64,
}

/// Mean Jaccard similarity between k-neighborhoods in the original feature
/// space and in the latent space, for each requested k, over up to
/// `sample_cap` randomly drawn samples.
pub fn neighborhood_jaccard(
    original: &FeatureMatrix,
    latent: &EmbeddingMatrix,
    sizes: &[usize],
    sample_cap: usize,
    seed: u64,
) -> Result<Vec<JaccardPoint>> {
    original.check_paired(latent)?;
    let e = latent.num_samples();
    let Some(&max_k) = sizes.iter().max() else {
        return Ok(Vec::new());
    };
    if let Some(&bad) = sizes.iter().find(|&&k| k == 0 || k >= e) {
        return Err(LavaError::param(format!("neighborhood size {bad} must be in [1, {e})")));
    }
    let queries: Vec<usize> = if sample_cap >= e {
        (0..e).collect()
    } else {
        let mut rng = rng_from_seed(seed);
        let mut q = sample(&mut rng, e, sample_cap.max(1)).into_vec();
        q.sort_unstable();
        q
    };
    let orig = knn_of_points(original.matrix(), &queries, max_k)?;
    let lat = knn_of_points(latent.matrix(), &queries, max_k)?;

    let mut marks = vec![0u8; e];
    Ok(sizes
        .iter()
        .map(|&k| {
            let mut total = 0.0;
            for q in 0..queries.len() {
                let a = &orig.neighbors(q)[..k];
                let b = &lat.neighbors(q)[..k];
                for &j in a {
                    marks[j] = 1;
                }
                let inter = b.iter().filter(|&&j| marks[j] == 1).count();
                for &j in a {
                    marks[j] = 0;
                }
                total += inter as f64 / (2 * k - inter) as f64;
            }
            JaccardPoint {
                size: k,
                mean_jaccard: total / queries.len() as f64,
            }
        })
        .collect())
}
