//! Weighted Lloyd's algorithm with weighted k-means++ seeding.

use rand::Rng as _;
use rayon::prelude::*;

use crate::error::{LavaError, Result};
use crate::matrix::{squared_euclidean, Matrix};
use crate::rng::{derive_seed, rng_from_seed, Rng};

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansOptions {
    pub max_iters: usize,
    /// Independent k-means++ seedings; the lowest weighted inertia wins.
    pub restarts: usize,
}

impl Default for KMeansOptions {
    fn default() -> Self {
        KMeansOptions {
            max_iters: 300,
            restarts: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub centroids: Matrix,
    pub inertia: f64,
    pub iterations: usize,
}

fn nearest(centroids: &Matrix, x: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for c in 0..centroids.rows() {
        let d = squared_euclidean(x, centroids.row(c));
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// Weighted sum of squared distances from each point to its nearest centroid.
pub fn weighted_inertia(points: &Matrix, weights: &[f64], centroids: &Matrix) -> f64 {
    (0..points.rows())
        .map(|i| weights[i] * nearest(centroids, points.row(i)).1)
        .sum()
}

fn draw(rng: &mut Rng, mass: &[f64]) -> Option<usize> {
    let total: f64 = mass.iter().sum();
    if !(total > 0.0) {
        return None;
    }
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last = None;
    for (i, &m) in mass.iter().enumerate() {
        if m > 0.0 {
            acc += m;
            last = Some(i);
            if acc > target {
                return Some(i);
            }
        }
    }
    last
}

fn plus_plus(points: &Matrix, weights: &[f64], k: usize, rng: &mut Rng) -> Matrix {
    let n = points.rows();
    let mut centroids = Matrix::zeros(k, points.cols());
    let mut chosen = vec![false; n];
    let first = draw(rng, weights).expect("positive weight exists");
    chosen[first] = true;
    centroids.row_mut(0).copy_from_slice(points.row(first));
    let mut d2: Vec<f64> = (0..n)
        .map(|i| squared_euclidean(points.row(i), points.row(first)))
        .collect();
    for c in 1..k {
        let mass: Vec<f64> = (0..n).map(|i| weights[i] * d2[i]).collect();
        // every weighted point already sits on a center: take the next unused one
        let pick = draw(rng, &mass).unwrap_or_else(|| {
            (0..n)
                .find(|&i| weights[i] > 0.0 && !chosen[i])
                .expect("k <= positive-weight points")
        });
        chosen[pick] = true;
        centroids.row_mut(c).copy_from_slice(points.row(pick));
        for (i, best) in d2.iter_mut().enumerate() {
            let d = squared_euclidean(points.row(i), points.row(pick));
            if d < *best {
                *best = d;
            }
        }
    }
    centroids
}

fn lloyd(points: &Matrix, weights: &[f64], mut centroids: Matrix, max_iters: usize) -> KMeansResult {
    let n = points.rows();
    let k = centroids.rows();
    let dim = points.cols();
    let mut assign = vec![usize::MAX; n];
    let mut iterations = 0;
    for _ in 0..max_iters {
        iterations += 1;
        let next: Vec<(usize, f64)> = (0..n)
            .into_par_iter()
            .map(|i| nearest(&centroids, points.row(i)))
            .collect();
        let changed = next.iter().zip(&assign).any(|(a, &b)| a.0 != b);
        for (slot, (c, _)) in assign.iter_mut().zip(&next) {
            *slot = *c;
        }
        if !changed {
            break;
        }

        let mut sums = Matrix::zeros(k, dim);
        let mut mass = vec![0.0; k];
        for i in 0..n {
            let w = weights[i];
            if w > 0.0 {
                let c = assign[i];
                mass[c] += w;
                for (s, &x) in sums.row_mut(c).iter_mut().zip(points.row(i)) {
                    *s += w * x;
                }
            }
        }
        // empty clusters are re-seeded at the weighted-farthest point
        let mut far: Vec<f64> = (0..n).map(|i| weights[i] * next[i].1).collect();
        for (c, &m) in mass.iter().enumerate() {
            if m > 0.0 {
                for (dst, s) in centroids.row_mut(c).iter_mut().zip(sums.row(c)) {
                    *dst = s / m;
                }
            } else {
                let (p, _) = far
                    .iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |b, (i, &v)| if v > b.1 { (i, v) } else { b });
                far[p] = f64::NEG_INFINITY;
                centroids.row_mut(c).copy_from_slice(points.row(p));
            }
        }
    }
    let inertia = weighted_inertia(points, weights, &centroids);
    KMeansResult {
        centroids,
        inertia,
        iterations,
    }
}

/// Weighted k-means with default options; returns only the centroids.
pub fn weighted_kmeans(points: &Matrix, weights: &[f64], ell: usize, seed: u64) -> Result<Matrix> {
    weighted_kmeans_with(points, weights, ell, seed, &KMeansOptions::default()).map(|r| r.centroids)
}

pub fn weighted_kmeans_with(
    points: &Matrix,
    weights: &[f64],
    ell: usize,
    seed: u64,
    opts: &KMeansOptions,
) -> Result<KMeansResult> {
    if weights.len() != points.rows() {
        return Err(LavaError::param(format!(
            "{} weights for {} points",
            weights.len(),
            points.rows()
        )));
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(LavaError::param("weights must be finite and non-negative"));
    }
    let positive = weights.iter().filter(|&&w| w > 0.0).count();
    if ell == 0 || ell > positive {
        return Err(LavaError::param(format!(
            "cluster count {ell} must be in [1, {positive}] (points with positive weight)"
        )));
    }
    let max_w = weights.iter().cloned().fold(0.0, f64::max);
    let scaled: Vec<f64> = weights.iter().map(|w| w / max_w).collect();

    let mut best: Option<KMeansResult> = None;
    for r in 0..opts.restarts.max(1) {
        let mut rng = rng_from_seed(derive_seed(seed, "kmeans-restart", r as u64));
        let init = plus_plus(points, &scaled, ell, &mut rng);
        let res = lloyd(points, &scaled, init, opts.max_iters.max(1));
        if best.as_ref().is_none_or(|b| res.inertia < b.inertia) {
            best = Some(res);
        }
    }
    let mut best = best.unwrap();
    best.inertia *= max_w;
    Ok(best)
}
