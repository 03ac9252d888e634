//! Library results checked against slow, independent recomputations.
#![allow(clippy::needless_range_loop)]

mod common;

use common::*;
use lava::amf::{amf_loss, AmfConfig, AmfModel};
use lava::correlation::{locality_correlations, PairIndex};
use lava::io::{EmbeddingMatrix, FeatureMatrix};
use lava::kmeans::{weighted_inertia, weighted_kmeans_with, KMeansOptions};
use lava::matrix::Matrix;
use lava::neighbors::{centrality_profile, knn_self, neighborhood_jaccard};
use lava::placement::{placement_loss, sample_weights, LocalitySet, PlacementParams};
use lava::rng::rng_from_seed;
use lava::CorrelationDataset;
use rand::seq::index::sample;
use rand::Rng;

fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut rng = rng_from_seed(seed);
    Matrix::from_fn(rows, cols, |_, _| rng.random::<f64>())
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

/// Sort every other point by (distance, index) and keep the first n.
fn brute_knn(points: &Matrix, n: usize) -> Vec<Vec<usize>> {
    (0..points.rows())
        .map(|q| {
            let mut others: Vec<(f64, usize)> = (0..points.rows())
                .filter(|&j| j != q)
                .map(|j| (sq_dist(points.row(q), points.row(j)), j))
                .collect();
            others.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            others.into_iter().take(n).map(|(_, j)| j).collect()
        })
        .collect()
}

#[test]
fn knn_matches_brute_force() {
    let pts = random_matrix(200, 2, 1);
    let index = knn_self(&pts, 15).unwrap();
    assert_eq!(index.to_rows(), brute_knn(&pts, 15));
}

#[test]
fn centrality_matches_recount() {
    let pts = random_matrix(300, 3, 2);
    let profile = centrality_profile(&knn_self(&pts, 8).unwrap());
    let rows = brute_knn(&pts, 8);
    for s in 0..300 {
        let count = rows.iter().filter(|r| r.contains(&s)).count();
        assert_eq!(profile.in_neighborhood[s], count);
        let d: f64 = rows[s]
            .iter()
            .map(|&j| sq_dist(pts.row(s), pts.row(j)).sqrt())
            .sum::<f64>()
            / 8.0;
        assert!((profile.avg_n_distance[s] - d).abs() < 1e-12);
    }
    assert_eq!(profile.in_neighborhood.iter().sum::<usize>(), 300 * 8);
}

#[test]
fn jaccard_identical_and_random() {
    let pts = random_matrix(500, 2, 3);
    let feats = FeatureMatrix::new(pts.clone(), None).unwrap();
    let same = neighborhood_jaccard(&feats, &EmbeddingMatrix::new(pts).unwrap(), &[5, 10, 50], 100, 0).unwrap();
    assert!(same.iter().all(|p| p.mean_jaccard == 1.0));

    let noise = EmbeddingMatrix::new(random_matrix(500, 2, 4)).unwrap();
    let rand_feats = FeatureMatrix::new(random_matrix(500, 5, 5), None).unwrap();
    let r = neighborhood_jaccard(&rand_feats, &noise, &[10], 500, 0).unwrap();
    // unrelated neighborhoods overlap on about k / (E - 1) of their members
    let expected = 10.0 / 499.0;
    assert!(r[0].mean_jaccard < 0.1, "{}", r[0].mean_jaccard);
    assert!(r[0].mean_jaccard < 5.0 * expected);
}

#[test]
fn weights_match_elementwise_formula() {
    let pts = random_matrix(150, 2, 6);
    let profile = centrality_profile(&knn_self(&pts, 5).unwrap());
    let w = sample_weights(&profile, PlacementParams { alpha: 2.0, beta: -1.0 });
    for s in 0..150 {
        let c = profile.in_neighborhood[s] as f64 / 150.0;
        // beta = -1 turns (1/d)^beta into d
        let expected = c * c * profile.avg_n_distance[s];
        assert!((w[s] - expected).abs() <= 1e-12 * expected.max(1.0), "sample {s}");
    }
    let w0 = sample_weights(&profile, PlacementParams { alpha: 0.0, beta: 0.0 });
    assert!(w0.iter().all(|&v| v == 1.0));
}

/// Plain weighted Lloyd iterations from `ell` distinct random points.
fn random_restart_inertia(points: &Matrix, weights: &[f64], ell: usize, restarts: u64) -> f64 {
    let mut best = f64::INFINITY;
    for r in 0..restarts {
        let mut rng = rng_from_seed(1000 + r);
        let init = sample(&mut rng, points.rows(), ell).into_vec();
        let mut centers: Vec<Vec<f64>> = init.iter().map(|&i| points.row(i).to_vec()).collect();
        for _ in 0..300 {
            let mut sums = vec![vec![0.0; points.cols()]; ell];
            let mut mass = vec![0.0; ell];
            for i in 0..points.rows() {
                let c = (0..ell)
                    .min_by(|&a, &b| {
                        sq_dist(points.row(i), &centers[a]).total_cmp(&sq_dist(points.row(i), &centers[b]))
                    })
                    .unwrap();
                mass[c] += weights[i];
                for (s, x) in sums[c].iter_mut().zip(points.row(i)) {
                    *s += weights[i] * x;
                }
            }
            let next: Vec<Vec<f64>> = (0..ell)
                .map(|c| {
                    if mass[c] > 0.0 {
                        sums[c].iter().map(|s| s / mass[c]).collect()
                    } else {
                        centers[c].clone()
                    }
                })
                .collect();
            if next == centers {
                break;
            }
            centers = next;
        }
        let inertia: f64 = (0..points.rows())
            .map(|i| {
                weights[i]
                    * centers
                        .iter()
                        .map(|c| sq_dist(points.row(i), c))
                        .fold(f64::INFINITY, f64::min)
            })
            .sum();
        best = best.min(inertia);
    }
    best
}

#[test]
fn kmeans_competes_with_random_restarts() {
    let pts = random_matrix(500, 2, 7);
    let mut rng = rng_from_seed(8);
    let weights: Vec<f64> = (0..500).map(|_| rng.random_range(0.1..2.0)).collect();
    let res = weighted_kmeans_with(&pts, &weights, 10, 9, &KMeansOptions::default()).unwrap();
    let oracle = random_restart_inertia(&pts, &weights, 10, 20);
    assert!(
        res.inertia <= 1.05 * oracle,
        "library {} vs best of 20 restarts {}",
        res.inertia,
        oracle
    );
    assert!((weighted_inertia(&pts, &weights, &res.centroids) - res.inertia).abs() < 1e-9 * res.inertia);
}

#[test]
fn placement_loss_for_one_dense_locality() {
    let pts = random_matrix(120, 2, 10);
    let n = 12;
    let profile = centrality_profile(&knn_self(&pts, n).unwrap());
    let mut order: Vec<usize> = (0..120).collect();
    order.sort_by(|&a, &b| {
        profile.in_neighborhood[b]
            .cmp(&profile.in_neighborhood[a])
            .then(a.cmp(&b))
    });
    let covered: Vec<usize> = order[..n].to_vec();
    let loc = LocalitySet {
        probes: Matrix::zeros(1, 2),
        members: vec![covered.clone()],
    };
    let e = 120.0;
    let expected: f64 = (0..120)
        .map(|s| {
            let r = profile.in_neighborhood[s] as f64 / e;
            if covered.contains(&s) {
                (r - 1.0).abs()
            } else {
                r
            }
        })
        .sum();
    assert!((placement_loss(&profile, &loc) - expected).abs() < 1e-12);
}

#[test]
fn correlations_match_naive_per_pair() {
    let mut rng = rng_from_seed(11);
    // small integer values so ties occur and some columns trip the filter
    let mut x = Matrix::from_fn(40, 5, |_, _| rng.random_range(0..6) as f64);
    for s in 0..40 {
        if s % 10 != 0 {
            x.set(s, 4, 2.0);
        }
    }
    let members: Vec<Vec<usize>> = (0..3).map(|_| sample(&mut rng, 40, 12).into_vec()).collect();
    let loc = LocalitySet {
        probes: Matrix::zeros(3, 2),
        members: members.clone(),
    };
    let c = locality_correlations(&FeatureMatrix::new(x.clone(), None).unwrap(), &loc, 0.75).unwrap();
    let constant_share =
        |v: &[f64]| v.iter().map(|a| v.iter().filter(|&b| b == a).count()).max().unwrap() as f64 / v.len() as f64;
    for (l, m) in members.iter().enumerate() {
        let col = |f: usize| m.iter().map(|&s| x.get(s, f)).collect::<Vec<f64>>();
        let mut p = 0;
        for i in 0..5 {
            for j in i + 1..5 {
                let (a, b) = (col(i), col(j));
                let expected = if constant_share(&a) > 0.75 || constant_share(&b) > 0.75 {
                    0.0
                } else {
                    spearman_abs_oracle(&a, &b)
                };
                assert!((c.get(l, p) - expected).abs() < 1e-6, "locality {l} pair ({i},{j})");
                p += 1;
            }
        }
    }
}

/// Loss written out term by term from the data, the model and the weights.
fn loss_oracle(c: &Matrix, model: &AmfModel, nu: f64, gamma: f64) -> f64 {
    let chat = reconstruct_oracle(model);
    let norm = |r: &[f64]| r.iter().map(|v| v * v).sum::<f64>().sqrt();
    let norms: Vec<f64> = c.iter_rows().map(norm).collect();
    let total: f64 = norms.iter().sum();
    let mut loss = 0.0;
    for i in 0..c.rows() {
        let a = norms[i] / (total - norms[i]);
        let w: Vec<f64> = c
            .row(i)
            .iter()
            .zip(chat.row(i))
            .map(|(x, h)| if h > x { nu } else { 1.0 })
            .collect();
        let u: Vec<f64> = c.row(i).iter().zip(&w).map(|(x, w)| x * w).collect();
        let v: Vec<f64> = chat.row(i).iter().zip(&w).map(|(h, w)| h * w).collect();
        let cos = u.iter().zip(&v).map(|(p, q)| p * q).sum::<f64>() / (norm(&u) * norm(&v));
        let mae = c
            .row(i)
            .iter()
            .zip(chat.row(i))
            .map(|(x, h)| (x - h).abs())
            .sum::<f64>()
            / c.cols() as f64;
        loss += a * (1.0 - cos) + gamma * mae;
    }
    loss
}

#[test]
fn loss_matches_term_by_term_oracle() {
    let data = random_matrix(6, 10, 12).to_f32_precision();
    let c = CorrelationDataset::from_matrix(&data, 5, 0.75).unwrap();
    let model = AmfModel::new(random_matrix(3, 10, 13), random_matrix(6, 3, 14)).unwrap();
    for (nu, gamma) in [(1.0, 0.0), (9.0, 1e-4), (3.0, 10.0)] {
        let cfg = AmfConfig {
            num_modules: 3,
            nu,
            gamma,
            ..AmfConfig::default()
        };
        let got = amf_loss(&c, &model, &cfg).unwrap();
        let want = loss_oracle(&data, &model, nu, gamma);
        assert!(
            (got - want).abs() < 1e-10 * want.max(1.0),
            "nu {nu} gamma {gamma}: {got} vs {want}"
        );
    }
}

#[test]
fn pair_count_matches_combinations() {
    for d in [2usize, 3, 10, 33] {
        assert_eq!(PairIndex::new(d).len(), d * (d - 1) / 2);
    }
}
