//! Independent reference implementations used as test oracles. They are
//! written for clarity, not speed, and share no code with the library.
#![allow(dead_code)]

use lava::amf::AmfModel;
use lava::matrix::Matrix;

/// Ranks by counting: rank = #smaller + (#equal + 1) / 2.
pub fn count_ranks(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|&v| {
            let less = x.iter().filter(|&&w| w < v).count() as f64;
            let equal = x.iter().filter(|&&w| w == v).count() as f64;
            less + (equal + 1.0) / 2.0
        })
        .collect()
}

/// Textbook Pearson correlation; 0 for constant inputs.
pub fn pearson_oracle(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let cov: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        0.0
    } else {
        cov / (vx * vy).sqrt()
    }
}

pub fn spearman_abs_oracle(x: &[f64], y: &[f64]) -> f64 {
    pearson_oracle(&count_ranks(x), &count_ranks(y)).abs()
}

/// Triple loop: every entry is the max over modules of presence x module.
pub fn reconstruct_oracle(model: &AmfModel) -> Matrix {
    let (l, m, k) = (model.presences.rows(), model.modules.rows(), model.modules.cols());
    let mut out = Matrix::zeros(l, k);
    for i in 0..l {
        for c in 0..k {
            let mut best = f64::NEG_INFINITY;
            for j in 0..m {
                let v = model.presences.get(i, j) * model.modules.get(j, c);
                if v > best {
                    best = v;
                }
            }
            out.set(i, c, best);
        }
    }
    out
}

/// Student-t CDF for integer degrees of freedom via the closed finite
/// series in theta = atan(t / sqrt(df)).
pub fn t_cdf_series(t: f64, df: u32) -> f64 {
    let theta = (t / (df as f64).sqrt()).atan();
    let (s, c) = (theta.sin(), theta.cos());
    let a = if df % 2 == 1 {
        let mut sum = 0.0;
        if df > 1 {
            let mut term = c;
            sum = term;
            let mut k = 1;
            while 2 * k + 1 < df {
                term *= (2 * k) as f64 / (2 * k + 1) as f64 * c * c;
                sum += term;
                k += 1;
            }
        }
        2.0 / std::f64::consts::PI * (theta + s * sum)
    } else {
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k = 1;
        while 2 * k < df {
            term *= (2 * k - 1) as f64 / (2 * k) as f64 * c * c;
            sum += term;
            k += 1;
        }
        s * sum
    };
    // `a` is signed with t, so this is P(T <= t)
    0.5 + 0.5 * a
}

/// Greedy one-to-one matching by descending cosine; returns the matched
/// cosine for each planted row.
pub fn greedy_match(planted: &Matrix, found: &Matrix) -> Vec<f64> {
    let cos = |a: &[f64], b: &[f64]| {
        let d: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        if na == 0.0 || nb == 0.0 {
            0.0
        } else {
            d / (na * nb)
        }
    };
    let mut cand = Vec::new();
    for a in 0..planted.rows() {
        for b in 0..found.rows() {
            cand.push((cos(planted.row(a), found.row(b)), a, b));
        }
    }
    cand.sort_by(|x, y| y.0.total_cmp(&x.0));
    let mut out = vec![0.0; planted.rows()];
    let (mut used_a, mut used_b) = (vec![false; planted.rows()], vec![false; found.rows()]);
    for (v, a, b) in cand {
        if !used_a[a] && !used_b[b] {
            used_a[a] = true;
            used_b[b] = true;
            out[a] = v;
        }
    }
    out
}

/// Minimizer of mean pinball loss over a grid of step 1e-4 on [0, 1].
pub fn pinball_grid_minimizer(values: &[f64], tau: f64) -> f64 {
    let loss = |p: f64| -> f64 {
        values
            .iter()
            .map(|&c| {
                let u = c - p;
                if u >= 0.0 {
                    tau * u
                } else {
                    (tau - 1.0) * u
                }
            })
            .sum()
    };
    (0..=10_000)
        .map(|i| i as f64 / 10_000.0)
        .min_by(|&a, &b| loss(a).total_cmp(&loss(b)))
        .unwrap()
}

/// Locality count computed as floor(x + 0.5) for the positive ratio x.
pub fn locality_count_oracle(e: usize, o: f64, n: usize) -> usize {
    (e as f64 * o / n as f64 + 0.5).floor() as usize
}

/// Recursively lists files under `dir` with their bytes, sorted by path.
pub fn snapshot_dir(dir: &std::path::Path) -> Vec<(std::path::PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

pub const GOLDEN_DIR: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/golden");

/// The three heatmap cases frozen as golden files: an all-zero vector, a
/// single pair at 1.0, and a single pair at 0.4 (0.064 after cubing, below
/// the 0.1 line threshold). All on a 3x3 grid.
pub fn heatmap_golden_cases() -> Vec<(&'static str, Vec<f64>)> {
    let pairs = lava::correlation::PairIndex::new(9);
    let mut single = vec![0.0; pairs.len()];
    single[pairs.pair_id(0, 8)] = 1.0;
    let mut weak = vec![0.0; pairs.len()];
    weak[pairs.pair_id(2, 6)] = 0.4;
    vec![
        ("heatmap_zero.svg", vec![0.0; pairs.len()]),
        ("heatmap_single_pair.svg", single),
        ("heatmap_below_threshold.svg", weak),
    ]
}

/// Whether to rewrite golden files instead of comparing against them.
pub fn bless() -> bool {
    std::env::var_os("LAVA_BLESS").is_some()
}
