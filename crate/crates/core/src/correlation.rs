//! Locality representations: absolute Spearman correlation of every feature
//! pair over the locality's member samples.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LavaError, Result};
use crate::io::{self, FeatureMatrix};
use crate::matrix::Matrix;
use crate::placement::LocalitySet;

pub const VALUES_FILE: &str = "correlations.bin";
pub const SIDECAR_FILE: &str = "correlations.json";

/// Lexicographic numbering of unordered feature pairs `(i, j)`, `i < j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairIndex {
    num_features: usize,
}

impl PairIndex {
    pub fn new(num_features: usize) -> Self {
        PairIndex { num_features }
    }

    pub fn num_features(&self) -> usize {
        self.num_features
    }

    pub fn len(&self) -> usize {
        self.num_features * self.num_features.saturating_sub(1) / 2
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn offset(&self, i: usize) -> usize {
        i * self.num_features - i * (i + 1) / 2
    }

    /// Pair id of `(i, j)`; the order of the arguments does not matter.
    pub fn pair_id(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        assert!(i != j && j < self.num_features, "invalid pair ({i}, {j})");
        self.offset(i) + (j - i - 1)
    }

    pub fn pair(&self, p: usize) -> (usize, usize) {
        assert!(p < self.len(), "pair id {p} out of range");
        // largest i with offset(i) <= p
        let (mut lo, mut hi) = (0, self.num_features - 1);
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.offset(mid) <= p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let i = if self.offset(hi) <= p { hi } else { lo };
        (i, p - self.offset(i) + i + 1)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let d = self.num_features;
        (0..d).flat_map(move |i| (i + 1..d).map(move |j| (i, j)))
    }
}

/// Locality-by-pair matrix of absolute correlations, stored as `f32`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationDataset {
    num_localities: usize,
    pair_index: PairIndex,
    values: Vec<f32>,
    pub filter_threshold: f64,
    pub feature_names: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Sidecar {
    schema_version: u32,
    num_localities: usize,
    num_features: usize,
    num_pairs: usize,
    pair_order: String,
    filter_threshold: f64,
    feature_names: Vec<String>,
}

const PAIR_ORDER: &str = "lexicographic (i, j) with i < j";

impl CorrelationDataset {
    pub fn from_matrix(values: &Matrix, num_features: usize, filter_threshold: f64) -> Result<Self> {
        let pair_index = PairIndex::new(num_features);
        if values.cols() != pair_index.len() {
            return Err(LavaError::param(format!(
                "{} columns, but {num_features} features have {} pairs",
                values.cols(),
                pair_index.len()
            )));
        }
        if values.as_slice().iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(LavaError::data("correlation values must lie in [0, 1]"));
        }
        Ok(CorrelationDataset {
            num_localities: values.rows(),
            pair_index,
            values: values.as_slice().iter().map(|&v| v as f32).collect(),
            filter_threshold,
            feature_names: (0..num_features).map(|j| format!("f{j}")).collect(),
        })
    }

    pub fn num_localities(&self) -> usize {
        self.num_localities
    }

    pub fn num_pairs(&self) -> usize {
        self.pair_index.len()
    }

    pub fn pair_index(&self) -> PairIndex {
        self.pair_index
    }

    pub fn row(&self, i: usize) -> &[f32] {
        let k = self.num_pairs();
        &self.values[i * k..(i + 1) * k]
    }

    pub fn get(&self, i: usize, p: usize) -> f64 {
        f64::from(self.values[i * self.num_pairs() + p])
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn to_matrix(&self) -> Matrix {
        Matrix::new(
            self.num_localities,
            self.num_pairs(),
            self.values.iter().map(|&v| f64::from(v)).collect(),
        )
        .expect("consistent shape")
    }

    pub fn size_bytes(&self) -> usize {
        self.values.len() * std::mem::size_of::<f32>()
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        io::ensure_dir(dir)?;
        io::save_binary_f32(
            self.num_localities,
            self.num_pairs(),
            &self.values,
            &dir.join(VALUES_FILE),
        )?;
        io::write_json(
            &Sidecar {
                schema_version: 1,
                num_localities: self.num_localities,
                num_features: self.pair_index.num_features(),
                num_pairs: self.num_pairs(),
                pair_order: PAIR_ORDER.into(),
                filter_threshold: self.filter_threshold,
                feature_names: self.feature_names.clone(),
            },
            dir.join(SIDECAR_FILE),
        )
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let sidecar: Sidecar = io::read_json(dir.join(SIDECAR_FILE))?;
        let (rows, cols, values) = io::load_binary_f32(&dir.join(VALUES_FILE))?;
        let pair_index = PairIndex::new(sidecar.num_features);
        if rows != sidecar.num_localities || cols != pair_index.len() {
            return Err(LavaError::format(
                dir.join(VALUES_FILE),
                format!(
                    "matrix is {rows}x{cols}, sidecar describes {}x{}",
                    sidecar.num_localities,
                    pair_index.len()
                ),
            ));
        }
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(LavaError::data("correlation values must lie in [0, 1]"));
        }
        Ok(CorrelationDataset {
            num_localities: rows,
            pair_index,
            values,
            filter_threshold: sidecar.filter_threshold,
            feature_names: sidecar.feature_names,
        })
    }
}

/// 1-based ranks with ties replaced by their average rank.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && x[order[end]] == x[order[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1..=end
        let avg = (start + end + 1) as f64 / 2.0;
        for &k in &order[start..end] {
            ranks[k] = avg;
        }
        start = end;
    }
    ranks
}

/// Centered ranks scaled to unit norm, or `None` when every value ties.
fn unit_centered_ranks(x: &[f64]) -> Option<Vec<f64>> {
    let mut r = average_ranks(x);
    let mean = r.iter().sum::<f64>() / r.len() as f64;
    for v in r.iter_mut() {
        *v -= mean;
    }
    let norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return None;
    }
    for v in r.iter_mut() {
        *v /= norm;
    }
    Some(r)
}

fn unit_dot_abs(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>().abs().min(1.0)
}

/// `|Spearman correlation|` with average ranks for ties; 0 when either
/// vector has no rank variance.
pub fn spearman_abs(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(LavaError::param("spearman inputs differ in length"));
    }
    if x.len() < 2 {
        return Err(LavaError::param("spearman needs at least two observations"));
    }
    Ok(match (unit_centered_ranks(x), unit_centered_ranks(y)) {
        (Some(a), Some(b)) => unit_dot_abs(&a, &b),
        _ => 0.0,
    })
}

/// Share of the vector taken by its most common value.
pub fn constant_fraction(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    let mut best = 1;
    let mut run = 1;
    for w in v.windows(2) {
        if w[1] == w[0] {
            run += 1;
            best = best.max(run);
        } else {
            run = 1;
        }
    }
    best as f64 / x.len() as f64
}

/// Warning text when a dense `ell x pairs` f32 matrix exceeds `budget_mb`.
pub fn memory_warning(num_localities: usize, num_features: usize, budget_mb: f64) -> Option<String> {
    let bytes = num_localities as f64 * PairIndex::new(num_features).len() as f64 * 4.0;
    let mb = bytes / (1024.0 * 1024.0);
    (mb > budget_mb).then(|| {
        format!(
            "correlation matrix needs {mb:.1} MiB ({num_localities} localities x {} pairs), above the {budget_mb} MiB budget",
            PairIndex::new(num_features).len()
        )
    })
}

/// Builds the correlation dataset. A feature whose most common value covers
/// more than `threshold` of a locality's members has all its pairs set to 0
/// in that locality.
pub fn locality_correlations(
    features: &FeatureMatrix,
    localities: &LocalitySet,
    threshold: f64,
) -> Result<CorrelationDataset> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(LavaError::param("filter threshold must be in (0, 1]"));
    }
    localities.check_samples(features.num_samples())?;
    if localities.n() < 2 {
        return Err(LavaError::param("localities need at least two members"));
    }
    let d = features.num_features();
    let pairs = PairIndex::new(d);
    let k = pairs.len();
    let x = features.matrix();
    let mut values = vec![0f32; localities.ell() * k];
    if k > 0 {
        values
            .par_chunks_mut(k)
            .zip(localities.members.par_iter())
            .for_each(|(out, members)| {
                let ranks: Vec<Option<Vec<f64>>> = (0..d)
                    .map(|f| {
                        let col: Vec<f64> = members.iter().map(|&s| x.get(s, f)).collect();
                        if constant_fraction(&col) > threshold {
                            None
                        } else {
                            unit_centered_ranks(&col)
                        }
                    })
                    .collect();
                let mut p = 0;
                for i in 0..d {
                    for j in i + 1..d {
                        if let (Some(a), Some(b)) = (&ranks[i], &ranks[j]) {
                            out[p] = unit_dot_abs(a, b) as f32;
                        }
                        p += 1;
                    }
                }
            });
    }
    Ok(CorrelationDataset {
        num_localities: localities.ell(),
        pair_index: pairs,
        values,
        filter_threshold: threshold,
        feature_names: features.feature_names().to_vec(),
    })
}
