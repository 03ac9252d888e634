//! Post-extraction analyses: locality similarity, presence entropy,
//! presence-weighted averages, metadata association and per-module feature
//! rankings. Everything here is a pure function of its inputs.

use serde::Serialize;

use crate::amf::AmfModel;
use crate::correlation::{CorrelationDataset, PairIndex};
use crate::error::{LavaError, Result};
use crate::io::SampleLabels;
use crate::matrix::cosine_similarity;
use crate::placement::LocalitySet;
use crate::stats::{correlation_p_value, pearson, spearman};

/// Cosine similarity of every locality to `reference`, restricted to
/// `pair_subset` when given. Rows that are all zero on the subset get 0.
pub fn locality_similarity(
    c: &CorrelationDataset,
    reference: usize,
    pair_subset: Option<&[usize]>,
) -> Result<Vec<f64>> {
    let ell = c.num_localities();
    if reference >= ell {
        return Err(LavaError::param(format!(
            "reference locality {reference} out of range (ell = {ell})"
        )));
    }
    let cols: Vec<usize> = match pair_subset {
        Some([]) => return Err(LavaError::param("pair subset is empty")),
        Some(s) => {
            if let Some(&bad) = s.iter().find(|&&p| p >= c.num_pairs()) {
                return Err(LavaError::param(format!("pair id {bad} out of range")));
            }
            s.to_vec()
        }
        None => (0..c.num_pairs()).collect(),
    };
    let pick = |i: usize| -> Vec<f64> {
        let row = c.row(i);
        cols.iter().map(|&p| f64::from(row[p])).collect()
    };
    let r = pick(reference);
    Ok((0..ell).map(|i| cosine_similarity(&r, &pick(i))).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PresenceStats {
    pub schema_version: u32,
    pub presence_floor: f64,
    pub num_modules: usize,
    pub summed_presence: Vec<f64>,
    /// Entropy in bits; `None` for localities below the floor.
    pub entropy: Vec<Option<f64>>,
    pub retained: usize,
    pub mean_entropy: Option<f64>,
    /// Population standard deviation over retained localities.
    pub std_entropy: Option<f64>,
    /// Set when no locality reached the floor.
    pub empty: bool,
}

/// Shannon entropy (bits) of a presence row after scaling it to sum 1.
pub fn shannon_entropy_bits(presences: &[f64]) -> f64 {
    let total: f64 = presences.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    let h: f64 = presences
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| {
            let q = p / total;
            -q * q.log2()
        })
        .sum();
    h.max(0.0)
}

pub fn presence_entropy(model: &AmfModel, presence_floor: f64) -> PresenceStats {
    let summed: Vec<f64> = model.presences.iter_rows().map(|r| r.iter().sum()).collect();
    let entropy: Vec<Option<f64>> = model
        .presences
        .iter_rows()
        .zip(&summed)
        .map(|(row, &s)| (s >= presence_floor && s > 0.0).then(|| shannon_entropy_bits(row)))
        .collect();
    let kept: Vec<f64> = entropy.iter().flatten().copied().collect();
    let (mean, std) = if kept.is_empty() {
        (None, None)
    } else {
        let n = kept.len() as f64;
        let mean = kept.iter().sum::<f64>() / n;
        let var = kept.iter().map(|h| (h - mean).powi(2)).sum::<f64>() / n;
        (Some(mean), Some(var.sqrt()))
    };
    PresenceStats {
        schema_version: 1,
        presence_floor,
        num_modules: model.num_modules(),
        summed_presence: summed,
        retained: kept.len(),
        mean_entropy: mean,
        std_entropy: std,
        empty: kept.is_empty(),
        entropy,
    }
}

/// `(sum_i P[i][m] C[i]) / (sum_i P[i][m])`: what module `m` would look like
/// if it averaged its localities instead of extracting a shared pattern.
pub fn presence_weighted_average(c: &CorrelationDataset, model: &AmfModel, module: usize) -> Result<Vec<f64>> {
    model.check_data(c)?;
    if module >= model.num_modules() {
        return Err(LavaError::param(format!("module {module} out of range")));
    }
    let weights = model.presences.column(module);
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(LavaError::param(format!("module {module} has zero total presence")));
    }
    let mut acc = vec![0.0; c.num_pairs()];
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            for (a, &v) in acc.iter_mut().zip(c.row(i)) {
                *a += w * f64::from(v);
            }
        }
    }
    acc.iter_mut().for_each(|a| *a /= total);
    Ok(acc)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModuleAssociation {
    pub module: usize,
    /// Localities where the module's presence exceeds the threshold.
    pub num_localities: usize,
    pub pearson_r: Option<f64>,
    pub pearson_p: Option<f64>,
    pub spearman_r: Option<f64>,
    pub spearman_p: Option<f64>,
    /// Fewer than three qualifying localities; statistics undefined.
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetadataAssociation {
    pub schema_version: u32,
    pub label_name: String,
    pub target_label: String,
    pub presence_threshold: f64,
    /// Fraction of each locality's members carrying the target label.
    pub locality_ratios: Vec<f64>,
    pub modules: Vec<ModuleAssociation>,
}

/// Correlates each module's presences with the per-locality share of
/// members labelled `target_label`, skipping localities where the module's
/// presence is at or below `threshold`.
pub fn metadata_association(
    model: &AmfModel,
    labels: &SampleLabels,
    localities: &LocalitySet,
    target_label: &str,
    threshold: f64,
) -> Result<MetadataAssociation> {
    if localities.ell() != model.num_localities() {
        return Err(LavaError::param(format!(
            "{} localities but the model has {} presence rows",
            localities.ell(),
            model.num_localities()
        )));
    }
    localities.check_samples(labels.len())?;
    if !labels.labels.iter().any(|l| l == target_label) {
        return Err(LavaError::param(format!(
            "label `{target_label}` does not occur in `{}`",
            labels.name
        )));
    }
    let ratios: Vec<f64> = localities
        .members
        .iter()
        .map(|m| {
            if m.is_empty() {
                return 0.0;
            }
            let hits = m.iter().filter(|&&s| labels.labels[s] == target_label).count();
            hits as f64 / m.len() as f64
        })
        .collect();

    let modules = (0..model.num_modules())
        .map(|m| {
            let (pres, rat): (Vec<f64>, Vec<f64>) = (0..model.num_localities())
                .filter(|&i| model.presences.get(i, m) > threshold)
                .map(|i| (model.presences.get(i, m), ratios[i]))
                .unzip();
            let k = pres.len();
            if k < 3 {
                return Ok(ModuleAssociation {
                    module: m,
                    num_localities: k,
                    pearson_r: None,
                    pearson_p: None,
                    spearman_r: None,
                    spearman_p: None,
                    flagged: true,
                });
            }
            let pr = pearson(&pres, &rat)?;
            let sr = spearman(&pres, &rat)?;
            Ok(ModuleAssociation {
                module: m,
                num_localities: k,
                pearson_r: Some(pr),
                pearson_p: Some(correlation_p_value(pr, k)),
                spearman_r: Some(sr),
                spearman_p: Some(correlation_p_value(sr, k)),
                flagged: false,
            })
        })
        .collect::<Result<_>>()?;

    Ok(MetadataAssociation {
        schema_version: 1,
        label_name: labels.name.clone(),
        target_label: target_label.to_string(),
        presence_threshold: threshold,
        locality_ratios: ratios,
        modules,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureScore {
    pub feature: usize,
    pub name: String,
    pub correlation_sum: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureRanking {
    pub module: usize,
    pub fraction_cutoff: f64,
    /// Descending by sum, ties by feature index.
    pub ranking: Vec<FeatureScore>,
    pub retained: Vec<usize>,
    /// The module is all zero; the ranking is empty.
    pub flagged: bool,
}

/// Per-feature sums of a pair vector: each pair's value counts toward both
/// of its features.
pub fn feature_sums(values: &[f64], pairs: &PairIndex) -> Vec<f64> {
    let mut sums = vec![0.0; pairs.num_features()];
    for ((i, j), &v) in pairs.iter().zip(values) {
        sums[i] += v;
        sums[j] += v;
    }
    sums
}

/// Features of `module` ranked by the sum of the correlations they take
/// part in; the retained set keeps those with at least `fraction_cutoff`
/// of the largest sum.
pub fn module_feature_ranking(
    model: &AmfModel,
    module: usize,
    feature_names: &[String],
    fraction_cutoff: f64,
) -> Result<FeatureRanking> {
    if !(fraction_cutoff > 0.0 && fraction_cutoff <= 1.0) {
        return Err(LavaError::param("fraction_cutoff must be in (0, 1]"));
    }
    if module >= model.num_modules() {
        return Err(LavaError::param(format!("module {module} out of range")));
    }
    let pairs = PairIndex::new(feature_names.len());
    if pairs.len() != model.num_pairs() {
        return Err(LavaError::param(format!(
            "{} feature names imply {} pairs, the model has {}",
            feature_names.len(),
            pairs.len(),
            model.num_pairs()
        )));
    }
    let sums = feature_sums(model.modules.row(module), &pairs);
    let max = sums.iter().cloned().fold(0.0, f64::max);
    if max <= 0.0 {
        return Ok(FeatureRanking {
            module,
            fraction_cutoff,
            ranking: Vec::new(),
            retained: Vec::new(),
            flagged: true,
        });
    }
    let mut order: Vec<usize> = (0..sums.len()).collect();
    order.sort_by(|&a, &b| sums[b].total_cmp(&sums[a]).then(a.cmp(&b)));
    let retained = order
        .iter()
        .copied()
        .filter(|&f| sums[f] >= fraction_cutoff * max)
        .collect();
    Ok(FeatureRanking {
        module,
        fraction_cutoff,
        ranking: order
            .into_iter()
            .map(|f| FeatureScore {
                feature: f,
                name: feature_names[f].clone(),
                correlation_sum: sums[f],
            })
            .collect(),
        retained,
        flagged: false,
    })
}

/// Ranking as `rank,feature,name,correlation_sum,retained` lines.
pub fn ranking_to_delimited(r: &FeatureRanking) -> String {
    let mut out = String::from("rank,feature,name,correlation_sum,retained\n");
    for (rank, s) in r.ranking.iter().enumerate() {
        let kept = r.retained.contains(&s.feature);
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            rank + 1,
            s.feature,
            s.name,
            s.correlation_sum,
            kept
        ));
    }
    out
}
