//! Analyses of an extracted model: presence entropy, feature rankings,
//! presence-weighted averages and association with sample metadata.

use lava::amf::{fit, AmfConfig};
use lava::analysis::{metadata_association, module_feature_ranking, presence_entropy, presence_weighted_average};
use lava::config::PipelineConfig;
use lava::correlation::locality_correlations;
use lava::matrix::cosine_similarity;
use lava::neighbors::{centrality_profile, knn_self};
use lava::placement::optimize_placement;
use lava::synthetic::clustered_samples;

fn main() -> lava::Result<()> {
    let data = clustered_samples(600, 20, 2)?;
    let mut cfg = PipelineConfig::parse("n = 50\no = 3\ndirect_budget = 15")?;
    cfg.set_seed(8);
    let profile = centrality_profile(&knn_self(data.embeddings.matrix(), 50)?);
    let (loc, _) = optimize_placement(&data.embeddings, &profile, &cfg)?;
    let c = locality_correlations(&data.features, &loc, cfg.filter_threshold)?;
    let amf = AmfConfig {
        num_modules: 3,
        ..cfg.amf.clone()
    };
    let model = fit(&c, &amf)?.model;

    let h = presence_entropy(&model, 0.5);
    println!(
        "entropy over {} localities: {:.3} +- {:.3} bits (max {:.3})",
        h.retained,
        h.mean_entropy.unwrap_or(f64::NAN),
        h.std_entropy.unwrap_or(f64::NAN),
        3f64.log2()
    );
    let assoc = metadata_association(&model, &data.labels, &loc, "a", 0.01)?;
    for m in 0..model.num_modules() {
        let ranking = module_feature_ranking(&model, m, &c.feature_names, 0.5)?;
        let top: Vec<&str> = ranking.retained.iter().map(|&f| c.feature_names[f].as_str()).collect();
        let avg = presence_weighted_average(&c, &model, m)?;
        let a = &assoc.modules[m];
        println!(
            "module {m}: top features {top:?}; cosine to weighted average {:.3}; r(share of 'a') = {:.3} (p = {:.2e})",
            cosine_similarity(&avg, model.modules.row(m)),
            a.pearson_r.unwrap_or(f64::NAN),
            a.pearson_p.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
