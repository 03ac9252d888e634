//! Centrality-matched locality placement on a clustered 2-D embedding.

use lava::config::PipelineConfig;
use lava::neighbors::{centrality_profile, knn_self};
use lava::placement::{locality_in_degree, optimize_placement, place_with_params, placement_loss, PlacementParams};
use lava::synthetic::clustered_samples;

fn main() -> lava::Result<()> {
    let data = clustered_samples(600, 20, 3)?;
    let mut cfg = PipelineConfig::parse("n = 40\no = 4\ndirect_budget = 30")?;
    cfg.set_seed(5);

    let profile = centrality_profile(&knn_self(data.embeddings.matrix(), 40)?);
    let (localities, report) = optimize_placement(&data.embeddings, &profile, &cfg)?;
    println!("{} localities of {} samples", localities.ell(), localities.n());
    println!(
        "best alpha = {:.3}, beta = {:.3}, loss = {:.3} after {} evaluations",
        report.best_alpha,
        report.best_beta,
        report.best_loss,
        report.evaluations.len()
    );

    let plain = place_with_params(
        &data.embeddings,
        &profile,
        localities.ell(),
        40,
        PlacementParams { alpha: 0.0, beta: 0.0 },
        &cfg.placement,
    )?
    .expect("uniform weights are always feasible");
    println!("unweighted k-means loss = {:.3}", placement_loss(&profile, &plain));

    let degree = locality_in_degree(&localities, data.embeddings.num_samples());
    let uncovered = degree.iter().filter(|&&d| d == 0).count();
    println!("samples in no locality: {uncovered}");
    Ok(())
}
