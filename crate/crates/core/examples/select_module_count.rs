//! Repeated runs per module count, summarized by mean cosine similarity,
//! overestimation and the silhouette width of the pooled modules.

use lava::amf::AmfConfig;
use lava::selection::{select_modules, SelectionConfig};
use lava::synthetic::{planted, PlantedSpec};

fn main() -> lava::Result<()> {
    let p = planted(PlantedSpec::default(), 9)?;
    let selection = SelectionConfig {
        num_runs: 3,
        candidate_module_counts: vec![2, 4, 6],
        seed: 4,
        ..Default::default()
    };
    let (report, _best) = select_modules(&p.data, &selection, &AmfConfig::default())?;
    println!("modules  cosine          overestimation  silhouette");
    for c in &report.candidates {
        println!(
            "{:>7}  {:.3} +- {:.3}   {:.3} +- {:.3}   {}",
            c.num_modules,
            c.cosine_similarity_mean,
            c.cosine_similarity_std,
            c.overestimation_ratio_mean,
            c.overestimation_ratio_std,
            c.silhouette.map_or("n/a".into(), |s| format!("{s:.3}"))
        );
    }
    println!(
        "chosen: {} modules (run {})",
        report.chosen_module_count, report.chosen_run
    );
    Ok(())
}
