//! All stages through the library's file-based stage functions, the same
//! calls the `lava pipeline` subcommand makes.

use lava::cli::{layout, pipeline};
use lava::config::PipelineConfig;
use lava::io::{save_delimited, save_labels};
use lava::synthetic::clustered_samples;

fn main() -> lava::Result<()> {
    let out = std::env::temp_dir().join("lava_run_pipeline");
    let input = out.join("input");
    std::fs::create_dir_all(&input).map_err(|e| lava::LavaError::Io {
        path: input.clone(),
        source: e,
    })?;
    let data = clustered_samples(450, 16, 21)?;
    save_delimited(data.embeddings.matrix(), None, &input.join("e.csv"))?;
    save_delimited(
        data.features.matrix(),
        Some(data.features.feature_names()),
        &input.join("f.csv"),
    )?;
    save_labels(&data.labels, input.join("labels.txt"))?;

    let mut cfg = PipelineConfig::parse(
        "n = 45\no = 3\ndirect_budget = 15\nnum_runs = 2\ncandidates = 3\nlearning_rate = 0.01\nmax_epochs = 2000",
    )?;
    cfg.set_seed(2);
    pipeline(
        &cfg,
        &input.join("e.csv"),
        &input.join("f.csv"),
        &out,
        Some("4x4"),
        Some((input.join("labels.txt"), "b".into())),
    )?;
    for d in [
        layout::LOCALITIES,
        layout::CORRELATIONS,
        layout::SELECTION,
        layout::ANALYSIS,
        layout::FIGURES,
    ] {
        let n = std::fs::read_dir(out.join(d)).map(|r| r.count()).unwrap_or(0);
        println!("{d}/: {n} files");
    }
    println!("outputs in {}", out.display());
    Ok(())
}
