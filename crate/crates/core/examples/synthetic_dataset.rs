//! Writes a seeded synthetic dataset for the `lava` command line tool:
//! `embeddings.csv`, `features.csv`, `labels.txt` and a starter `lava.cfg`.
//!
//!     cargo run --example synthetic_dataset -- out/data 500
//!     cargo run --bin lava -- pipeline --config out/data/lava.cfg \
//!         --embeddings out/data/embeddings.csv --features out/data/features.csv \
//!         --labels out/data/labels.txt --target a --out out/run

use std::path::PathBuf;

use lava::io::{save_delimited, save_labels};
use lava::synthetic::clustered_samples;

fn main() -> lava::Result<()> {
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "synthetic".into()));
    let samples: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(500);
    std::fs::create_dir_all(&dir).map_err(|e| lava::LavaError::Io {
        path: dir.clone(),
        source: e,
    })?;

    let data = clustered_samples(samples, 20, 7)?;
    let latent_header = vec!["x".to_string(), "y".to_string()];
    save_delimited(
        data.embeddings.matrix(),
        Some(&latent_header),
        &dir.join("embeddings.csv"),
    )?;
    save_delimited(
        data.features.matrix(),
        Some(data.features.feature_names()),
        &dir.join("features.csv"),
    )?;
    save_labels(&data.labels, dir.join("labels.txt"))?;
    let cfg = "\
# 500 samples, neighborhoods of 50, every sample in ~3 localities
n = 50
o = 3
seed = 1
direct_budget = 20
num_runs = 3
candidates = 2,3,4
patience_epochs = 50
max_epochs = 3000
learning_rate = 0.01
";
    std::fs::write(dir.join("lava.cfg"), cfg).map_err(|e| lava::LavaError::Io {
        path: dir.join("lava.cfg"),
        source: e,
    })?;
    println!("wrote {} samples x 20 features to {}", samples, dir.display());
    Ok(())
}
