//! How well does the embedding keep original-space neighbours? Mean Jaccard
//! overlap of k-neighbourhoods for several k.

use lava::io::EmbeddingMatrix;
use lava::matrix::Matrix;
use lava::neighbors::neighborhood_jaccard;
use lava::synthetic::clustered_samples;

fn main() -> lava::Result<()> {
    let data = clustered_samples(400, 20, 6)?;
    // the features themselves projected onto two coordinates: a crude embedding
    let f = data.features.matrix();
    let crude = EmbeddingMatrix::new(Matrix::from_fn(f.rows(), 2, |i, d| f.get(i, d)))?;
    for (name, latent) in [("clustered latent", &data.embeddings), ("first two features", &crude)] {
        let points = neighborhood_jaccard(&data.features, latent, &[5, 20, 100], 200, 1)?;
        let line: Vec<String> = points
            .iter()
            .map(|p| format!("k={} {:.3}", p.size, p.mean_jaccard))
            .collect();
        println!("{name}: {}", line.join(", "));
    }
    Ok(())
}
