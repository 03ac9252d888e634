//! Per-locality absolute Spearman correlations, including the filter that
//! zeroes features which are mostly constant inside a locality.

use lava::correlation::{constant_fraction, locality_correlations, spearman_abs, PairIndex};
use lava::matrix::Matrix;
use lava::placement::LocalitySet;
use lava::synthetic::clustered_samples;

fn main() -> lava::Result<()> {
    // ties get average ranks
    let r = spearman_abs(&[1.0, 2.0, 2.0, 3.0], &[4.0, 3.0, 3.0, 1.0])?;
    println!("|rho| with ties = {r:.4}");
    println!(
        "modal share of [0,0,0,0,1] = {}",
        constant_fraction(&[0.0, 0.0, 0.0, 0.0, 1.0])
    );

    let data = clustered_samples(300, 20, 11)?;
    // one locality per blob: samples are assigned round-robin to blobs
    let members: Vec<Vec<usize>> = (0..3).map(|b| (b..300).step_by(3).collect()).collect();
    let localities = LocalitySet {
        probes: Matrix::zeros(3, 2),
        members,
    };
    let c = locality_correlations(&data.features, &localities, 0.75)?;
    let pairs = PairIndex::new(20);
    for l in 0..3 {
        let strongest = (0..pairs.len())
            .max_by(|&a, &b| c.get(l, a).total_cmp(&c.get(l, b)))
            .unwrap();
        let (i, j) = pairs.pair(strongest);
        println!(
            "locality {l}: strongest pair {} / {} = {:.3}, pairs with feat19 = {:.1}",
            c.feature_names[i],
            c.feature_names[j],
            c.get(l, strongest),
            c.get(l, pairs.pair_id(0, 19))
        );
    }
    Ok(())
}
