//! Heatmap of a pair vector on a feature grid, and a presence scatter plot.
//! Writes SVG files into the directory given as the first argument.

use std::path::PathBuf;

use lava::correlation::PairIndex;
use lava::matrix::Matrix;
use lava::placement::LocalitySet;
use lava::render::{render_grid_heatmap, render_presence_scatter, GridLayout, RenderSpec};
use lava::synthetic::uniform_grid;

fn main() -> lava::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "figures".into()));
    let layout: GridLayout = "6x6".parse()?;
    let pairs = PairIndex::new(layout.num_features());
    // a ring of correlated cells plus one weak pair that stays below the line threshold
    let mut module = vec![0.0; pairs.len()];
    let ring = [7, 8, 9, 10, 16, 22, 28, 27, 26, 25, 19, 13];
    for w in ring.windows(2) {
        module[pairs.pair_id(w[0], w[1])] = 0.9;
    }
    module[pairs.pair_id(0, 35)] = 0.4;
    render_grid_heatmap(&module, layout, &RenderSpec::default(), dir.join("ring.svg"))?;

    let samples = uniform_grid(20, 20)?;
    let probes = Matrix::from_fn(16, 2, |i, d| {
        if d == 0 {
            2.5 + 5.0 * (i % 4) as f64
        } else {
            2.5 + 5.0 * (i / 4) as f64
        }
    });
    let localities = LocalitySet {
        probes,
        members: vec![vec![0]; 16],
    };
    let presence: Vec<f64> = (0..16).map(|i| i as f64 / 15.0).collect();
    render_presence_scatter(&samples, &localities, &presence, dir.join("presence.svg"))?;
    println!(
        "wrote {} and {}",
        dir.join("ring.svg").display(),
        dir.join("presence.svg").display()
    );
    Ok(())
}
