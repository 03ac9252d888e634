mod common;

use std::path::Path;

use common::*;
use lava::matrix::Matrix;
use lava::render::{grid_heatmap_svg, presence_scatter_svg};
use lava::{EmbeddingMatrix, GridLayout, LocalitySet, RenderSpec};

/// Compares against the stored file, or rewrites it when blessing.
fn check_golden(name: &str, actual: &str) {
    let path = Path::new(GOLDEN_DIR).join(name);
    if bless() {
        std::fs::write(&path, actual).unwrap();
        return;
    }
    let expected = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert_eq!(actual, expected, "{name} differs from its golden file");
}

#[test]
fn heatmaps_match_goldens() {
    let layout = GridLayout::new(3, 3).unwrap();
    for (name, vector) in heatmap_golden_cases() {
        check_golden(
            name,
            &grid_heatmap_svg(&vector, layout, &RenderSpec::default()).unwrap(),
        );
    }
}

#[test]
fn presence_scatter_matches_golden() {
    let emb = EmbeddingMatrix::new(Matrix::from_fn(
        6,
        2,
        |i, d| if d == 0 { i as f64 } else { (i % 2) as f64 },
    ))
    .unwrap();
    let localities = LocalitySet {
        probes: Matrix::from_rows(&[[0.5, 0.5], [2.5, 0.5], [4.5, 0.5]]).unwrap(),
        members: vec![vec![0, 1], vec![2, 3], vec![4, 5]],
    };
    let svg = presence_scatter_svg(&emb, &localities, &[0.0, 0.5, 1.0]).unwrap();
    check_golden("presence_scatter.svg", &svg);
}

#[test]
fn rendering_is_deterministic() {
    let layout = GridLayout::new(3, 3).unwrap();
    let (_, v) = heatmap_golden_cases().remove(1);
    let a = grid_heatmap_svg(&v, layout, &RenderSpec::default()).unwrap();
    let b = grid_heatmap_svg(&v, layout, &RenderSpec::default()).unwrap();
    assert_eq!(a, b);
}
