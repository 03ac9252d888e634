//! SVG output: grid heatmaps of pair vectors, pair bar charts for data
//! without a spatial layout, and presence scatter plots.
//!
//! Colours use one sequential scale, a linear RGB ramp from `#f7fbff`
//! (low) to `#08306b` (high). Heatmap cells are coloured relative to the
//! largest per-feature sum in the plot; scatter probes use the absolute
//! presence in `[0, 1]`. Numbers are rounded to three decimals and printed
//! in shortest round-trip form, so identical inputs give identical bytes.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;

use crate::analysis::feature_sums;
use crate::correlation::PairIndex;
use crate::error::{LavaError, Result};
use crate::io::EmbeddingMatrix;
use crate::placement::LocalitySet;

const LOW: [f64; 3] = [247.0, 251.0, 255.0];
const HIGH: [f64; 3] = [8.0, 48.0, 107.0];
const LINE_COLOR: &str = "#d62728";
const CELL: f64 = 20.0;
/// Line width at an exponentiated value of 1, as a share of plot width.
pub const MAX_LINE_WIDTH_FRACTION: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RenderSpec {
    pub exponent: f64,
    /// Pairs whose exponentiated value falls below this are not drawn.
    pub line_threshold: f64,
}

impl Default for RenderSpec {
    fn default() -> Self {
        RenderSpec {
            exponent: 3.0,
            line_threshold: 0.1,
        }
    }
}

impl RenderSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.exponent > 0.0 && self.exponent.is_finite()) {
            return Err(LavaError::param("exponent must be positive"));
        }
        if !(0.0..1.0).contains(&self.line_threshold) {
            return Err(LavaError::param("line_threshold must be in [0, 1)"));
        }
        Ok(())
    }
}

/// Row-major placement of features on a `height x width` grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct GridLayout {
    pub height: usize,
    pub width: usize,
}

impl GridLayout {
    pub fn new(height: usize, width: usize) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(LavaError::param("grid dimensions must be positive"));
        }
        Ok(GridLayout { height, width })
    }

    pub fn num_features(&self) -> usize {
        self.height * self.width
    }

    pub fn check_features(&self, num_features: usize) -> Result<()> {
        if self.num_features() != num_features {
            return Err(LavaError::param(format!(
                "grid {}x{} has {} cells but there are {num_features} features",
                self.height,
                self.width,
                self.num_features()
            )));
        }
        Ok(())
    }

    /// `(row, col)` of a feature.
    pub fn position(&self, feature: usize) -> (usize, usize) {
        (feature / self.width, feature % self.width)
    }
}

impl FromStr for GridLayout {
    type Err = LavaError;

    /// Parses `HxW`, e.g. `28x28`.
    fn from_str(s: &str) -> Result<Self> {
        let (h, w) = s
            .split_once(['x', 'X'])
            .ok_or_else(|| LavaError::param(format!("grid `{s}` is not of the form HxW")))?;
        let parse = |v: &str| {
            v.trim()
                .parse::<usize>()
                .map_err(|_| LavaError::param(format!("grid `{s}` is not of the form HxW")))
        };
        GridLayout::new(parse(h)?, parse(w)?)
    }
}

fn num(x: f64) -> String {
    let r = (x * 1000.0).round() / 1000.0;
    if r == 0.0 {
        "0".to_string()
    } else {
        format!("{r}")
    }
}

/// Hex colour for `t` in `[0, 1]` on the sequential scale.
pub fn sequential_color(t: f64) -> String {
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 };
    let c: Vec<u8> = LOW
        .iter()
        .zip(HIGH)
        .map(|(&a, b)| (a + (b - a) * t).round() as u8)
        .collect();
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn svg_open(out: &mut String, w: f64, h: f64) {
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\">",
        num(w),
        num(h)
    );
}

fn pair_count_features(len: usize) -> Result<PairIndex> {
    // smallest D with D(D-1)/2 == len
    let d = ((1.0 + (1.0 + 8.0 * len as f64).sqrt()) / 2.0).round() as usize;
    let pairs = PairIndex::new(d);
    if pairs.len() != len {
        return Err(LavaError::param(format!("{len} is not a pair count D(D-1)/2")));
    }
    Ok(pairs)
}

/// Heatmap SVG as a string. Cells show per-feature correlation sums on a
/// scale relative to this plot's maximum; lines join the cell centres of
/// every pair with `value^exponent >= line_threshold`, with width
/// `k * value^exponent` where `k` is [`MAX_LINE_WIDTH_FRACTION`] of the
/// plot width.
pub fn grid_heatmap_svg(vector: &[f64], layout: GridLayout, spec: &RenderSpec) -> Result<String> {
    spec.validate()?;
    let pairs = PairIndex::new(layout.num_features());
    if vector.len() != pairs.len() {
        return Err(LavaError::param(format!(
            "vector has {} entries, a {}x{} grid needs {}",
            vector.len(),
            layout.height,
            layout.width,
            pairs.len()
        )));
    }
    let sums = feature_sums(vector, &pairs);
    let max = sums.iter().cloned().fold(0.0, f64::max);
    let (w, h) = (layout.width as f64 * CELL, layout.height as f64 * CELL);
    let k = MAX_LINE_WIDTH_FRACTION * w;

    let mut out = String::new();
    svg_open(&mut out, w, h);
    out.push_str("<g id=\"cells\" stroke=\"none\">\n");
    for (f, &s) in sums.iter().enumerate() {
        let (r, c) = layout.position(f);
        let t = if max > 0.0 { s / max } else { 0.0 };
        let _ = writeln!(
            out,
            "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\"/>",
            num(c as f64 * CELL),
            num(r as f64 * CELL),
            num(CELL),
            num(CELL),
            sequential_color(t)
        );
    }
    out.push_str("</g>\n");
    let _ = writeln!(out, "<g id=\"lines\" stroke=\"{LINE_COLOR}\" stroke-linecap=\"round\">");
    for ((a, b), &v) in pairs.iter().zip(vector) {
        let e = v.max(0.0).powf(spec.exponent);
        if e <= 0.0 || e < spec.line_threshold {
            continue;
        }
        let (ra, ca) = layout.position(a);
        let (rb, cb) = layout.position(b);
        let _ = writeln!(
            out,
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke-width=\"{}\"/>",
            num((ca as f64 + 0.5) * CELL),
            num((ra as f64 + 0.5) * CELL),
            num((cb as f64 + 0.5) * CELL),
            num((rb as f64 + 0.5) * CELL),
            num(k * e)
        );
    }
    out.push_str("</g>\n</svg>\n");
    Ok(out)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        crate::io::ensure_dir(dir)?;
    }
    std::fs::write(path, text).map_err(|e| LavaError::io(path, e))
}

pub fn render_grid_heatmap(
    vector: &[f64],
    layout: GridLayout,
    spec: &RenderSpec,
    path: impl AsRef<Path>,
) -> Result<()> {
    write_text(path.as_ref(), &grid_heatmap_svg(vector, layout, spec)?)
}

/// Horizontal bar chart of the `top` largest pair values, for features
/// without a spatial layout. Bar length is the exponentiated value.
pub fn pair_bars_svg(vector: &[f64], feature_names: &[String], spec: &RenderSpec, top: usize) -> Result<String> {
    spec.validate()?;
    let pairs = pair_count_features(vector.len())?;
    if feature_names.len() != pairs.num_features() {
        return Err(LavaError::param(format!(
            "{} feature names for {} features",
            feature_names.len(),
            pairs.num_features()
        )));
    }
    let mut order: Vec<usize> = (0..vector.len()).filter(|&p| vector[p] > 0.0).collect();
    order.sort_by(|&a, &b| vector[b].total_cmp(&vector[a]).then(a.cmp(&b)));
    order.truncate(top);

    let (label_w, bar_w, row_h) = (160.0, 300.0, 16.0);
    let w = label_w + bar_w + 60.0;
    let h = (order.len().max(1) as f64) * row_h + 10.0;
    let mut out = String::new();
    svg_open(&mut out, w, h);
    out.push_str("<g font-family=\"sans-serif\" font-size=\"11\">\n");
    for (row, &p) in order.iter().enumerate() {
        let (a, b) = pairs.pair(p);
        let e = vector[p].powf(spec.exponent);
        let y = 5.0 + row as f64 * row_h;
        let _ = writeln!(
            out,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{} / {}</text>",
            num(label_w - 5.0),
            num(y + 11.0),
            escape(&feature_names[a]),
            escape(&feature_names[b])
        );
        let _ = writeln!(
            out,
            "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\"/>",
            num(label_w),
            num(y + 2.0),
            num(bar_w * e),
            num(row_h - 4.0),
            sequential_color(e)
        );
        let _ = writeln!(
            out,
            "<text x=\"{}\" y=\"{}\">{}</text>",
            num(label_w + bar_w * e + 4.0),
            num(y + 11.0),
            num(vector[p])
        );
    }
    out.push_str("</g>\n</svg>\n");
    Ok(out)
}

pub fn render_pair_bars(
    vector: &[f64],
    feature_names: &[String],
    spec: &RenderSpec,
    top: usize,
    path: impl AsRef<Path>,
) -> Result<()> {
    write_text(path.as_ref(), &pair_bars_svg(vector, feature_names, spec, top)?)
}

/// Scatter of the first two embedding coordinates: samples as a light gray
/// underlay, probes coloured by presence (absolute `[0, 1]` scale) with a
/// legend. One-dimensional embeddings are drawn on a horizontal line.
pub fn presence_scatter_svg(
    embeddings: &EmbeddingMatrix,
    localities: &LocalitySet,
    presence: &[f64],
) -> Result<String> {
    if presence.len() != localities.ell() {
        return Err(LavaError::param(format!(
            "{} presences for {} localities",
            presence.len(),
            localities.ell()
        )));
    }
    let e = embeddings.matrix();
    if localities.probes.cols() != e.cols() {
        return Err(LavaError::param("probe and embedding dimensions differ"));
    }
    let xy = |row: &[f64]| (row[0], row.get(1).copied().unwrap_or(0.0));
    let points: Vec<(f64, f64)> = e.iter_rows().map(xy).collect();
    let probes: Vec<(f64, f64)> = localities.probes.iter_rows().map(xy).collect();
    let all = points.iter().chain(&probes);
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    let span = |a: f64, b: f64| if b > a { b - a } else { 1.0 };
    let (sx, sy) = (span(x0, x1), span(y0, y1));
    let (plot, margin, legend_w) = (400.0, 20.0, 70.0);
    let px = |x: f64| margin + (x - x0) / sx * plot;
    // SVG y grows downward
    let py = |y: f64| margin + plot - (y - y0) / sy * plot;

    let (w, h) = (plot + 2.0 * margin + legend_w, plot + 2.0 * margin);
    let mut out = String::new();
    svg_open(&mut out, w, h);
    out.push_str("<g id=\"samples\" fill=\"#d9d9d9\" stroke=\"none\">\n");
    for &(x, y) in &points {
        let _ = writeln!(out, "<circle cx=\"{}\" cy=\"{}\" r=\"1.5\"/>", num(px(x)), num(py(y)));
    }
    out.push_str("</g>\n<g id=\"probes\" stroke=\"#000000\" stroke-width=\"0.5\">\n");
    for (&(x, y), &p) in probes.iter().zip(presence) {
        let _ = writeln!(
            out,
            "<circle cx=\"{}\" cy=\"{}\" r=\"4\" fill=\"{}\"/>",
            num(px(x)),
            num(py(y)),
            sequential_color(p)
        );
    }
    out.push_str("</g>\n");
    // legend: ten steps from presence 1 (top) to 0 (bottom)
    let (lx, steps) = (plot + 2.0 * margin + 10.0, 10usize);
    let step_h = plot / 2.0 / steps as f64;
    out.push_str("<g id=\"legend\" font-family=\"sans-serif\" font-size=\"11\">\n");
    for s in 0..steps {
        let t = 1.0 - (s as f64 + 0.5) / steps as f64;
        let _ = writeln!(
            out,
            "<rect x=\"{}\" y=\"{}\" width=\"15\" height=\"{}\" fill=\"{}\"/>",
            num(lx),
            num(margin + s as f64 * step_h),
            num(step_h),
            sequential_color(t)
        );
    }
    let _ = writeln!(
        out,
        "<text x=\"{}\" y=\"{}\">1</text>",
        num(lx + 20.0),
        num(margin + 10.0)
    );
    let _ = writeln!(
        out,
        "<text x=\"{}\" y=\"{}\">0</text>",
        num(lx + 20.0),
        num(margin + plot / 2.0)
    );
    let _ = writeln!(
        out,
        "<text x=\"{}\" y=\"{}\">presence</text>",
        num(lx),
        num(margin + plot / 2.0 + 16.0)
    );
    out.push_str("</g>\n</svg>\n");
    Ok(out)
}

pub fn render_presence_scatter(
    embeddings: &EmbeddingMatrix,
    localities: &LocalitySet,
    presence: &[f64],
    path: impl AsRef<Path>,
) -> Result<()> {
    write_text(path.as_ref(), &presence_scatter_svg(embeddings, localities, presence)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;

    fn lines(svg: &str) -> usize {
        svg.matches("<line ").count()
    }

    #[test]
    fn layout_parsing() {
        let g: GridLayout = "28x28".parse().unwrap();
        assert_eq!(g.num_features(), 784);
        assert_eq!(g.position(29), (1, 1));
        assert!("28".parse::<GridLayout>().is_err());
        assert!("0x3".parse::<GridLayout>().is_err());
        assert!(g.check_features(783).is_err());
    }

    #[test]
    fn heatmap_cases() {
        let g = GridLayout::new(3, 3).unwrap();
        let pairs = PairIndex::new(9);
        let spec = RenderSpec::default();
        let zero = grid_heatmap_svg(&vec![0.0; pairs.len()], g, &spec).unwrap();
        assert_eq!(lines(&zero), 0);
        assert_eq!(zero.matches(&sequential_color(0.0)).count(), 9);

        let mut v = vec![0.0; pairs.len()];
        v[pairs.pair_id(0, 8)] = 1.0;
        let one = grid_heatmap_svg(&v, g, &spec).unwrap();
        assert_eq!(lines(&one), 1);
        assert!(one.contains("x1=\"10\" y1=\"10\" x2=\"50\" y2=\"50\""));
        assert_eq!(one.matches(&sequential_color(1.0)).count(), 2);
        assert!(one.contains("stroke-width=\"1.2\""));

        v[pairs.pair_id(0, 8)] = 0.4;
        assert_eq!(lines(&grid_heatmap_svg(&v, g, &spec).unwrap()), 0);
        assert!(grid_heatmap_svg(&v[1..], g, &spec).is_err());
    }

    #[test]
    fn color_scale_ends() {
        assert_eq!(sequential_color(0.0), "#f7fbff");
        assert_eq!(sequential_color(1.0), "#08306b");
        assert_eq!(sequential_color(f64::NAN), "#f7fbff");
    }

    #[test]
    fn scatter_colors_by_presence() {
        let e = EmbeddingMatrix::new(Matrix::from_rows(&[[0.0, 0.0], [1.0, 1.0], [2.0, 0.5]]).unwrap()).unwrap();
        let loc = LocalitySet {
            probes: Matrix::from_rows(&[[0.5, 0.5], [1.5, 0.5]]).unwrap(),
            members: vec![vec![0, 1], vec![1, 2]],
        };
        let svg = presence_scatter_svg(&e, &loc, &[0.0, 1.0]).unwrap();
        assert!(svg.contains("r=\"4\" fill=\"#f7fbff\""));
        assert!(svg.contains("r=\"4\" fill=\"#08306b\""));
        assert!(presence_scatter_svg(&e, &loc, &[0.0]).is_err());
    }

    #[test]
    fn bars_list_top_pairs() {
        let names: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let svg = pair_bars_svg(&[0.9, 0.0, 0.5], &names, &RenderSpec::default(), 10).unwrap();
        assert_eq!(svg.matches("<rect ").count(), 2);
        assert!(svg.find("a / b").unwrap() < svg.find("b / c").unwrap());
        assert!(pair_bars_svg(&[0.9, 0.0], &names, &RenderSpec::default(), 10).is_err());
    }
}
