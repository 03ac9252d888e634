//! Association matrix factorization.
//!
//! A locality-by-pair correlation matrix `C` is approximated by presences
//! `P` (localities x modules) and modules `M` (modules x pairs), all in
//! `[0, 1]`, through a per-entry maximum instead of a sum:
//!
//! ```text
//! C_hat[i][c] = max_m P[i][m] * M[m][c]
//! ```
//!
//! The per-locality loss is the norm-weighted cosine distance between the
//! overestimation-masked rows plus `gamma` times the unmasked MAE. The mask
//! puts weight `nu` on entries where `C_hat > C` and 1 elsewhere.

mod adam;
mod fit;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::correlation::CorrelationDataset;
use crate::error::{LavaError, Result};
use crate::io::{self, MatrixFormat};
use crate::matrix::Matrix;

pub use adam::{Adam, AdamConfig};
pub use fit::{fine_tune_presences, fit, fit_from, initial_model, pinball_loss, AmfRunResult};

pub const MODULES_FILE: &str = "modules.bin";
pub const PRESENCES_FILE: &str = "presences.bin";
pub const MODEL_META_FILE: &str = "model.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmfConfig {
    pub num_modules: usize,
    pub nu: f64,
    pub gamma: f64,
    pub batch_size: usize,
    pub improvement_tol: f64,
    pub patience_epochs: usize,
    pub max_epochs: usize,
    pub adam: AdamConfig,
    pub seed: u64,
}

impl Default for AmfConfig {
    fn default() -> Self {
        AmfConfig {
            num_modules: 9,
            nu: 9.0,
            gamma: 0.0001,
            batch_size: 64,
            improvement_tol: 0.01,
            patience_epochs: 100,
            max_epochs: 20_000,
            adam: AdamConfig::default(),
            seed: 0,
        }
    }
}

impl AmfConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(LavaError::param(m));
        if self.num_modules < 1 {
            return bad("num_modules must be at least 1");
        }
        if !(self.nu >= 1.0) {
            return bad("nu must be at least 1");
        }
        if !(self.gamma >= 0.0) {
            return bad("gamma must be non-negative");
        }
        if self.batch_size < 1 {
            return bad("batch_size must be at least 1");
        }
        if !(self.improvement_tol > 0.0) {
            return bad("improvement_tol must be positive");
        }
        if self.patience_epochs < 1 || self.max_epochs < 1 {
            return bad("patience_epochs and max_epochs must be at least 1");
        }
        let a = &self.adam;
        if !(a.learning_rate > 0.0 && a.epsilon > 0.0) {
            return bad("learning_rate and adam_epsilon must be positive");
        }
        if !((0.0..1.0).contains(&a.beta1) && (0.0..1.0).contains(&a.beta2)) {
            return bad("beta1 and beta2 must be in [0, 1)");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AmfModel {
    /// modules x pairs
    pub modules: Matrix,
    /// localities x modules
    pub presences: Matrix,
}

/// Training metadata stored next to a persisted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMetadata {
    pub schema_version: u32,
    pub num_localities: usize,
    pub num_modules: usize,
    pub num_pairs: usize,
    pub config: AmfConfig,
    pub final_loss: f64,
    pub overestimation_ratio: f64,
    pub cosine_similarity_mean: f64,
    pub epochs_run: usize,
    pub loss_curve: Vec<f64>,
}

impl AmfModel {
    pub fn new(modules: Matrix, presences: Matrix) -> Result<Self> {
        if presences.cols() != modules.rows() {
            return Err(LavaError::param(format!(
                "presences have {} modules but the module matrix has {}",
                presences.cols(),
                modules.rows()
            )));
        }
        let in_range = |m: &Matrix| m.as_slice().iter().all(|v| (0.0..=1.0).contains(v));
        if !in_range(&modules) || !in_range(&presences) {
            return Err(LavaError::data("module and presence entries must lie in [0, 1]"));
        }
        Ok(AmfModel { modules, presences })
    }

    pub fn num_modules(&self) -> usize {
        self.modules.rows()
    }

    pub fn num_localities(&self) -> usize {
        self.presences.rows()
    }

    pub fn num_pairs(&self) -> usize {
        self.modules.cols()
    }

    pub fn clamp(&mut self) {
        for v in self
            .modules
            .as_mut_slice()
            .iter_mut()
            .chain(self.presences.as_mut_slice().iter_mut())
        {
            *v = v.clamp(0.0, 1.0);
        }
    }

    /// Writes `modules.bin`, `presences.bin` and `model.json`.
    pub fn save(&self, dir: &Path, meta: &ModelMetadata) -> Result<()> {
        io::ensure_dir(dir)?;
        io::save_matrix(&self.modules, dir.join(MODULES_FILE), MatrixFormat::Binary)?;
        io::save_matrix(&self.presences, dir.join(PRESENCES_FILE), MatrixFormat::Binary)?;
        io::write_json(meta, dir.join(MODEL_META_FILE))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let modules = io::load_matrix(dir.join(MODULES_FILE), MatrixFormat::Binary)?;
        let presences = io::load_matrix(dir.join(PRESENCES_FILE), MatrixFormat::Binary)?;
        AmfModel::new(modules, presences)
    }

    pub fn check_data(&self, c: &CorrelationDataset) -> Result<()> {
        if c.num_localities() != self.num_localities() || c.num_pairs() != self.num_pairs() {
            return Err(LavaError::param(format!(
                "model is {}x{} (localities x pairs) but the data is {}x{}",
                self.num_localities(),
                self.num_pairs(),
                c.num_localities(),
                c.num_pairs()
            )));
        }
        Ok(())
    }
}

/// Reconstruction of one locality row plus the winning module per entry
/// (lowest index on ties).
pub(crate) fn reconstruct_row(model: &AmfModel, i: usize, chat: &mut [f64], argmax: &mut [usize]) {
    let p = model.presences.row(i);
    chat.fill(f64::NEG_INFINITY);
    argmax.fill(0);
    for (m, &pm) in p.iter().enumerate() {
        let module = model.modules.row(m);
        for c in 0..chat.len() {
            let v = pm * module[c];
            if v > chat[c] {
                chat[c] = v;
                argmax[c] = m;
            }
        }
    }
}

/// `C_hat[i][c] = max_m P[i][m] * M[m][c]`.
pub fn reconstruct(model: &AmfModel) -> Matrix {
    let (l, k) = (model.num_localities(), model.num_pairs());
    let mut out = Matrix::zeros(l, k);
    let mut arg = vec![0; k];
    for i in 0..l {
        reconstruct_row(model, i, out.row_mut(i), &mut arg);
    }
    out
}

/// `nu` where the reconstruction exceeds the data, 1 elsewhere.
pub fn overestimation_mask(c_row: &[f64], chat_row: &[f64], nu: f64) -> Vec<f64> {
    c_row
        .iter()
        .zip(chat_row)
        .map(|(c, h)| if h > c { nu } else { 1.0 })
        .collect()
}

/// `||C_i|| / sum_{j != i} ||C_j||`, with the convention that the weight is
/// 1 for a nonzero row when no other row has mass and 0 for a zero row.
pub fn norm_weights(c: &CorrelationDataset) -> Vec<f64> {
    let norms: Vec<f64> = (0..c.num_localities())
        .map(|i| {
            c.row(i)
                .iter()
                .map(|&v| f64::from(v) * f64::from(v))
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    let total: f64 = norms.iter().sum();
    norms
        .iter()
        .map(|&n| {
            let rest = total - n;
            if n == 0.0 {
                0.0
            } else if rest > 0.0 {
                n / rest
            } else {
                1.0
            }
        })
        .collect()
}

/// Per-locality loss pieces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct TermParts {
    /// masked cosine similarity, `None` for a zero data row
    pub cosine: Option<f64>,
    pub mae: f64,
    pub value: f64,
}

/// Loss of one locality and, optionally, its gradient with respect to the
/// reconstruction row, scaled by `grad_scale`.
pub(crate) fn locality_term(
    c_row: &[f32],
    chat: &[f64],
    norm_weight: f64,
    nu: f64,
    gamma: f64,
    grad: Option<(&mut [f64], f64)>,
) -> TermParts {
    let k = c_row.len() as f64;
    let mut uu = 0.0;
    let mut vv = 0.0;
    let mut uv = 0.0;
    let mut abs_err = 0.0;
    for (&c, &h) in c_row.iter().zip(chat) {
        let c = f64::from(c);
        let w = if h > c { nu } else { 1.0 };
        let (u, v) = (w * c, w * h);
        uu += u * u;
        vv += v * v;
        uv += u * v;
        abs_err += (c - h).abs();
    }
    let mae = abs_err / k;
    let (nu_norm, nv_norm) = (uu.sqrt(), vv.sqrt());
    let cosine = if nu_norm > 0.0 {
        Some(if nv_norm > 0.0 { uv / (nu_norm * nv_norm) } else { 0.0 })
    } else {
        None
    };
    let cos_term = match cosine {
        Some(cos) if norm_weight > 0.0 => norm_weight * (1.0 - cos),
        _ => 0.0,
    };
    let value = cos_term + gamma * mae;

    if let Some((g, scale)) = grad {
        let cos_active = norm_weight > 0.0 && nu_norm > 0.0 && nv_norm > 0.0;
        let cos = cosine.unwrap_or(0.0);
        let inv_uv = if cos_active { 1.0 / (nu_norm * nv_norm) } else { 0.0 };
        let inv_vv = if cos_active { 1.0 / vv } else { 0.0 };
        for ((gc, &c), &h) in g.iter_mut().zip(c_row).zip(chat) {
            let c = f64::from(c);
            let w = if h > c { nu } else { 1.0 };
            let mut d = 0.0;
            if cos_active {
                d -= norm_weight * w * (w * c * inv_uv - cos * w * h * inv_vv);
            }
            if h > c {
                d += gamma / k;
            } else if h < c {
                d -= gamma / k;
            }
            *gc = d * scale;
        }
    }
    TermParts { cosine, mae, value }
}

/// Full-dataset loss: the sum of per-locality terms.
pub fn amf_loss(c: &CorrelationDataset, model: &AmfModel, config: &AmfConfig) -> Result<f64> {
    model.check_data(c)?;
    let weights = norm_weights(c);
    Ok(full_loss(c, model, config, &weights))
}

pub(crate) fn full_loss(c: &CorrelationDataset, model: &AmfModel, config: &AmfConfig, weights: &[f64]) -> f64 {
    let k = model.num_pairs();
    let mut chat = vec![0.0; k];
    let mut arg = vec![0; k];
    (0..c.num_localities())
        .map(|i| {
            reconstruct_row(model, i, &mut chat, &mut arg);
            locality_term(c.row(i), &chat, weights[i], config.nu, config.gamma, None).value
        })
        .sum()
}

/// Minibatch objective: the mean per-locality term over `batch`.
pub fn batch_loss(c: &CorrelationDataset, model: &AmfModel, config: &AmfConfig, batch: &[usize]) -> Result<f64> {
    model.check_data(c)?;
    let weights = norm_weights(c);
    let k = model.num_pairs();
    let mut chat = vec![0.0; k];
    let mut arg = vec![0; k];
    let total: f64 = batch
        .iter()
        .map(|&i| {
            reconstruct_row(model, i, &mut chat, &mut arg);
            locality_term(c.row(i), &chat, weights[i], config.nu, config.gamma, None).value
        })
        .sum();
    Ok(total / batch.len() as f64)
}

/// Gradients of a minibatch objective.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub presences: Matrix,
    pub modules: Matrix,
}

/// Subgradients of [`batch_loss`]. Each reconstructed entry passes its
/// gradient only to its winning module; the overestimation mask is held
/// fixed; `|x|` has derivative 0 at 0.
pub fn loss_gradients(
    c: &CorrelationDataset,
    model: &AmfModel,
    config: &AmfConfig,
    batch: &[usize],
) -> Result<Gradients> {
    model.check_data(c)?;
    let weights = norm_weights(c);
    let mut g = Gradients {
        presences: Matrix::zeros(model.num_localities(), model.num_modules()),
        modules: Matrix::zeros(model.num_modules(), model.num_pairs()),
    };
    accumulate_gradients(
        c,
        model,
        config,
        &weights,
        batch,
        &mut g,
        &mut Workspace::new(model.num_pairs()),
    );
    Ok(g)
}

pub(crate) struct Workspace {
    chat: Vec<f64>,
    arg: Vec<usize>,
    grad: Vec<f64>,
}

impl Workspace {
    pub(crate) fn new(k: usize) -> Self {
        Workspace {
            chat: vec![0.0; k],
            arg: vec![0; k],
            grad: vec![0.0; k],
        }
    }
}

/// Overwrites `g` with the gradient of the mean batch term.
pub(crate) fn accumulate_gradients(
    c: &CorrelationDataset,
    model: &AmfModel,
    config: &AmfConfig,
    weights: &[f64],
    batch: &[usize],
    g: &mut Gradients,
    ws: &mut Workspace,
) {
    g.presences.as_mut_slice().fill(0.0);
    g.modules.as_mut_slice().fill(0.0);
    let scale = 1.0 / batch.len() as f64;
    for &i in batch {
        reconstruct_row(model, i, &mut ws.chat, &mut ws.arg);
        locality_term(
            c.row(i),
            &ws.chat,
            weights[i],
            config.nu,
            config.gamma,
            Some((&mut ws.grad, scale)),
        );
        let p = model.presences.row(i);
        let gp = g.presences.row_mut(i);
        for (cidx, (&m, &d)) in ws.arg.iter().zip(&ws.grad).enumerate() {
            if d != 0.0 {
                gp[m] += d * model.modules.get(m, cidx);
                let gm = g.modules.get(m, cidx) + d * p[m];
                g.modules.set(m, cidx, gm);
            }
        }
    }
}

/// Share of the total absolute error coming from overestimated entries.
pub fn overestimation_ratio(c: &CorrelationDataset, model: &AmfModel) -> f64 {
    let k = model.num_pairs();
    let mut chat = vec![0.0; k];
    let mut arg = vec![0; k];
    let mut over = 0.0;
    let mut total = 0.0;
    for i in 0..c.num_localities() {
        reconstruct_row(model, i, &mut chat, &mut arg);
        for (&cv, &h) in c.row(i).iter().zip(&chat) {
            let diff = h - f64::from(cv);
            if diff > 0.0 {
                over += diff;
            }
            total += diff.abs();
        }
    }
    if total > 0.0 {
        over / total
    } else {
        0.0
    }
}

/// Mean masked cosine similarity (the main loss term expressed as a
/// similarity) over localities with nonzero data.
pub fn cosine_similarity_mean(c: &CorrelationDataset, model: &AmfModel, nu: f64) -> f64 {
    let k = model.num_pairs();
    let mut chat = vec![0.0; k];
    let mut arg = vec![0; k];
    let mut sum = 0.0;
    let mut count = 0usize;
    for i in 0..c.num_localities() {
        reconstruct_row(model, i, &mut chat, &mut arg);
        if let Some(cos) = locality_term(c.row(i), &chat, 1.0, nu, 0.0, None).cosine {
            sum += cos;
            count += 1;
        }
    }
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(p: &[&[f64]], m: &[&[f64]]) -> AmfModel {
        AmfModel::new(Matrix::from_rows(m).unwrap(), Matrix::from_rows(p).unwrap()).unwrap()
    }

    fn data(rows: &[&[f64]], d: usize) -> CorrelationDataset {
        CorrelationDataset::from_matrix(&Matrix::from_rows(rows).unwrap(), d, 0.75).unwrap()
    }

    #[test]
    fn single_module_is_outer_product() {
        let md = model(&[&[0.5], &[1.0]], &[&[0.2, 0.4, 1.0]]);
        let r = reconstruct(&md);
        assert_eq!(r.row(0), &[0.5 * 0.2, 0.5 * 0.4, 0.5]);
        assert_eq!(r.row(1), &[0.2, 0.4, 1.0]);
    }

    #[test]
    fn one_hot_presence_selects_module() {
        let md = model(&[&[1.0, 0.0]], &[&[0.3, 0.9, 0.1], &[0.8, 0.2, 0.7]]);
        assert_eq!(reconstruct(&md).row(0), md.modules.row(0));
    }

    #[test]
    fn masks() {
        assert_eq!(overestimation_mask(&[0.1, 0.2], &[0.1, 0.2], 9.0), vec![1.0, 1.0]);
        assert_eq!(overestimation_mask(&[0.1, 0.2], &[0.5, 0.3], 9.0), vec![9.0, 9.0]);
        assert_eq!(overestimation_mask(&[0.1, 0.2], &[0.0, 0.3], 9.0), vec![1.0, 9.0]);
    }

    #[test]
    fn perfect_reconstruction_has_zero_loss() {
        let md = model(&[&[1.0, 0.0], &[0.0, 0.5]], &[&[0.5, 0.25, 1.0], &[1.0, 0.5, 0.0]]);
        let c = data(&[&[0.5, 0.25, 1.0], &[0.5, 0.25, 0.0]], 3);
        let loss = amf_loss(&c, &md, &AmfConfig::default()).unwrap();
        assert!(loss.abs() < 1e-15, "{loss}");
    }

    #[test]
    fn cosine_term_is_scale_invariant() {
        // C_hat = 2 * C entrywise (every entry overestimated, uniform mask)
        let c = [0.1f32, 0.2, 0.3];
        let chat = [0.2, 0.4, 0.6];
        let t = locality_term(&c, &chat, 1.0, 9.0, 0.0, None);
        assert!(t.value.abs() < 1e-15, "{}", t.value);
    }

    #[test]
    fn zero_row_keeps_only_mae() {
        let md = model(&[&[1.0], &[1.0]], &[&[0.5, 0.5, 0.5]]);
        let c = data(&[&[0.0, 0.0, 0.0], &[0.5, 0.5, 0.5]], 3);
        let cfg = AmfConfig {
            gamma: 2.0,
            ..Default::default()
        };
        let loss = amf_loss(&c, &md, &cfg).unwrap();
        assert!((loss - 2.0 * 0.5).abs() < 1e-12);
    }

    #[test]
    fn ratio_counts_only_overestimation() {
        let md = model(&[&[1.0]], &[&[0.5, 0.5, 0.0]]);
        let c = data(&[&[0.25, 1.0, 0.0]], 3);
        // errors: +0.25 over, -0.5 under
        assert!((overestimation_ratio(&c, &md) - 0.25 / 0.75).abs() < 1e-7);
    }

    #[test]
    fn zero_presence_routes_nothing_to_other_modules() {
        // both presences zero: argmax is module 0, module 1 gets no gradient
        let md = model(&[&[0.0, 0.0]], &[&[0.5, 0.5, 0.5], &[0.2, 0.2, 0.2]]);
        let c = data(&[&[0.3, 0.6, 0.9]], 3);
        let g = loss_gradients(&c, &md, &AmfConfig::default(), &[0]).unwrap();
        assert!(g.modules.row(1).iter().all(|&v| v == 0.0));
        assert_eq!(g.presences.get(0, 1), 0.0);
        assert!(g.presences.get(0, 0) < 0.0);
    }

    #[test]
    fn norm_weight_conventions() {
        let c = data(&[&[0.0, 0.0, 0.0], &[0.3, 0.4, 0.0]], 3);
        assert_eq!(norm_weights(&c), vec![0.0, 1.0]);
        let c = data(&[&[0.3, 0.4, 0.0], &[0.6, 0.8, 0.0]], 3);
        let w = norm_weights(&c);
        assert!((w[0] - 0.5).abs() < 1e-7 && (w[1] - 2.0).abs() < 1e-6);
    }
}
