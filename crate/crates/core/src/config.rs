//! Pipeline configuration and its plain-text `key=value` grammar.
//!
//! One pair per line, surrounding whitespace ignored, blank lines and lines
//! starting with `#` skipped, trailing `# ...` comments stripped. Keys are
//! case-sensitive. Every key is optional; see [`PipelineConfig::default`]
//! for the defaults. `n` and `o` have no default and must be present for any
//! stage that builds localities.
//!
//! | key                  | meaning                                         | default |
//! |----------------------|-------------------------------------------------|---------|
//! | `n`                  | locality / neighborhood size                    | none    |
//! | `o`                  | locality overlap factor                         | none    |
//! | `seed`               | root RNG seed                                   | 0       |
//! | `direct_budget`      | DIRECT objective evaluations                    | 40      |
//! | `direct_epsilon`     | DIRECT potential-optimality epsilon             | 1e-4    |
//! | `search_half_width`  | alpha/beta box half width, `auto` = 2 x latent dim | auto |
//! | `kmeans_max_iters`   | Lloyd iterations per weighted k-means           | 300     |
//! | `kmeans_restarts`    | k-means++ restarts, best inertia kept           | 1       |
//! | `filter_threshold`   | constant-value fraction above which pairs are zeroed | 0.75 |
//! | `memory_budget_mb`   | correlation matrix size that triggers a warning | 1024    |
//! | `num_modules`        | modules for a single extraction                 | 9       |
//! | `nu`                 | overestimation up-weight                        | 9       |
//! | `gamma`              | MAE scale regularization weight                 | 0.0001  |
//! | `batch_size`         | localities per minibatch                        | 64      |
//! | `improvement_tol`    | relative improvement counted as progress        | 0.01    |
//! | `patience_epochs`    | epochs without progress before stopping         | 100     |
//! | `max_epochs`         | hard epoch cap                                  | 20000   |
//! | `learning_rate`      | Adam step size                                  | 0.001   |
//! | `beta1`, `beta2`     | Adam moment decays                              | 0.9, 0.999 |
//! | `adam_epsilon`       | Adam denominator epsilon                        | 1e-8    |
//! | `num_runs`           | AMF runs per candidate module count             | 10      |
//! | `candidates`         | comma-separated module counts to compare        | `num_modules` |
//! | `medoid_restarts`    | k-medoids restarts                              | 5       |
//! | `chosen_modules`     | module count to keep, `auto` = default rule     | auto    |
//! | `tau`                | presence fine-tuning quantile                   | 0.1     |
//! | `presence_floor`     | minimum summed presence for entropy stats       | 0.5     |
//! | `presence_threshold` | presence above which a module counts as present | 0.01    |
//! | `feature_cutoff`     | fraction of the top feature sum kept in rankings | 0.05   |
//! | `exponent`           | heatmap line exponent                           | 3       |
//! | `line_threshold`     | minimum exponentiated value drawn as a line     | 0.1     |

use std::path::Path;
use std::str::FromStr;

use serde::Serialize;

use crate::amf::AmfConfig;
use crate::error::{LavaError, Result};
use crate::placement::PlacementConfig;
use crate::render::RenderSpec;
use crate::rng::derive_seed;
use crate::selection::SelectionConfig;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisConfig {
    pub presence_floor: f64,
    pub presence_threshold: f64,
    pub feature_cutoff: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            presence_floor: 0.5,
            presence_threshold: 0.01,
            feature_cutoff: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineConfig {
    pub neighborhood_size: Option<usize>,
    pub overlap: Option<f64>,
    pub seed: u64,
    pub placement: PlacementConfig,
    pub filter_threshold: f64,
    pub memory_budget_mb: f64,
    pub amf: AmfConfig,
    pub selection: SelectionConfig,
    pub tau: f64,
    pub analysis: AnalysisConfig,
    pub render: RenderSpec,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let mut cfg = PipelineConfig {
            neighborhood_size: None,
            overlap: None,
            seed: 0,
            placement: PlacementConfig::default(),
            filter_threshold: 0.75,
            memory_budget_mb: 1024.0,
            amf: AmfConfig::default(),
            selection: SelectionConfig::default(),
            tau: 0.1,
            analysis: AnalysisConfig::default(),
            render: RenderSpec::default(),
        };
        cfg.set_seed(0);
        cfg
    }
}

impl PipelineConfig {
    /// Sets the root seed and re-derives every stage seed from it.
    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.placement.seed = derive_seed(seed, "placement", 0);
        self.amf.seed = derive_seed(seed, "amf", 0);
        self.selection.seed = derive_seed(seed, "selection", 0);
    }

    pub fn neighborhood_size(&self) -> Result<usize> {
        self.neighborhood_size
            .ok_or_else(|| LavaError::Config("`n` (neighborhood size) is required".into()))
    }

    pub fn overlap(&self) -> Result<f64> {
        self.overlap
            .ok_or_else(|| LavaError::Config("`o` (overlap factor) is required".into()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = PipelineConfig::default();
        let mut seed = None;
        let mut candidates_set = false;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| LavaError::Config(format!("line {}: expected key=value", lineno + 1)))?;
            let key = key.trim();
            let value = value.trim();
            match key {
                "n" => cfg.neighborhood_size = Some(parse_num(key, value)?),
                "o" => cfg.overlap = Some(parse_num(key, value)?),
                "seed" => seed = Some(parse_num(key, value)?),
                "direct_budget" => cfg.placement.direct_budget = parse_num(key, value)?,
                "direct_epsilon" => cfg.placement.direct_epsilon = parse_num(key, value)?,
                "search_half_width" => {
                    cfg.placement.search_half_width = if value == "auto" {
                        None
                    } else {
                        Some(parse_num(key, value)?)
                    }
                }
                "kmeans_max_iters" => cfg.placement.kmeans_max_iters = parse_num(key, value)?,
                "kmeans_restarts" => cfg.placement.kmeans_restarts = parse_num(key, value)?,
                "filter_threshold" => cfg.filter_threshold = parse_num(key, value)?,
                "memory_budget_mb" => cfg.memory_budget_mb = parse_num(key, value)?,
                "num_modules" => cfg.amf.num_modules = parse_num(key, value)?,
                "nu" => cfg.amf.nu = parse_num(key, value)?,
                "gamma" => cfg.amf.gamma = parse_num(key, value)?,
                "batch_size" => cfg.amf.batch_size = parse_num(key, value)?,
                "improvement_tol" => cfg.amf.improvement_tol = parse_num(key, value)?,
                "patience_epochs" => cfg.amf.patience_epochs = parse_num(key, value)?,
                "max_epochs" => cfg.amf.max_epochs = parse_num(key, value)?,
                "learning_rate" => cfg.amf.adam.learning_rate = parse_num(key, value)?,
                "beta1" => cfg.amf.adam.beta1 = parse_num(key, value)?,
                "beta2" => cfg.amf.adam.beta2 = parse_num(key, value)?,
                "adam_epsilon" => cfg.amf.adam.epsilon = parse_num(key, value)?,
                "num_runs" => cfg.selection.num_runs = parse_num(key, value)?,
                "candidates" => {
                    cfg.selection.candidate_module_counts = value
                        .split(',')
                        .map(|v| parse_num(key, v.trim()))
                        .collect::<Result<_>>()?;
                    candidates_set = true;
                }
                "medoid_restarts" => cfg.selection.medoid_restarts = parse_num(key, value)?,
                "chosen_modules" => {
                    cfg.selection.chosen_module_count = if value == "auto" {
                        None
                    } else {
                        Some(parse_num(key, value)?)
                    }
                }
                "tau" => cfg.tau = parse_num(key, value)?,
                "presence_floor" => cfg.analysis.presence_floor = parse_num(key, value)?,
                "presence_threshold" => cfg.analysis.presence_threshold = parse_num(key, value)?,
                "feature_cutoff" => cfg.analysis.feature_cutoff = parse_num(key, value)?,
                "exponent" => cfg.render.exponent = parse_num(key, value)?,
                "line_threshold" => cfg.render.line_threshold = parse_num(key, value)?,
                other => return Err(LavaError::Config(format!("unknown key `{other}`"))),
            }
        }
        if !candidates_set {
            cfg.selection.candidate_module_counts = vec![cfg.amf.num_modules];
        }
        cfg.set_seed(seed.unwrap_or(0));
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        fn check(ok: bool, msg: &str) -> Result<()> {
            if ok {
                Ok(())
            } else {
                Err(LavaError::Config(msg.to_string()))
            }
        }
        if let Some(n) = self.neighborhood_size {
            check(n >= 1, "n must be at least 1")?;
        }
        if let Some(o) = self.overlap {
            check(o > 0.0 && o.is_finite(), "o must be positive")?;
        }
        check(self.placement.direct_budget >= 1, "direct_budget must be at least 1")?;
        check(self.placement.direct_epsilon > 0.0, "direct_epsilon must be positive")?;
        if let Some(h) = self.placement.search_half_width {
            check(h > 0.0 && h.is_finite(), "search_half_width must be positive")?;
        }
        check(
            self.placement.kmeans_max_iters >= 1,
            "kmeans_max_iters must be at least 1",
        )?;
        check(
            self.placement.kmeans_restarts >= 1,
            "kmeans_restarts must be at least 1",
        )?;
        check(
            self.filter_threshold > 0.0 && self.filter_threshold <= 1.0,
            "filter_threshold must be in (0, 1]",
        )?;
        check(self.memory_budget_mb > 0.0, "memory_budget_mb must be positive")?;
        self.amf.validate().map_err(to_config)?;
        self.selection.validate().map_err(to_config)?;
        check(self.tau > 0.0 && self.tau < 1.0, "tau must be in (0, 1)")?;
        check(
            self.analysis.presence_floor >= 0.0,
            "presence_floor must be non-negative",
        )?;
        check(
            self.analysis.presence_threshold >= 0.0,
            "presence_threshold must be non-negative",
        )?;
        check(
            self.analysis.feature_cutoff > 0.0 && self.analysis.feature_cutoff <= 1.0,
            "feature_cutoff must be in (0, 1]",
        )?;
        self.render.validate().map_err(to_config)?;
        Ok(())
    }
}

fn to_config(e: LavaError) -> LavaError {
    match e {
        LavaError::Param(m) => LavaError::Config(m),
        other => other,
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| LavaError::Config(format!("`{key}`: cannot parse `{value}`")))
}

pub fn load_config(path: impl AsRef<Path>) -> Result<PipelineConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| LavaError::io(path, e))?;
    PipelineConfig::parse(&text)
}
