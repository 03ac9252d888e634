//! Command-line front end. Every subcommand reads and writes files, so
//! `pipeline` is exactly the chain of the individual stages.
//!
//! Exit codes: 0 on success, 1 for usage, parameter and configuration
//! errors, 2 for data and I/O errors. Progress goes to standard error as
//! `stage=<name> key=value ...` lines.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::{info, warn};

use crate::amf::{fine_tune_presences, fit, AmfModel, MODEL_META_FILE};
use crate::analysis::{
    locality_similarity, metadata_association, module_feature_ranking, presence_entropy, presence_weighted_average,
    ranking_to_delimited,
};
use crate::config::{load_config, PipelineConfig};
use crate::correlation::{locality_correlations, memory_warning, CorrelationDataset};
use crate::error::{LavaError, Result};
use crate::io::{self, load_embeddings, load_features, load_labels, write_json};
use crate::neighbors::{centrality_profile, knn_self, neighborhood_jaccard};
use crate::placement::{optimize_placement, LocalitySet, REPORT_FILE};
use crate::render::{render_grid_heatmap, render_pair_bars, render_presence_scatter, GridLayout};
use crate::selection::select_modules;

pub const SELECTION_FILE: &str = "selection.json";
pub const ENTROPY_FILE: &str = "entropy.json";
pub const RANKINGS_FILE: &str = "rankings.json";
pub const WEIGHTED_AVERAGES_FILE: &str = "weighted_averages.json";
pub const METADATA_FILE: &str = "metadata.json";
pub const SIMILARITY_FILE: &str = "similarity.json";

/// Bars shown for data without a grid layout.
const BAR_CHART_PAIRS: usize = 30;

#[derive(Debug, Parser)]
#[command(name = "lava", version, about = "Locality-based explanations of latent embeddings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// key=value configuration file; defaults apply when omitted
    #[arg(long)]
    config: Option<PathBuf>,
    /// Root seed, overriding the configuration
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn load(&self) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(p) => load_config(p)?,
            None => PipelineConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.set_seed(s);
        }
        Ok(cfg)
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Place localities over an embedding
    Place {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute per-locality feature correlations
    Correlate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        features: PathBuf,
        /// Directory written by `place`
        #[arg(long)]
        localities: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit one AMF model
    Extract {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        correlations: PathBuf,
        /// Module count, overriding `num_modules`
        #[arg(long)]
        modules: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare module counts over repeated runs and keep the chosen model
    Select {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        correlations: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-fit presences under the pinball loss with modules frozen
    Finetune {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        correlations: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// Quantile, overriding `tau`
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Entropy, rankings, weighted averages and optional metadata association
    Analyze {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        correlations: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Directory written by `place`, needed with --labels
        #[arg(long)]
        localities: Option<PathBuf>,
        #[arg(long, requires = "target", requires = "localities")]
        labels: Option<PathBuf>,
        /// Label value whose per-locality share is correlated with presences
        #[arg(long)]
        target: Option<String>,
        /// Locality to compare all others against
        #[arg(long)]
        reference: Option<usize>,
    },
    /// Draw a module as a grid heatmap (or pair bars), or its presences as a scatter
    Render {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        module: usize,
        /// Output SVG path
        #[arg(long)]
        out: PathBuf,
        /// Feature grid as HxW; without it pairs are drawn as a bar chart
        #[arg(long)]
        grid: Option<String>,
        /// Correlation directory, used for feature names in bar charts
        #[arg(long)]
        correlations: Option<PathBuf>,
        /// Draw presences over the embedding instead (needs --localities)
        #[arg(long, requires = "localities")]
        embeddings: Option<PathBuf>,
        #[arg(long)]
        localities: Option<PathBuf>,
    },
    /// Run every stage, writing each stage's output to a subdirectory
    Pipeline {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        grid: Option<String>,
        #[arg(long, requires = "target")]
        labels: Option<PathBuf>,
        #[arg(long)]
        target: Option<String>,
    },
    /// Neighborhood retention between original and latent space
    Jaccard {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        embeddings: PathBuf,
        /// Comma-separated neighborhood sizes
        #[arg(long, value_delimiter = ',', required = true)]
        sizes: Vec<usize>,
        /// Samples queried; all when omitted
        #[arg(long)]
        sample_cap: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Parses `argv` (including the program name), runs the subcommand and
/// returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Place {
            common,
            embeddings,
            out,
        } => place(&common.load()?, &embeddings, &out),
        Command::Correlate {
            common,
            features,
            localities,
            out,
        } => correlate(&common.load()?, &features, &localities, &out),
        Command::Extract {
            common,
            correlations,
            modules,
            out,
        } => {
            let mut cfg = common.load()?;
            if let Some(m) = modules {
                cfg.amf.num_modules = m;
            }
            extract(&cfg, &correlations, &out)
        }
        Command::Select {
            common,
            correlations,
            out,
        } => select(&common.load()?, &correlations, &out),
        Command::Finetune {
            common,
            correlations,
            model,
            tau,
            out,
        } => {
            let mut cfg = common.load()?;
            if let Some(t) = tau {
                cfg.tau = t;
            }
            finetune(&cfg, &correlations, &model, &out)
        }
        Command::Analyze {
            common,
            correlations,
            model,
            out,
            localities,
            labels,
            target,
            reference,
        } => {
            let meta = match (labels, localities, target) {
                (Some(l), Some(loc), Some(t)) => Some(MetadataInputs {
                    labels: l,
                    localities: loc,
                    target: t,
                }),
                _ => None,
            };
            analyze(&common.load()?, &correlations, &model, &out, meta.as_ref(), reference)
        }
        Command::Render {
            common,
            model,
            module,
            out,
            grid,
            correlations,
            embeddings,
            localities,
        } => {
            let cfg = common.load()?;
            match (embeddings, localities) {
                (Some(e), Some(l)) => render_scatter(&model, module, &e, &l, &out),
                _ => render_module(&cfg, &model, module, grid.as_deref(), correlations.as_deref(), &out),
            }
        }
        Command::Pipeline {
            common,
            embeddings,
            features,
            out,
            grid,
            labels,
            target,
        } => {
            let meta = labels.zip(target);
            pipeline(&common.load()?, &embeddings, &features, &out, grid.as_deref(), meta)
        }
        Command::Jaccard {
            common,
            features,
            embeddings,
            sizes,
            sample_cap,
            out,
        } => jaccard(&common.load()?, &features, &embeddings, &sizes, sample_cap, &out),
    }
}

/// Places localities and writes probes, members and the placement report.
pub fn place(cfg: &PipelineConfig, embeddings: &Path, out: &Path) -> Result<()> {
    let e = load_embeddings(embeddings)?;
    let n = cfg.neighborhood_size()?;
    if n >= e.num_samples() {
        return Err(LavaError::param(format!(
            "n must be smaller than the number of samples (n = {n}, E = {})",
            e.num_samples()
        )));
    }
    info!(
        "stage=place event=start samples={} dim={} n={n}",
        e.num_samples(),
        e.dim()
    );
    let profile = centrality_profile(&knn_self(e.matrix(), n)?);
    let (loc, report) = optimize_placement(&e, &profile, cfg)?;
    loc.save(out)?;
    write_json(&report, out.join(REPORT_FILE))?;
    info!(
        "stage=place event=done ell={} alpha={} beta={} loss={}",
        report.ell, report.best_alpha, report.best_beta, report.best_loss
    );
    Ok(())
}

pub fn correlate(cfg: &PipelineConfig, features: &Path, localities: &Path, out: &Path) -> Result<()> {
    let f = load_features(features)?;
    let loc = LocalitySet::load(localities)?;
    loc.check_samples(f.num_samples())?;
    if let Some(w) = memory_warning(loc.ell(), f.num_features(), cfg.memory_budget_mb) {
        warn!("stage=correlate event=memory {w}");
    }
    info!(
        "stage=correlate event=start ell={} features={}",
        loc.ell(),
        f.num_features()
    );
    let c = locality_correlations(&f, &loc, cfg.filter_threshold)?;
    c.save(out)?;
    info!("stage=correlate event=done pairs={}", c.num_pairs());
    Ok(())
}

pub fn extract(cfg: &PipelineConfig, correlations: &Path, out: &Path) -> Result<()> {
    let c = CorrelationDataset::load(correlations)?;
    info!("stage=extract event=start modules={}", cfg.amf.num_modules);
    let run = fit(&c, &cfg.amf)?;
    run.model.save(out, &run.metadata(&cfg.amf))?;
    info!(
        "stage=extract event=done epochs={} loss={} overestimation={}",
        run.epochs_run, run.final_loss, run.overestimation_ratio
    );
    Ok(())
}

/// Writes the selection report and the lowest-loss model of the chosen count.
pub fn select(cfg: &PipelineConfig, correlations: &Path, out: &Path) -> Result<()> {
    let c = CorrelationDataset::load(correlations)?;
    let mut sel = cfg.selection.clone();
    if sel.candidate_module_counts.is_empty() {
        sel.candidate_module_counts = vec![cfg.amf.num_modules];
    }
    info!(
        "stage=select event=start runs={} candidates={:?}",
        sel.num_runs, sel.candidate_module_counts
    );
    let (report, best) = select_modules(&c, &sel, &cfg.amf)?;
    let idx = sel
        .candidate_module_counts
        .iter()
        .position(|&m| m == report.chosen_module_count)
        .expect("chosen count is a candidate");
    let amf = crate::amf::AmfConfig {
        num_modules: report.chosen_module_count,
        seed: sel.run_seed(report.chosen_module_count, report.chosen_run),
        ..cfg.amf.clone()
    };
    best[idx].model.save(out, &best[idx].metadata(&amf))?;
    write_json(&report, out.join(SELECTION_FILE))?;
    info!(
        "stage=select event=done chosen={} run={}",
        report.chosen_module_count, report.chosen_run
    );
    Ok(())
}

pub fn finetune(cfg: &PipelineConfig, correlations: &Path, model: &Path, out: &Path) -> Result<()> {
    let c = CorrelationDataset::load(correlations)?;
    let m = AmfModel::load(model)?;
    let meta: crate::amf::ModelMetadata = io::read_json(model.join(MODEL_META_FILE))?;
    info!("stage=finetune event=start tau={}", cfg.tau);
    let tuned = fine_tune_presences(&c, &m, cfg.tau, &cfg.amf)?;
    let meta = crate::amf::ModelMetadata {
        overestimation_ratio: crate::amf::overestimation_ratio(&c, &tuned),
        cosine_similarity_mean: crate::amf::cosine_similarity_mean(&c, &tuned, meta.config.nu),
        ..meta
    };
    tuned.save(out, &meta)?;
    info!("stage=finetune event=done overestimation={}", meta.overestimation_ratio);
    Ok(())
}

pub struct MetadataInputs {
    pub labels: PathBuf,
    pub localities: PathBuf,
    pub target: String,
}

#[derive(serde::Serialize)]
struct Keyed<T> {
    schema_version: u32,
    modules: Vec<T>,
}

#[derive(serde::Serialize)]
struct WeightedAverage {
    module: usize,
    /// `None` when the module has no presence anywhere.
    values: Option<Vec<f64>>,
    cosine_to_module: Option<f64>,
}

#[derive(serde::Serialize)]
struct Similarity {
    schema_version: u32,
    reference: usize,
    similarity: Vec<f64>,
}

pub fn analyze(
    cfg: &PipelineConfig,
    correlations: &Path,
    model: &Path,
    out: &Path,
    metadata: Option<&MetadataInputs>,
    reference: Option<usize>,
) -> Result<()> {
    let c = CorrelationDataset::load(correlations)?;
    let m = AmfModel::load(model)?;
    m.check_data(&c)?;
    let a = &cfg.analysis;
    info!("stage=analyze event=start modules={}", m.num_modules());
    io::ensure_dir(out)?;

    let entropy = presence_entropy(&m, a.presence_floor);
    if entropy.empty {
        warn!("stage=analyze event=entropy no locality reaches the presence floor");
    }
    write_json(&entropy, out.join(ENTROPY_FILE))?;

    let mut rankings = Vec::new();
    let mut averages = Vec::new();
    for module in 0..m.num_modules() {
        let r = module_feature_ranking(&m, module, &c.feature_names, a.feature_cutoff)?;
        std::fs::write(out.join(format!("ranking_{module}.csv")), ranking_to_delimited(&r))
            .map_err(|e| LavaError::io(out.join(format!("ranking_{module}.csv")), e))?;
        rankings.push(r);
        let avg = presence_weighted_average(&c, &m, module).ok();
        let cos = avg
            .as_ref()
            .map(|v| crate::matrix::cosine_similarity(v, m.modules.row(module)));
        averages.push(WeightedAverage {
            module,
            values: avg,
            cosine_to_module: cos,
        });
    }
    write_json(
        &Keyed {
            schema_version: 1,
            modules: rankings,
        },
        out.join(RANKINGS_FILE),
    )?;
    write_json(
        &Keyed {
            schema_version: 1,
            modules: averages,
        },
        out.join(WEIGHTED_AVERAGES_FILE),
    )?;

    if let Some(md) = metadata {
        let labels = load_labels(&md.labels)?;
        let loc = LocalitySet::load(&md.localities)?;
        let assoc = metadata_association(&m, &labels, &loc, &md.target, a.presence_threshold)?;
        write_json(&assoc, out.join(METADATA_FILE))?;
    }
    if let Some(r) = reference {
        let s = locality_similarity(&c, r, None)?;
        write_json(
            &Similarity {
                schema_version: 1,
                reference: r,
                similarity: s,
            },
            out.join(SIMILARITY_FILE),
        )?;
    }
    info!("stage=analyze event=done");
    Ok(())
}

fn check_module(m: &AmfModel, module: usize) -> Result<()> {
    if module >= m.num_modules() {
        return Err(LavaError::param(format!(
            "module {module} out of range ({} modules)",
            m.num_modules()
        )));
    }
    Ok(())
}

pub fn render_module(
    cfg: &PipelineConfig,
    model: &Path,
    module: usize,
    grid: Option<&str>,
    correlations: Option<&Path>,
    out: &Path,
) -> Result<()> {
    let m = AmfModel::load(model)?;
    check_module(&m, module)?;
    let row = m.modules.row(module);
    match grid {
        Some(g) => {
            let layout: GridLayout = g.parse()?;
            let d = crate::correlation::PairIndex::new(layout.num_features());
            if d.len() != row.len() {
                return Err(LavaError::param(format!(
                    "grid {g} has {} cells, which does not match the model's {} pairs",
                    layout.num_features(),
                    row.len()
                )));
            }
            render_grid_heatmap(row, layout, &cfg.render, out)
        }
        None => {
            let names = match correlations {
                Some(dir) => CorrelationDataset::load(dir)?.feature_names,
                None => {
                    let d = (1..).find(|&d| d * (d - 1) / 2 >= row.len()).unwrap_or(2);
                    (0..d).map(|j| format!("f{j}")).collect()
                }
            };
            render_pair_bars(row, &names, &cfg.render, BAR_CHART_PAIRS, out)
        }
    }
}

pub fn render_scatter(model: &Path, module: usize, embeddings: &Path, localities: &Path, out: &Path) -> Result<()> {
    let m = AmfModel::load(model)?;
    check_module(&m, module)?;
    let e = load_embeddings(embeddings)?;
    let loc = LocalitySet::load(localities)?;
    loc.check_samples(e.num_samples())?;
    render_presence_scatter(&e, &loc, &m.presences.column(module), out)
}

/// Subdirectories written by [`pipeline`].
pub mod layout {
    pub const LOCALITIES: &str = "localities";
    pub const CORRELATIONS: &str = "correlations";
    pub const SELECTION: &str = "selection";
    pub const FINETUNED: &str = "finetuned";
    pub const ANALYSIS: &str = "analysis";
    pub const FIGURES: &str = "figures";
}

pub fn pipeline(
    cfg: &PipelineConfig,
    embeddings: &Path,
    features: &Path,
    out: &Path,
    grid: Option<&str>,
    metadata: Option<(PathBuf, String)>,
) -> Result<()> {
    use layout::*;
    if let Some(g) = grid {
        // fail before any work is done
        let layout: GridLayout = g.parse()?;
        layout.check_features(load_features(features)?.num_features())?;
    }
    let loc = out.join(LOCALITIES);
    let corr = out.join(CORRELATIONS);
    let sel = out.join(SELECTION);
    place(cfg, embeddings, &loc)?;
    correlate(cfg, features, &loc, &corr)?;
    select(cfg, &corr, &sel)?;
    finetune(cfg, &corr, &sel, &out.join(FINETUNED))?;
    let md = metadata.map(|(labels, target)| MetadataInputs {
        labels,
        localities: loc.clone(),
        target,
    });
    analyze(cfg, &corr, &sel, &out.join(ANALYSIS), md.as_ref(), None)?;
    let figs = out.join(FIGURES);
    let modules = AmfModel::load(&sel)?.num_modules();
    for module in 0..modules {
        render_module(
            cfg,
            &sel,
            module,
            grid,
            Some(&corr),
            &figs.join(format!("module_{module}.svg")),
        )?;
        render_scatter(
            &sel,
            module,
            embeddings,
            &loc,
            &figs.join(format!("presence_{module}.svg")),
        )?;
    }
    info!("stage=pipeline event=done out={}", out.display());
    Ok(())
}

pub fn jaccard(
    cfg: &PipelineConfig,
    features: &Path,
    embeddings: &Path,
    sizes: &[usize],
    sample_cap: Option<usize>,
    out: &Path,
) -> Result<()> {
    let f = load_features(features)?;
    let e = load_embeddings(embeddings)?;
    let cap = sample_cap.unwrap_or(e.num_samples());
    let seed = crate::rng::derive_seed(cfg.seed, "jaccard", 0);
    let points = neighborhood_jaccard(&f, &e, sizes, cap, seed)?;
    #[derive(serde::Serialize)]
    struct Report {
        schema_version: u32,
        sample_cap: usize,
        points: Vec<crate::neighbors::JaccardPoint>,
    }
    write_json(
        &Report {
            schema_version: 1,
            sample_cap: cap,
            points,
        },
        out,
    )
}
