use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::config::RunConfig;
use super::tables::{read_table, write_table, AblationRow, FoldRow, ModelSummary, SummaryRow};
use super::{Manifest, Pipeline, Stage};
use crate::datagen::{generate as generate_tables, read_tables, write_tables};
use crate::error::{Error, Result};
use crate::evalstat::{compare_models, make_folds, make_splits, mean_std, FoldMetrics, Splits, StatReport};
use crate::featurize::{
    apply_scalers, assemble, featurize_cohort, fit_scalers, load_block, save_block, BlockKind,
    FeatureBlock, FeatureManifest, LabVocab, MockEmbedder, Selection,
};
use crate::ingest::Cohort;
use crate::matrix::Matrix;
use crate::models::{train_dense, train_sage, write_grid_csv, grid_search, GridRow, Model, TrainResult};
use crate::neuro::save_checkpoint;
use crate::par;
use crate::simgraph::{graph_stats, load_graph, range_search, save_graph};

/// Model names in report order.
pub const MODEL_NAMES: [&str; 3] = ["GraphSAGE", "MLP", "LR"];

const COHORT_FILE: &str = "cohort.csv";
const NODES_FILE: &str = "nodes.csv";
const SPLITS_FILE: &str = "splits.json";
const FEATURES_FILE: &str = "features.emb";
const FEATURES_MANIFEST: &str = "features.json";
const BLOCKS_DIR: &str = "blocks";
const GRAPH_FILE: &str = "graph.cggr";
const STATS_FILE: &str = "stats.json";
const METRICS_FILE: &str = "metrics.csv";
const SUMMARY_FILE: &str = "summary.json";
const REPORT_FILE: &str = "report.json";

pub(super) struct Context<'a> {
    pub config: &'a RunConfig,
    pub dir: &'a Path,
    pub config_hash: &'a str,
    pub pipeline: &'a Pipeline,
}

impl Context<'_> {
    fn upstream(&self, stage: Stage) -> std::path::PathBuf {
        self.pipeline.stage_dir(stage)
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    serde_json::from_slice(&fs::read(path)?).map_err(|e| Error::Corruption {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

/// Node order shared by every artifact after featurization.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NodeTable {
    pub admission_ids: Vec<u64>,
    pub patient_ids: Vec<u64>,
    pub labels: Vec<bool>,
}

#[derive(Serialize, Deserialize)]
struct NodeRow {
    admission_id: u64,
    patient_id: u64,
    label: u8,
}

impl NodeTable {
    pub fn from_cohort(cohort: &Cohort) -> NodeTable {
        NodeTable {
            admission_ids: cohort.admission_ids(),
            patient_ids: cohort.records.iter().map(|r| r.patient_id).collect(),
            labels: cohort.labels(),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    fn write(&self, path: &Path, config_hash: &str) -> Result<()> {
        let rows: Vec<NodeRow> = (0..self.len())
            .map(|i| NodeRow {
                admission_id: self.admission_ids[i],
                patient_id: self.patient_ids[i],
                label: self.labels[i] as u8,
            })
            .collect();
        write_table(path, config_hash, &rows)
    }

    pub fn read(path: &Path) -> Result<NodeTable> {
        let mut t = NodeTable::default();
        for r in read_table::<NodeRow>(path)? {
            t.admission_ids.push(r.admission_id);
            t.patient_ids.push(r.patient_id);
            t.labels.push(r.label != 0);
        }
        Ok(t)
    }
}

pub(super) fn generate(ctx: &Context) -> Result<()> {
    let tables = generate_tables(&ctx.config.gen_config())?;
    write_tables(&tables, ctx.dir)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CohortSummary {
    admissions: usize,
    patients: usize,
    positives: usize,
    positive_rate: f64,
}

pub(super) fn ingest(ctx: &Context) -> Result<()> {
    let tables = read_tables(&ctx.upstream(Stage::Generate))?;
    let cohort = Cohort::from_tables(&tables)?;
    if cohort.is_empty() {
        return Err(Error::Integrity("cohort is empty after filtering".into()));
    }
    cohort.write_csv(&ctx.dir.join(COHORT_FILE))?;
    let summary = CohortSummary {
        admissions: cohort.len(),
        patients: cohort.patients.len(),
        positives: cohort.positive_count(),
        positive_rate: cohort.positive_count() as f64 / cohort.len() as f64,
    };
    write_json(&ctx.dir.join(SUMMARY_FILE), &summary)
}

/// Replaces text blocks with precomputed embeddings where files exist.
fn apply_precomputed(blocks: &mut [FeatureBlock], dir: &Path, ids: &[u64]) -> Result<()> {
    for block in blocks.iter_mut() {
        if block.kind.is_min_max() {
            continue;
        }
        let emb = dir.join(format!("{}.emb", block.kind));
        let idf = dir.join(format!("{}.ids", block.kind));
        if emb.exists() {
            log::info!("featurize: using precomputed {}", emb.display());
            *block = load_block(block.kind, &emb, &idf, ids)?;
        }
    }
    Ok(())
}

pub(super) fn featurize(ctx: &Context) -> Result<()> {
    let cfg = ctx.config;
    let tables = read_tables(&ctx.upstream(Stage::Generate))?;
    let cohort = Cohort::read_csv(&ctx.upstream(Stage::Ingest).join(COHORT_FILE))?;
    let embedder = MockEmbedder::new(cfg.features.embed_dim, cfg.seed);
    let vocab = LabVocab::synthetic(cfg.generate.n_lab_items);
    let mut feats = featurize_cohort(&tables, &cohort, &embedder, &vocab)?;
    if let Some(dir) = &cfg.features.precomputed_dir {
        apply_precomputed(&mut feats.blocks, dir, &feats.ids)?;
    }
    let blocks_dir = ctx.dir.join(BLOCKS_DIR);
    for b in &feats.blocks {
        save_block(&blocks_dir, b.kind.name(), &b.matrix, &feats.ids)?;
    }
    let nodes = NodeTable::from_cohort(&cohort);
    nodes.write(&ctx.dir.join(NODES_FILE), ctx.config_hash)?;
    let splits = make_splits(&nodes.patient_ids, &nodes.labels, &cfg.split_spec())?;
    write_json(&ctx.dir.join(SPLITS_FILE), &splits)?;

    let raw = feats.assemble(&cfg.features.selection)?;
    let scalers = fit_scalers(&raw, &splits.train)?;
    let scaled = apply_scalers(&raw, &scalers)?;
    scaled.matrix.save(&ctx.dir.join(FEATURES_FILE))?;
    let manifest = FeatureManifest {
        selection: cfg.features.selection.clone(),
        spans: scaled.spans.clone(),
        rows: scaled.rows(),
        cols: scaled.cols(),
        scaled: true,
        scalers: Some(scalers),
    };
    write_json(&ctx.dir.join(FEATURES_MANIFEST), &manifest)?;
    let missing: serde_json::Map<String, Value> = feats
        .blocks
        .iter()
        .map(|b| (b.kind.name().to_string(), json!(b.missing.iter().filter(|&&m| m).count())))
        .collect();
    write_json(
        &ctx.dir.join(SUMMARY_FILE),
        &json!({
            "rows": scaled.rows(),
            "cols": scaled.cols(),
            "missing_rows": missing,
            "lab_events_out_of_vocab": feats.lab_report.dropped_out_of_vocab,
            "split_sizes": [splits.train.len(), splits.val.len(), splits.test.len()],
        }),
    )
}

/// Scaled node features, node table and primary splits.
fn load_featurized(dir: &Path) -> Result<(Matrix, NodeTable, Splits)> {
    let x = Matrix::load(&dir.join(FEATURES_FILE))?;
    let nodes = NodeTable::read(&dir.join(NODES_FILE))?;
    let splits: Splits = read_json(&dir.join(SPLITS_FILE))?;
    if x.rows() != nodes.len() {
        return Err(Error::Alignment(format!(
            "{} feature rows but {} nodes",
            x.rows(),
            nodes.len()
        )));
    }
    Ok((x, nodes, splits))
}

fn load_blocks(dir: &Path, ids: &[u64]) -> Result<Vec<FeatureBlock>> {
    let blocks_dir = dir.join(BLOCKS_DIR);
    BlockKind::ALL
        .iter()
        .map(|&k| {
            load_block(
                k,
                &blocks_dir.join(format!("{k}.emb")),
                &blocks_dir.join(format!("{k}.ids")),
                ids,
            )
        })
        .collect()
}

pub(super) fn graph(ctx: &Context) -> Result<()> {
    let x = Matrix::load(&ctx.upstream(Stage::Featurize).join(FEATURES_FILE))?;
    let g = range_search(&x, ctx.config.tau())?;
    let stats = graph_stats(&g);
    log::info!(
        "graph: tau {} -> {} entries, average degree {:.4}",
        ctx.config.tau(),
        stats.edge_count,
        stats.average_degree
    );
    save_graph(&g, &ctx.dir.join(GRAPH_FILE))?;
    write_json(&ctx.dir.join(STATS_FILE), &json!({ "tau": g.tau(), "stats": stats }))
}

fn summarize(model: &str, r: &TrainResult) -> ModelSummary {
    ModelSummary {
        model: model.to_string(),
        best_epoch: r.best_epoch,
        stopped_epoch: r.stopped_epoch,
        val_auroc: r.val.auroc,
        val_bacc: r.val.bacc,
        test_auroc: r.test.auroc,
        test_bacc: r.test.bacc,
    }
}

#[derive(Serialize)]
struct HistoryRow<'a> {
    model: &'a str,
    epoch: usize,
    train_loss: f64,
    val_loss: f64,
    val_auroc: f64,
}

#[derive(Serialize)]
struct PredictionRow {
    admission_id: u64,
    label: u8,
    split: &'static str,
    graphsage: f64,
    mlp: f64,
    lr: f64,
}

pub(super) fn train(ctx: &Context) -> Result<()> {
    let cfg = ctx.config;
    let (x, nodes, splits) = load_featurized(&ctx.upstream(Stage::Featurize))?;
    let g = load_graph(&ctx.upstream(Stage::Graph).join(GRAPH_FILE))?;
    let labels = &nodes.labels;

    let (sage, r_sage) = train_sage(&cfg.sage_config(), &g, &x, labels, &splits)?;
    let (mlp, r_mlp) = train_dense(&cfg.dense_config(&cfg.baselines.mlp_hidden), &x, labels, &splits)?;
    let (lr, r_lr) = train_dense(&cfg.dense_config(&[]), &x, labels, &splits)?;

    save_checkpoint(&ctx.dir.join("graphsage"), &sage.describe(), sage.params())?;
    save_checkpoint(&ctx.dir.join("mlp"), &mlp.describe(), mlp.params())?;
    save_checkpoint(&ctx.dir.join("lr"), &lr.describe(), lr.params())?;

    let results = [&r_sage, &r_mlp, &r_lr];
    let summaries: Vec<ModelSummary> = MODEL_NAMES
        .iter()
        .zip(results)
        .map(|(name, r)| summarize(name, r))
        .collect();
    write_table(&ctx.dir.join(METRICS_FILE), ctx.config_hash, &summaries)?;

    let history: Vec<HistoryRow> = MODEL_NAMES
        .iter()
        .zip(results)
        .flat_map(|(name, r)| {
            r.history.iter().map(move |h| HistoryRow {
                model: name,
                epoch: h.epoch,
                train_loss: h.train_loss,
                val_loss: h.val_loss,
                val_auroc: h.val_auroc,
            })
        })
        .collect();
    write_table(&ctx.dir.join("history.csv"), ctx.config_hash, &history)?;

    let mut split_of = vec!["train"; nodes.len()];
    for &i in &splits.val {
        split_of[i] = "val";
    }
    for &i in &splits.test {
        split_of[i] = "test";
    }
    let preds: Vec<PredictionRow> = (0..nodes.len())
        .map(|i| PredictionRow {
            admission_id: nodes.admission_ids[i],
            label: nodes.labels[i] as u8,
            split: split_of[i],
            graphsage: r_sage.probabilities[i],
            mlp: r_mlp.probabilities[i],
            lr: r_lr.probabilities[i],
        })
        .collect();
    write_table(&ctx.dir.join("predictions.csv"), ctx.config_hash, &preds)
}

pub(super) fn grid(ctx: &Context) -> Result<()> {
    let (x, nodes, splits) = load_featurized(&ctx.upstream(Stage::Featurize))?;
    let g = load_graph(&ctx.upstream(Stage::Graph).join(GRAPH_FILE))?;
    let rows = grid_search(&ctx.config.grid_configs(), &g, &x, &nodes.labels, &splits)?;
    write_grid_csv(&rows, &ctx.dir.join("grid.csv"), ctx.config_hash)
}

pub(super) fn ablate(ctx: &Context) -> Result<()> {
    let cfg = ctx.config;
    let fdir = ctx.upstream(Stage::Featurize);
    let nodes = NodeTable::read(&fdir.join(NODES_FILE))?;
    let splits: Splits = read_json(&fdir.join(SPLITS_FILE))?;
    let blocks = load_blocks(&fdir, &nodes.admission_ids)?;
    let selections = Selection::ablations();
    let runs = par::map_slice(&selections, |sel| -> Result<AblationRow> {
        let raw = assemble(&blocks, &nodes.admission_ids, sel)?;
        let x = apply_scalers(&raw, &fit_scalers(&raw, &splits.train)?)?.matrix;
        let g = range_search(&x, cfg.tau())?;
        let (_, r) = train_sage(&cfg.sage_config(), &g, &x, &nodes.labels, &splits)?;
        log::info!("ablate: {} -> test auroc {:.4}", sel.label(), r.test.auroc);
        Ok(AblationRow {
            combination: sel.label(),
            auroc: r.test.auroc,
            bacc: r.test.bacc,
            val_auroc: r.val.auroc,
            val_bacc: r.val.bacc,
            n_features: x.cols(),
            average_degree: graph_stats(&g).average_degree,
        })
    });
    let mut rows = runs.into_iter().collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| b.auroc.total_cmp(&a.auroc));
    write_table(&ctx.dir.join("ablation.csv"), ctx.config_hash, &rows)
}

pub(super) fn crossval(ctx: &Context) -> Result<()> {
    let cfg = ctx.config;
    let fdir = ctx.upstream(Stage::Featurize);
    let nodes = NodeTable::read(&fdir.join(NODES_FILE))?;
    let blocks = load_blocks(&fdir, &nodes.admission_ids)?;
    let raw = assemble(&blocks, &nodes.admission_ids, &cfg.features.selection)?;
    let g = load_graph(&ctx.upstream(Stage::Graph).join(GRAPH_FILE))?;
    let plan = make_folds(&nodes.patient_ids, &nodes.labels, cfg.k_folds, cfg.seed)?;
    let mlp_cfg = cfg.dense_config(&cfg.baselines.mlp_hidden);
    let lr_cfg = cfg.dense_config(&[]);

    let per_fold = par::map_range(plan.k(), |f| -> Result<Vec<FoldRow>> {
        let splits = plan.round(f);
        // scalers are refit on each round's training folds
        let x = apply_scalers(&raw, &fit_scalers(&raw, &splits.train)?)?.matrix;
        let (_, s) = train_sage(&cfg.sage_config(), &g, &x, &nodes.labels, &splits)?;
        let (_, m) = train_dense(&mlp_cfg, &x, &nodes.labels, &splits)?;
        let (_, l) = train_dense(&lr_cfg, &x, &nodes.labels, &splits)?;
        log::info!(
            "crossval: fold {f} auroc graphsage {:.4} mlp {:.4} lr {:.4}",
            s.test.auroc,
            m.test.auroc,
            l.test.auroc
        );
        Ok(MODEL_NAMES
            .iter()
            .zip([s, m, l])
            .map(|(name, r)| FoldRow {
                fold: f,
                model: name.to_string(),
                auroc: r.test.auroc,
                bacc: r.test.bacc,
            })
            .collect())
    });
    let mut folds = vec![];
    for rows in per_fold {
        folds.extend(rows?);
    }
    write_table(&ctx.dir.join("folds.csv"), ctx.config_hash, &folds)?;

    let metrics: Vec<FoldMetrics> = MODEL_NAMES
        .iter()
        .map(|&name| {
            let rows: Vec<&FoldRow> = folds.iter().filter(|r| r.model == name).collect();
            FoldMetrics {
                model: name.to_string(),
                auroc: rows.iter().map(|r| r.auroc).collect(),
                bacc: rows.iter().map(|r| r.bacc).collect(),
            }
        })
        .collect();
    let summary: Vec<SummaryRow> = metrics
        .iter()
        .map(|m| {
            let (auroc_mean, auroc_std) = mean_std(&m.auroc);
            let (bacc_mean, bacc_std) = mean_std(&m.bacc);
            SummaryRow {
                model: m.model.clone(),
                auroc_mean,
                auroc_std,
                bacc_mean,
                bacc_std,
            }
        })
        .collect();
    write_table(&ctx.dir.join("summary.csv"), ctx.config_hash, &summary)?;

    let stats = compare_models(&metrics, cfg.crossval.paired)?;
    write_table(&ctx.dir.join("normality.csv"), ctx.config_hash, &stats.normality)?;
    write_table(&ctx.dir.join("ttest.csv"), ctx.config_hash, &stats.comparisons)?;
    write_json(&ctx.dir.join("stats.json"), &stats)
}

pub(super) fn report(ctx: &Context, deps: &[Stage]) -> Result<()> {
    let has = |s: Stage| deps.contains(&s);
    let cohort: Value = read_json(&ctx.upstream(Stage::Ingest).join(SUMMARY_FILE))?;
    let graph: Value = read_json(&ctx.upstream(Stage::Graph).join(STATS_FILE))?;
    let train: Vec<ModelSummary> = read_table(&ctx.upstream(Stage::Train).join(METRICS_FILE))?;
    let grid = if has(Stage::Grid) {
        let rows: Vec<GridRow> = read_table(&ctx.upstream(Stage::Grid).join("grid.csv"))?;
        json!({ "points": rows.len(), "best": rows.first() })
    } else {
        Value::Null
    };
    let ablation = if has(Stage::Ablate) {
        json!(read_table::<AblationRow>(&ctx.upstream(Stage::Ablate).join("ablation.csv"))?)
    } else {
        Value::Null
    };
    let crossval = if has(Stage::Crossval) {
        let dir = ctx.upstream(Stage::Crossval);
        let summary: Vec<SummaryRow> = read_table(&dir.join("summary.csv"))?;
        let stats: StatReport = read_json(&dir.join("stats.json"))?;
        json!({
            "summary": summary,
            "normality": stats.normality,
            "comparisons": stats.comparisons,
            "paired": stats.paired,
            "folds": stats.folds,
        })
    } else {
        Value::Null
    };
    let core = [Stage::Generate, Stage::Ingest, Stage::Featurize, Stage::Graph, Stage::Train];
    let mut artifacts = serde_json::Map::new();
    for &s in Stage::ALL.iter().filter(|s| core.contains(s) || has(**s)) {
        if let Some(m) = Manifest::load(&ctx.upstream(s))? {
            artifacts.insert(s.name().to_string(), json!(m.content_hash));
        }
    }
    let report = json!({
        "config_hash": ctx.config_hash,
        "seed": ctx.config.seed,
        "tau": ctx.config.tau(),
        "cohort": cohort,
        "graph": graph,
        "train": train,
        "grid": grid,
        "ablation": ablation,
        "crossval": crossval,
        "artifacts": artifacts,
    });
    write_json(&ctx.dir.join(REPORT_FILE), &report)
}

