use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use log::{info, warn};

use crate::datasets::{
    build_tag_matrix, k_core_filter, load_embeddings, load_interactions, load_tags, read_pairs, split, write_pairs,
    DatasetStats, Dtype, FeatureMatrix, InteractionMatrix, SplitManifest,
};
use crate::error::{Error, Result};
use crate::eval::{evaluate, EvalReport, RankingRequest};
use crate::linalg::{set_memory_cap, spectrum};
use crate::models::{read_weights, write_weights, ItemWeightMatrix};
use crate::oracle::{run_audit, AuditReport};
use crate::synth::{generate, write_dataset, SynthTruth};

use super::{grid_search, GridOutcome, ModelKind, RunConfig, Workbench};

const USERS_FILE: &str = "users.txt";
const ITEMS_FILE: &str = "items.txt";
const MANIFEST_FILE: &str = "split.json";
const SPLIT_FILES: [&str; 3] = ["train.tsv", "validation.tsv", "test.tsv"];

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn to_json<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

/// Payload and header paths of a model's exported weights under `dir`.
pub fn weight_paths(dir: &Path, model: &str) -> (PathBuf, PathBuf) {
    (dir.join(format!("weights-{model}.bin")), dir.join(format!("weights-{model}.json")))
}

fn stats_tsv(stats: &DatasetStats) -> String {
    format!("users\titems\tratings\tdensity\n{}\t{}\t{}\t{:.6e}\n", stats.users, stats.items, stats.ratings, stats.density)
}

/// Load, threshold, k-core filter and split the raw interactions; writes the
/// split files, id lists, manifest and a stats table into `out`.
pub fn cmd_prepare(cfg: &RunConfig) -> Result<SplitManifest> {
    let path = cfg.interactions.as_ref().ok_or_else(|| Error::Config("prepare needs interactions".into()))?;
    let pairs = load_interactions(path, cfg.rating_threshold)?;
    info!("raw: {:?}", DatasetStats::from_pairs(&pairs));
    let core = k_core_filter(&pairs, cfg.core)?;
    if core.is_empty() {
        return Err(Error::Data(format!("no interactions survive {}-core filtering", cfg.core)));
    }
    let bundle = split(&core, cfg.seed, cfg.ratios)?;
    let manifest = bundle.manifest();
    info!("{}-core: {:?}", cfg.core, manifest.stats);

    let out = &cfg.out;
    ensure_dir(out)?;
    write_text(&out.join(USERS_FILE), &(bundle.train.user_ids().join("\n") + "\n"))?;
    write_text(&out.join(ITEMS_FILE), &(bundle.train.item_ids().join("\n") + "\n"))?;
    for (name, m) in SPLIT_FILES.iter().zip([&bundle.train, &bundle.validation, &bundle.test]) {
        write_pairs(&out.join(name), &m.to_pairs())?;
    }
    write_text(&out.join(MANIFEST_FILE), &to_json(&manifest))?;
    write_text(&out.join("stats.tsv"), &stats_tsv(&manifest.stats))?;
    Ok(manifest)
}

/// Split matrices over the shared index written by `prepare`.
#[derive(Debug, Clone)]
pub struct PreparedSplit {
    pub train: InteractionMatrix,
    pub validation: InteractionMatrix,
    pub test: InteractionMatrix,
    pub manifest: SplitManifest,
}

fn read_ids(path: &Path) -> Result<Arc<[String]>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text.lines().filter(|l| !l.is_empty()).map(str::to_string).collect())
}

pub fn load_prepared(dir: &Path) -> Result<PreparedSplit> {
    let users = read_ids(&dir.join(USERS_FILE))?;
    let items = read_ids(&dir.join(ITEMS_FILE))?;
    let mpath = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&mpath).map_err(|e| Error::io(&mpath, e))?;
    let manifest: SplitManifest = serde_json::from_str(&text).map_err(|e| Error::Json { path: mpath, source: e })?;
    let mut parts = Vec::with_capacity(3);
    for name in SPLIT_FILES {
        let pairs = read_pairs(&dir.join(name))?;
        parts.push(InteractionMatrix::from_pairs_indexed(&pairs, users.clone(), items.clone())?);
    }
    let test = parts.pop().unwrap();
    let validation = parts.pop().unwrap();
    let train = parts.pop().unwrap();
    Ok(PreparedSplit { train, validation, test, manifest })
}

fn load_features(cfg: &RunConfig, train: &InteractionMatrix) -> Result<Option<FeatureMatrix>> {
    let Some(path) = &cfg.embeddings else { return Ok(None) };
    let header = cfg.embeddings_header_path().expect("embeddings path is set");
    Ok(Some(load_embeddings(path, &header, train.item_ids(), cfg.normalize_embeddings)?))
}

fn workbench(cfg: &RunConfig, model: Option<ModelKind>, train: InteractionMatrix) -> Result<Workbench> {
    let model_needs = |f: fn(ModelKind) -> bool| model.is_some_and(f);
    let tags = if model_needs(ModelKind::needs_tags) {
        let path = cfg.tags.as_ref().ok_or_else(|| Error::Config(format!("model {} needs tags", model.unwrap())))?;
        Some(build_tag_matrix(&load_tags(path)?, train.item_ids()))
    } else {
        None
    };
    let embeddings = if model_needs(ModelKind::needs_embeddings) {
        let f = load_features(cfg, &train)?;
        if f.is_none() {
            return Err(Error::Config(format!("model {} needs embeddings", model.unwrap())));
        }
        f
    } else {
        None
    };
    Workbench::new(train, tags, embeddings)
}

/// Reuses a cached phase-1 matrix when it matches the items and `λ_F`,
/// otherwise fits it and refreshes the cache.
fn semantic_matrix(cfg: &RunConfig, bench: &Workbench) -> Result<Option<ItemWeightMatrix>> {
    let Some(cache) = &cfg.semantic_cache else { return Ok(None) };
    let header = cache.with_extension("json");
    let wanted = cfg.hyperparams.lambda_f;
    if cache.exists() && header.exists() {
        let s = read_weights(cache, &header)?;
        let fresh = s.item_ids[..] == bench.train.item_ids()[..]
            && (wanted.is_none() || wanted == s.hyperparams.lambda_f);
        if fresh {
            info!("using cached semantic matrix {}", cache.display());
            return Ok(Some(s));
        }
        warn!("semantic cache {} is stale; refitting", cache.display());
    }
    let lambda_f = wanted.ok_or_else(|| Error::Config("model l3ae needs lambda_f or a semantic cache".into()))?;
    let s = bench.semantic(lambda_f)?;
    write_weights(cache, &header, &s, Dtype::F64)?;
    Ok(Some(s))
}

/// Fits the configured model on the training split and exports its weights.
pub fn cmd_fit(cfg: &RunConfig) -> Result<ItemWeightMatrix> {
    set_memory_cap(cfg.memory_cap);
    let model = cfg.require_model()?;
    let prepared = load_prepared(cfg.prepared_dir())?;
    let bench = workbench(cfg, Some(model), prepared.train)?;
    let s = if model == ModelKind::L3ae { semantic_matrix(cfg, &bench)? } else { None };
    let w = bench.fit(model, cfg.hyperparams, s.as_ref())?;
    ensure_dir(&cfg.out)?;
    let (bin, json) = weight_paths(&cfg.out, model.as_str());
    write_weights(&bin, &json, &w, Dtype::F32)?;
    info!("wrote {}", bin.display());
    Ok(w)
}

/// Scores exported weights on the test (or validation) split.
pub fn cmd_eval(cfg: &RunConfig) -> Result<EvalReport> {
    let prepared = load_prepared(cfg.prepared_dir())?;
    let bin = match (&cfg.weights, cfg.model) {
        (Some(p), _) => p.clone(),
        (None, Some(m)) => weight_paths(&cfg.out, m.as_str()).0,
        (None, None) => return Err(Error::Config("eval needs --model or a weights path".into())),
    };
    let w = read_weights(&bin, &bin.with_extension("json"))?;
    if w.item_ids[..] != prepared.train.item_ids()[..] {
        return Err(Error::Data(format!(
            "weights cover {} items that do not match the split's {} items",
            w.n(),
            prepared.train.n_items()
        )));
    }
    let target = if cfg.target == "validation" { &prepared.validation } else { &prepared.test };
    let mut report = evaluate(&RankingRequest::new(&prepared.train, &w).with_k(cfg.k.clone()), target)?;
    report.seed = Some(prepared.manifest.seed);
    if report.cold_users > 0 {
        warn!("{} evaluated users have no training history", report.cold_users);
    }
    ensure_dir(&cfg.out)?;
    let stem = format!("eval-{}-{}", w.model, cfg.target);
    write_text(&cfg.out.join(format!("{stem}.json")), &to_json(&report))?;
    write_text(&cfg.out.join(format!("{stem}.tsv")), &report.to_tsv())?;
    Ok(report)
}

/// Validation grid search; writes the full table, the selection and the
/// selected weights.
pub fn cmd_grid(cfg: &RunConfig) -> Result<GridOutcome> {
    set_memory_cap(cfg.memory_cap);
    let model = cfg.require_model()?;
    let prepared = load_prepared(cfg.prepared_dir())?;
    let bench = workbench(cfg, Some(model), prepared.train)?;
    let outcome = grid_search(&bench, &prepared.validation, model, &cfg.grid)?;
    ensure_dir(&cfg.out)?;
    write_text(&cfg.out.join(format!("grid-{model}.tsv")), &outcome.to_tsv())?;
    write_text(&cfg.out.join(format!("grid-{model}.json")), &to_json(&outcome))?;
    if let Some(w) = &outcome.best_weights {
        let (bin, json) = weight_paths(&cfg.out, model.as_str());
        write_weights(&bin, &json, w, Dtype::F32)?;
    }
    Ok(outcome)
}

/// Normalized singular values of the training matrix and, when given, the embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumTable {
    pub x: Vec<f64>,
    pub f: Option<Vec<f64>>,
}

impl SpectrumTable {
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("index\tx\tf\n");
        let len = self.x.len().max(self.f.as_ref().map_or(0, Vec::len));
        let cell = |v: Option<&f64>| v.map(|v| format!("{v:.8}")).unwrap_or_default();
        for i in 0..len {
            writeln!(out, "{i}\t{}\t{}", cell(self.x.get(i)), cell(self.f.as_ref().and_then(|f| f.get(i)))).unwrap();
        }
        out
    }
}

pub fn cmd_spectrum(cfg: &RunConfig) -> Result<SpectrumTable> {
    let prepared = load_prepared(cfg.prepared_dir())?;
    let x = spectrum(&prepared.train.to_dense())?;
    let f = load_features(cfg, &prepared.train)?.map(|f| spectrum(&f.values)).transpose()?;
    let table = SpectrumTable { x, f };
    ensure_dir(&cfg.out)?;
    write_text(&cfg.out.join("spectrum.tsv"), &table.to_tsv())?;
    Ok(table)
}

/// Runs the oracle suite; the report is written even when checks fail.
pub fn cmd_audit(cfg: &RunConfig) -> Result<AuditReport> {
    let report = run_audit(cfg.audit_instances, cfg.seed, cfg.audit_steps)?;
    ensure_dir(&cfg.out)?;
    write_text(&cfg.out.join("audit.tsv"), &report.to_tsv())?;
    Ok(report)
}

/// Generates the synthetic dataset into `out`, seeded by the run seed.
pub fn cmd_synth(cfg: &RunConfig) -> Result<SynthTruth> {
    let mut synth = cfg.synth.clone();
    synth.seed = cfg.seed;
    set_memory_cap(cfg.memory_cap);
    crate::linalg::check_memory(synth.items, cfg.memory_cap)?;
    let ds = generate(&synth)?;
    write_dataset(&ds, &cfg.out)?;
    Ok(ds.truth)
}
