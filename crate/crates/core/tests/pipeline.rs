use std::fs;
use std::path::Path;
use std::sync::Arc;

use nalgebra::DMatrix;

use l3ae::cli::{
    cmd_eval, cmd_fit, cmd_grid, cmd_prepare, cmd_spectrum, cmd_synth, load_prepared, weight_paths, GridSpec, ModelKind,
    RunConfig,
};
use l3ae::datasets::{load_embeddings, write_pairs, DatasetStats, Dtype, Pair, SplitCounts, SplitManifest, SplitRatios};
use l3ae::models::{fit_collective, read_weights, write_weights, Hyperparams, ItemWeightMatrix};
use l3ae::oracle::exhaustive_rank_metrics;
use l3ae::synth::{SynthConfig, EMBEDDINGS_FILE, INTERACTIONS_FILE, TAGS_FILE};
use l3ae::Error;

fn pairs(rows: &[(&str, &[&str])]) -> Vec<Pair> {
    rows.iter()
        .flat_map(|(u, items)| items.iter().map(move |i| (u.to_string(), i.to_string())))
        .collect()
}

/// Writes a prepared directory by hand, bypassing filtering and splitting.
fn write_prepared(dir: &Path, users: &[&str], items: &[&str], train: &[Pair], validation: &[Pair], test: &[Pair]) {
    fs::create_dir_all(dir).unwrap();
    fs::write(dir.join("users.txt"), users.join("\n") + "\n").unwrap();
    fs::write(dir.join("items.txt"), items.join("\n") + "\n").unwrap();
    write_pairs(&dir.join("train.tsv"), train).unwrap();
    write_pairs(&dir.join("validation.tsv"), validation).unwrap();
    write_pairs(&dir.join("test.tsv"), test).unwrap();
    let total = train.len() + validation.len() + test.len();
    let manifest = SplitManifest {
        seed: 0,
        ratios: SplitRatios::default(),
        counts: SplitCounts { train: train.len(), validation: validation.len(), test: test.len() },
        stats: DatasetStats::new(users.len(), items.len(), total),
    };
    fs::write(dir.join("split.json"), serde_json::to_string(&manifest).unwrap()).unwrap();
}

fn synthetic_run(dir: &Path) -> RunConfig {
    let synth = RunConfig {
        synth: SynthConfig { users: 300, items: 80, clusters: 4, dim: 16, ..Default::default() },
        out: dir.join("data"),
        seed: 2,
        ..Default::default()
    };
    cmd_synth(&synth).unwrap();
    let cfg = RunConfig {
        interactions: Some(synth.out.join(INTERACTIONS_FILE)),
        embeddings: Some(synth.out.join(EMBEDDINGS_FILE)),
        tags: Some(synth.out.join(TAGS_FILE)),
        out: dir.join("run"),
        seed: 2,
        ..Default::default()
    };
    cmd_prepare(&cfg).unwrap();
    cfg
}

#[test]
fn ease_fit_exports_two_item_fixture() {
    let dir = tempfile::tempdir().unwrap();
    // XᵀX = [[2,1],[1,2]]
    let train = pairs(&[("a", &["x", "y"]), ("b", &["x"]), ("c", &["y"])]);
    write_prepared(dir.path(), &["a", "b", "c"], &["x", "y"], &train, &[], &[]);
    let cfg = RunConfig {
        prepared: Some(dir.path().to_path_buf()),
        out: dir.path().join("out"),
        model: Some(ModelKind::Ease),
        hyperparams: Hyperparams { lambda: Some(1.0), ..Default::default() },
        ..Default::default()
    };
    cmd_fit(&cfg).unwrap();
    let (bin, json) = weight_paths(&cfg.out, "ease");
    let w = read_weights(&bin, &json).unwrap();
    let third = (1.0f64 / 3.0) as f32 as f64;
    assert_eq!(w.values, DMatrix::from_row_slice(2, 2, &[0.0, third, third, 0.0]));
    assert_eq!(w.hyperparams.lambda, Some(1.0));
}

#[test]
fn l3ae_without_distillation_matches_ease_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let base = synthetic_run(dir.path());
    let ease = RunConfig {
        model: Some(ModelKind::Ease),
        hyperparams: Hyperparams { lambda: Some(60.0), ..Default::default() },
        ..base.clone()
    };
    let l3 = RunConfig {
        model: Some(ModelKind::L3ae),
        hyperparams: Hyperparams { lambda_x: Some(60.0), lambda_kd: Some(0.0), lambda_f: Some(5.0), ..Default::default() },
        ..base
    };
    let we = cmd_fit(&ease).unwrap();
    let wl = cmd_fit(&l3).unwrap();
    assert_eq!(we.values, wl.values);
    let re = cmd_eval(&ease).unwrap();
    let rl = cmd_eval(&l3).unwrap();
    assert_eq!(re.slices, rl.slices);
}

#[test]
fn llm_cease_uses_embeddings_in_place_of_tags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        model: Some(ModelKind::LlmCease),
        hyperparams: Hyperparams { lambda: Some(20.0), alpha: Some(2.0), ..Default::default() },
        ..synthetic_run(dir.path())
    };
    let w = cmd_fit(&cfg).unwrap();
    assert_eq!(w.model, "llm-cease");
    let train = load_prepared(&cfg.out).unwrap().train;
    let f = load_embeddings(
        cfg.embeddings.as_ref().unwrap(),
        &cfg.embeddings_header_path().unwrap(),
        train.item_ids(),
        false,
    )
    .unwrap();
    let direct = fit_collective(&train, &f, 2.0, 20.0).unwrap();
    assert_eq!(w.values, direct.values);

    let tags = RunConfig { model: Some(ModelKind::Cease), ..cfg };
    assert_eq!(cmd_fit(&tags).unwrap().model, "cease");
}

fn write_weight_file(dir: &Path, values: DMatrix<f64>, items: &[&str]) -> std::path::PathBuf {
    let w = ItemWeightMatrix {
        values,
        zero_diag: true,
        model: "fixed".into(),
        hyperparams: Hyperparams::default(),
        item_ids: items.iter().map(|s| s.to_string()).collect::<Arc<[String]>>(),
    };
    let (bin, json) = weight_paths(dir, "fixed");
    write_weights(&bin, &json, &w, Dtype::F32).unwrap();
    bin
}

#[test]
fn zero_weights_rank_by_index() {
    let dir = tempfile::tempdir().unwrap();
    let items = ["i0", "i1", "i2", "i3", "i4", "i5"];
    let train = pairs(&[("a", &["i0"]), ("b", &["i2", "i3"]), ("c", &["i5"])]);
    let test = pairs(&[("a", &["i1", "i4"]), ("b", &["i5"]), ("c", &["i0"])]);
    write_prepared(dir.path(), &["a", "b", "c"], &items, &train, &[], &test);
    let bin = write_weight_file(dir.path(), DMatrix::zeros(6, 6), &items);
    let cfg = RunConfig { prepared: Some(dir.path().into()), weights: Some(bin), out: dir.path().join("out"), k: vec![1, 2], ..Default::default() };
    let report = cmd_eval(&cfg).unwrap();

    // the oracle on the same all-zero scores with training items masked
    let masks: [&[usize]; 3] = [&[0], &[2, 3], &[5]];
    let rel: [&[usize]; 3] = [&[1, 4], &[5], &[0]];
    for k in [1, 2] {
        let mut sum = 0.0;
        for u in 0..3 {
            let mut scores = vec![0.0; 6];
            for &i in masks[u] {
                scores[i] = f64::NEG_INFINITY;
            }
            sum += exhaustive_rank_metrics(&scores, rel[u], k).unwrap().0;
        }
        assert_eq!(report.overall().recall_at[&k], sum / 3.0, "k = {k}");
    }
    assert!(dir.path().join("out/eval-fixed-test.tsv").exists());
}

#[test]
fn perfect_weights_reach_full_recall() {
    let dir = tempfile::tempdir().unwrap();
    let items = ["i0", "i1", "i2", "i3", "i4", "i5"];
    let train = pairs(&[("a", &["i0"]), ("b", &["i2"]), ("c", &["i4"])]);
    let test = pairs(&[("a", &["i1"]), ("b", &["i3"]), ("c", &["i5"])]);
    write_prepared(dir.path(), &["a", "b", "c"], &items, &train, &[], &test);
    let mut v = DMatrix::zeros(6, 6);
    for u in 0..3 {
        v[(2 * u, 2 * u + 1)] = 1.0;
    }
    let bin = write_weight_file(dir.path(), v, &items);
    let cfg = RunConfig { prepared: Some(dir.path().into()), weights: Some(bin.clone()), out: dir.path().join("out"), k: vec![1], ..Default::default() };
    let report = cmd_eval(&cfg).unwrap();
    assert_eq!(report.overall().recall_at[&1], 1.0);
    assert_eq!(report.overall().ndcg_at[&1], 1.0);

    let too_deep = RunConfig { k: vec![7], ..cfg };
    let err = cmd_eval(&too_deep).unwrap_err();
    assert!(matches!(err, Error::Param(_)));
    assert_eq!(err.exit_code(), 1);
}

#[test]
fn eval_rejects_foreign_item_space() {
    let dir = tempfile::tempdir().unwrap();
    let train = pairs(&[("a", &["x"])]);
    write_prepared(dir.path(), &["a"], &["x", "y"], &train, &[], &pairs(&[("a", &["y"])]));
    let bin = write_weight_file(dir.path(), DMatrix::zeros(2, 2), &["x", "z"]);
    let cfg = RunConfig { prepared: Some(dir.path().into()), weights: Some(bin), out: dir.path().join("out"), k: vec![1], ..Default::default() };
    assert!(matches!(cmd_eval(&cfg), Err(Error::Data(_))));
}

#[test]
fn single_point_grid_returns_that_point() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        model: Some(ModelKind::Ease),
        grid: GridSpec { lambda: vec![5.0], ..Default::default() },
        ..synthetic_run(dir.path())
    };
    let g = cmd_grid(&cfg).unwrap();
    assert_eq!(g.rows.len(), 1);
    assert_eq!(g.best_row().hyperparams.lambda, Some(5.0));
    assert!(cfg.out.join("grid-ease.tsv").exists());
    assert!(weight_paths(&cfg.out, "ease").0.exists());
}

#[test]
fn l3ae_grid_keeps_budget() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        model: Some(ModelKind::L3ae),
        grid: GridSpec { lambda: vec![50.0, 100.0, 500.0], lambda_f: vec![1.0, 10.0], ..Default::default() },
        ..synthetic_run(dir.path())
    };
    let g = cmd_grid(&cfg).unwrap();
    let star = g.lambda_star.unwrap();
    let l3: Vec<_> = g.rows.iter().filter(|r| r.stage == "l3ae").collect();
    assert!(!l3.is_empty());
    for r in &l3 {
        let (x, kd) = (r.hyperparams.lambda_x.unwrap(), r.hyperparams.lambda_kd.unwrap());
        assert_eq!(x + kd, star);
        assert!(x > 0.0);
        assert_eq!(r.hyperparams.lambda_f, g.lambda_f_star);
    }
    assert_eq!(g.best_row().stage, "l3ae");
}

#[test]
fn l3ae_grid_tie_prefers_smallest_distillation() {
    let dir = tempfile::tempdir().unwrap();
    let train = pairs(&[("a", &["i0", "i1"]), ("b", &["i1", "i2"]), ("c", &["i0", "i2"])]);
    let items = ["i0", "i1", "i2"];
    write_prepared(dir.path(), &["a", "b", "c"], &items, &train, &[], &[]);
    let emb = dir.path().join("emb.bin");
    let ids: Vec<String> = items.iter().map(|s| s.to_string()).collect();
    l3ae::datasets::write_embeddings(&emb, &emb.with_extension("json"), &ids, &DMatrix::identity(3, 3), Dtype::F64).unwrap();
    let cfg = RunConfig {
        prepared: Some(dir.path().into()),
        embeddings: Some(emb),
        out: dir.path().join("out"),
        model: Some(ModelKind::L3ae),
        grid: GridSpec { lambda: vec![100.0], ..Default::default() },
        ..Default::default()
    };
    // an empty validation split makes every point tie at zero
    let g = cmd_grid(&cfg).unwrap();
    assert_eq!(g.best_row().hyperparams.lambda_kd, Some(10.0));

    let starved = RunConfig { grid: GridSpec { lambda: vec![5.0], ..Default::default() }, ..cfg };
    assert!(matches!(cmd_grid(&starved), Err(Error::Config(_))));
}

#[test]
fn semantic_cache_is_written_and_reused() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("s.bin");
    let cfg = RunConfig {
        model: Some(ModelKind::L3ae),
        semantic_cache: Some(cache.clone()),
        hyperparams: Hyperparams { lambda_x: Some(40.0), lambda_kd: Some(20.0), lambda_f: Some(3.0), ..Default::default() },
        ..synthetic_run(dir.path())
    };
    let first = cmd_fit(&cfg).unwrap();
    let s = read_weights(&cache, &cache.with_extension("json")).unwrap();
    assert_eq!(s.hyperparams.lambda_f, Some(3.0));
    assert_eq!(s.model, "llm-ease");
    // without λ_F the cache alone drives phase 1
    let cached = RunConfig { hyperparams: Hyperparams { lambda_f: None, ..cfg.hyperparams }, ..cfg };
    let second = cmd_fit(&cached).unwrap();
    assert_eq!(first.values, second.values);
    assert_eq!(second.hyperparams.lambda_f, Some(3.0));
}

#[test]
fn spectra_of_fixtures() {
    let dir = tempfile::tempdir().unwrap();
    let items = ["i0", "i1", "i2", "i3"];
    let identity = pairs(&[("a", &["i0"]), ("b", &["i1"]), ("c", &["i2"]), ("d", &["i3"])]);
    write_prepared(&dir.path().join("id"), &["a", "b", "c", "d"], &items, &identity, &[], &[]);
    let cfg = RunConfig { prepared: Some(dir.path().join("id")), out: dir.path().join("o1"), ..Default::default() };
    let t = cmd_spectrum(&cfg).unwrap();
    assert!(t.x.iter().all(|&v| (v - 1.0).abs() < 1e-12));

    let full = pairs(&[("a", &items), ("b", &items)]);
    write_prepared(&dir.path().join("r1"), &["a", "b"], &items, &full, &[], &[]);
    let cfg = RunConfig { prepared: Some(dir.path().join("r1")), out: dir.path().join("o2"), ..Default::default() };
    let t = cmd_spectrum(&cfg).unwrap();
    assert_eq!(t.x[0], 1.0);
    assert!(t.x[1..].iter().all(|&v| v < 1e-12));
    let text = fs::read_to_string(dir.path().join("o2/spectrum.tsv")).unwrap();
    assert!(text.starts_with("index\tx\tf\n"));
}

#[test]
fn synthetic_embedding_spectrum_decays_fast() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = synthetic_run(dir.path());
    let f = cmd_spectrum(&cfg).unwrap().f.unwrap();
    let at = (0.5 * f.len() as f64).ceil() as usize;
    assert!(f[at] < 0.1, "{}", f[at]);
}

#[test]
fn prepare_matches_synthetic_truth_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = synthetic_run(dir.path());
    let truth: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("data/truth.json")).unwrap()).unwrap();
    let manifest = load_prepared(&cfg.out).unwrap().manifest;
    assert_eq!(manifest.stats.ratings as u64, truth["stats"]["ratings"].as_u64().unwrap());
    assert_eq!(manifest.stats.users as u64, truth["stats"]["users"].as_u64().unwrap());

    let again = RunConfig { out: dir.path().join("run2"), ..cfg.clone() };
    cmd_prepare(&again).unwrap();
    for name in ["train.tsv", "validation.tsv", "test.tsv", "split.json", "items.txt", "users.txt"] {
        assert_eq!(fs::read(cfg.out.join(name)).unwrap(), fs::read(again.out.join(name)).unwrap(), "{name}");
    }

    let fit = RunConfig { model: Some(ModelKind::LlmAddEase), hyperparams: Hyperparams { lambda_x: Some(30.0), lambda_t: Some(2.0), beta: Some(0.5), ..Default::default() }, ..cfg };
    cmd_fit(&fit).unwrap();
    let first = fs::read(weight_paths(&fit.out, "llm-add-ease").0).unwrap();
    cmd_fit(&fit).unwrap();
    assert_eq!(first, fs::read(weight_paths(&fit.out, "llm-add-ease").0).unwrap());
}

#[test]
fn prepare_missing_file_is_a_path_error() {
    let cfg = RunConfig { interactions: Some("/definitely/missing.tsv".into()), ..Default::default() };
    let err = cmd_prepare(&cfg).unwrap_err();
    assert!(matches!(err, Error::Io { .. }));
    assert_eq!(err.exit_code(), 2);
}
