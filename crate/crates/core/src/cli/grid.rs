use std::fmt::Write as _;

use log::{info, warn};
use serde::Serialize;

use crate::datasets::InteractionMatrix;
use crate::error::{Error, Result};
use crate::eval::{evaluate, RankingRequest};
use crate::models::{Hyperparams, ItemWeightMatrix};

use super::{GridSpec, ModelKind, Workbench};

/// Validation cutoff used for model selection.
pub const SELECTION_K: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridRow {
    /// `ease` and `llm-ease` rows of an l3ae search are its first two stages.
    pub stage: String,
    pub hyperparams: Hyperparams,
    pub recall: f64,
    pub ndcg: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GridOutcome {
    pub model: ModelKind,
    pub selection_k: usize,
    pub rows: Vec<GridRow>,
    /// Index into `rows` of the selected point.
    pub best: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_star: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_f_star: Option<f64>,
    #[serde(skip)]
    pub best_weights: Option<ItemWeightMatrix>,
}

impl GridOutcome {
    pub fn best_row(&self) -> &GridRow {
        &self.rows[self.best]
    }

    pub fn to_tsv(&self) -> String {
        let k = self.selection_k;
        let mut out = format!("stage\tlambda\tlambda_x\tlambda_t\tlambda_f\tlambda_kd\talpha\tbeta\tR@{k}\tN@{k}\tselected\n");
        let cell = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
        for (i, r) in self.rows.iter().enumerate() {
            let h = &r.hyperparams;
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{:.6}\t{:.6}\t{}",
                r.stage,
                cell(h.lambda),
                cell(h.lambda_x),
                cell(h.lambda_t),
                cell(h.lambda_f),
                cell(h.lambda_kd),
                cell(h.alpha),
                cell(h.beta),
                r.recall,
                r.ndcg,
                if i == self.best { "*" } else { "" }
            )
            .unwrap();
        }
        out
    }
}

/// `(λ_KD, λ_X)` pairs with `λ_KD + λ_X = λ*` and `λ_X > 0`, in `λ_KD` order.
pub fn l3ae_budget_pairs(lambda_star: f64, lambda_kd: &[f64]) -> Vec<(f64, f64)> {
    lambda_kd
        .iter()
        .map(|&kd| (kd, lambda_star - kd))
        .filter(|&(kd, x)| kd >= 0.0 && x > 0.0)
        .collect()
}

struct Selector<'a> {
    train: &'a InteractionMatrix,
    validation: &'a InteractionMatrix,
    k: usize,
}

impl Selector<'_> {
    fn score(&self, w: &ItemWeightMatrix) -> Result<(f64, f64)> {
        let report = evaluate(&RankingRequest::new(self.train, w).with_k(vec![self.k]), self.validation)?;
        let o = report.overall();
        Ok((o.recall_at[&self.k], o.ndcg_at[&self.k]))
    }
}

/// Tracks the first strictly best candidate, so ties keep grid order.
struct Best {
    index: Option<usize>,
    recall: f64,
    weights: Option<ItemWeightMatrix>,
}

impl Best {
    fn new() -> Self {
        Self { index: None, recall: f64::NEG_INFINITY, weights: None }
    }

    fn offer(&mut self, index: usize, recall: f64, w: ItemWeightMatrix) {
        if self.index.is_none() || recall > self.recall {
            self.index = Some(index);
            self.recall = recall;
            self.weights = Some(w);
        }
    }
}

fn run_stage(
    sel: &Selector<'_>,
    rows: &mut Vec<GridRow>,
    stage: &str,
    candidates: impl IntoIterator<Item = Result<ItemWeightMatrix>>,
) -> Result<Best> {
    let mut best = Best::new();
    for w in candidates {
        let w = w?;
        let (recall, ndcg) = sel.score(&w)?;
        info!("{stage} {:?}: R@{} = {recall:.4}", w.hyperparams, sel.k);
        rows.push(GridRow { stage: stage.to_string(), hyperparams: w.hyperparams, recall, ndcg });
        best.offer(rows.len() - 1, recall, w);
    }
    if best.index.is_none() {
        return Err(Error::Config(format!("grid for {stage} has no admissible points")));
    }
    Ok(best)
}

/// Evaluates every grid point of `model` on `validation` (R@20) and keeps the best.
///
/// For l3ae the search is staged: `λ*` from the EASE grid, `λ_F*` from the
/// semantic-EASE grid, then `λ_KD` sweeps with `λ_X = λ* − λ_KD`.
pub fn grid_search(
    bench: &Workbench,
    validation: &InteractionMatrix,
    model: ModelKind,
    grid: &GridSpec,
) -> Result<GridOutcome> {
    grid.validate()?;
    let n = bench.train.n_items();
    let k = if n < SELECTION_K {
        warn!("only {n} items; selecting on R@{n} instead of R@{SELECTION_K}");
        n
    } else {
        SELECTION_K
    };
    let sel = Selector { train: &bench.train, validation, k };
    let mut rows = Vec::new();
    let mut lambda_star = None;
    let mut lambda_f_star = None;
    let name = model.as_str();

    let best = match model {
        ModelKind::Ease => run_stage(&sel, &mut rows, name, grid.lambda.iter().map(|&l| bench.ease(l)))?,
        ModelKind::LlmEase => run_stage(&sel, &mut rows, name, grid.lambda_f.iter().map(|&l| bench.semantic(l)))?,
        ModelKind::Cosine => run_stage(&sel, &mut rows, name, [bench.cosine()])?,
        ModelKind::Cease | ModelKind::LlmCease => {
            let points = grid.lambda.iter().flat_map(|&l| grid.alpha.iter().map(move |&a| (l, a)));
            run_stage(&sel, &mut rows, name, points.map(|(l, a)| bench.collective(model, a, l)))?
        }
        ModelKind::AddEase | ModelKind::LlmAddEase => {
            let ds: Vec<ItemWeightMatrix> = grid
                .lambda_t
                .iter()
                .map(|&lt| {
                    let mut d = bench.feature_component(model, lt)?;
                    d.hyperparams.lambda_t = Some(lt);
                    Ok(d)
                })
                .collect::<Result<_>>()?;
            let mut best = Best::new();
            for &lx in &grid.lambda_x {
                let c = bench.ease(lx)?;
                let points = ds.iter().flat_map(|d| grid.beta.iter().map(move |&b| (d, b)));
                let stage = run_stage(&sel, &mut rows, name, points.map(|(d, b)| bench.additive(model, &c, d, b)))?;
                if let (Some(i), Some(w)) = (stage.index, stage.weights) {
                    best.offer(i, stage.recall, w);
                }
            }
            best
        }
        ModelKind::L3ae => {
            let ease = run_stage(&sel, &mut rows, "ease", grid.lambda.iter().map(|&l| bench.ease(l)))?;
            let star = rows[ease.index.unwrap()].hyperparams.lambda.unwrap();
            let sem = run_stage(&sel, &mut rows, "llm-ease", grid.lambda_f.iter().map(|&l| bench.semantic(l)))?;
            let s = sem.weights.unwrap();
            lambda_star = Some(star);
            lambda_f_star = s.hyperparams.lambda_f;
            let pairs = l3ae_budget_pairs(star, &grid.lambda_kd);
            if pairs.is_empty() {
                return Err(Error::Config(format!("no lambda_kd in the grid leaves lambda_x = {star} - lambda_kd positive")));
            }
            run_stage(&sel, &mut rows, name, pairs.into_iter().map(|(kd, x)| bench.l3ae(&s, x, kd)))?
        }
    };
    Ok(GridOutcome {
        model,
        selection_k: k,
        rows,
        best: best.index.unwrap(),
        lambda_star,
        lambda_f_star,
        best_weights: best.weights,
    })
}
