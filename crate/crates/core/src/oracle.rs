//! Brute-force verifiers for the closed forms and ranking metrics.
//!
//! Nothing here shares code with `linalg` or `eval` beyond the data types:
//! Gram matrices are formed by plain products, systems are solved per column
//! with a general LU, and metrics come from a full sort.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::datasets::{FeatureMatrix, InteractionMatrix};
use crate::error::{Error, Result};
use crate::eval;
use crate::models::{
    fit_additive, fit_collective, fit_ease, fit_l3ae, fit_semantic_ease, Hyperparams, ItemWeightMatrix,
};

pub const MAX_USERS: usize = 50;
pub const MAX_ITEMS: usize = 15;
pub const DEFAULT_STEPS: usize = 10_000;

/// A small random problem: binary interactions, dense features, hyperparameters.
#[derive(Debug, Clone)]
pub struct OracleInstance {
    pub x: DMatrix<f64>,
    pub f: DMatrix<f64>,
    pub hyperparams: Hyperparams,
    pub seed: u64,
}

impl OracleInstance {
    /// Random instance with `m ≤ 50` users, `n ≤ 15` items and interaction density 0.3.
    pub fn random(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = rng.gen_range(10..=MAX_USERS);
        let n = rng.gen_range(2..=MAX_ITEMS);
        let d = rng.gen_range(2..=8);
        let x = DMatrix::from_fn(m, n, |_, _| rng.gen_bool(0.3) as u8 as f64);
        let f = DMatrix::from_fn(d, n, |_, _| {
            let v: f64 = StandardNormal.sample(&mut rng);
            v
        });
        let lambda_kd = rng.gen_range(0.5..20.0);
        let hyperparams = Hyperparams {
            lambda: Some(rng.gen_range(0.5..50.0)),
            lambda_x: Some(rng.gen_range(0.5..50.0)),
            lambda_t: Some(rng.gen_range(0.5..10.0)),
            lambda_f: Some(rng.gen_range(0.5..10.0)),
            lambda_kd: Some(lambda_kd),
            alpha: Some(rng.gen_range(0.1..5.0)),
            beta: Some(rng.gen_range(0.2..0.8)),
        };
        Self { x, f, hyperparams, seed }
    }

    pub fn n(&self) -> usize {
        self.x.ncols()
    }

    pub fn interactions(&self) -> InteractionMatrix {
        InteractionMatrix::from_dense(&self.x)
    }

    pub fn features(&self) -> FeatureMatrix {
        let ids: Arc<[String]> = (0..self.n()).map(|i| format!("i{i}")).collect();
        FeatureMatrix::semantic(self.f.clone(), ids).expect("instance features are well formed")
    }

    fn hp(&self, name: &str, v: Option<f64>) -> f64 {
        v.unwrap_or_else(|| panic!("instance {} lacks {name}", self.seed))
    }
}

/// Quadratic objective `Σ_j b_jᵀ(G + rI)b_j − 2·t_jᵀb_j + c` over zero-diagonal `B`.
///
/// EASE-type problems have `T = G`; the distillation problem has
/// `T = G + λ_KD·S` with ridge `λ_X + λ_KD`.
#[derive(Debug, Clone)]
pub struct KktProblem {
    pub gram: DMatrix<f64>,
    pub ridge: f64,
    pub target: DMatrix<f64>,
    pub constant: f64,
}

impl KktProblem {
    /// `‖A − AB‖² + λ‖B‖²` for a dense design matrix `A`.
    pub fn ease(a: &DMatrix<f64>, lambda: f64) -> Self {
        let gram = a.transpose() * a;
        let constant = gram.trace();
        Self { target: gram.clone(), gram, ridge: lambda, constant }
    }

    /// `‖X − XB‖² + λ_X‖B‖² + λ_KD‖B − S‖²`.
    pub fn l3ae(x: &DMatrix<f64>, s: &DMatrix<f64>, lambda_x: f64, lambda_kd: f64) -> Self {
        let gram = x.transpose() * x;
        let target = &gram + s * lambda_kd;
        let constant = gram.trace() + lambda_kd * s.norm_squared();
        Self { gram, ridge: lambda_x + lambda_kd, target, constant }
    }

    pub fn n(&self) -> usize {
        self.gram.nrows()
    }

    fn hessian(&self) -> DMatrix<f64> {
        &self.gram + DMatrix::identity(self.n(), self.n()) * self.ridge
    }

    pub fn objective(&self, b: &DMatrix<f64>) -> f64 {
        let hb = self.hessian() * b;
        b.dot(&hb) - 2.0 * self.target.dot(b) + self.constant
    }

    /// Off-diagonal first-order residual `(G + rI)B − T`, scaled to be relative.
    pub fn stationarity_residual(&self, b: &DMatrix<f64>) -> f64 {
        let r = self.hessian() * b - &self.target;
        let n = self.n();
        let mut worst: f64 = 0.0;
        for j in 0..n {
            for i in 0..n {
                if i != j {
                    worst = worst.max(r[(i, j)].abs());
                }
            }
        }
        let scale = (self.gram.amax() + self.ridge) * (1.0 + b.amax()) + self.target.amax();
        worst / scale.max(1.0)
    }
}

/// Exact constrained minimizer: per column `j`, solve the free block
/// `(G + rI)_{F,F}·b = T_{F,j}` with `F = {i ≠ j}` and set `b_j = 0`.
pub fn kkt_solve(problem: &KktProblem) -> Result<DMatrix<f64>> {
    if !(problem.ridge > 0.0) {
        return Err(Error::Param(format!("oracle ridge must be positive, got {}", problem.ridge)));
    }
    let n = problem.n();
    let h = problem.hessian();
    let mut b = DMatrix::zeros(n, n);
    for j in 0..n {
        let free: Vec<usize> = (0..n).filter(|&i| i != j).collect();
        if free.is_empty() {
            continue;
        }
        let k = free.len();
        let block = DMatrix::from_fn(k, k, |r, c| h[(free[r], free[c])]);
        let rhs = DVector::from_fn(k, |r, _| problem.target[(free[r], j)]);
        let sol = block
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Solver(format!("singular oracle subsystem for column {j}")))?;
        for (r, &i) in free.iter().enumerate() {
            b[(i, j)] = sol[r];
        }
    }
    Ok(b)
}

/// Gradient descent from `B = 0`, re-zeroing the diagonal after each step.
///
/// A step that raises the objective is discarded and the rate halved; the
/// eleventh halving is an error. An increase at rounding level ends the run.
/// `learning_rate = None` picks `1/(2L)` from a Gershgorin bound on the Hessian.
pub fn projected_gradient(problem: &KktProblem, steps: usize, learning_rate: Option<f64>) -> Result<DMatrix<f64>> {
    let n = problem.n();
    let h = problem.hessian();
    let mut lr = learning_rate.unwrap_or_else(|| {
        let bound = (0..n).map(|i| h.row(i).iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
        0.5 / bound.max(f64::MIN_POSITIVE)
    });
    let mut b = DMatrix::zeros(n, n);
    let mut value = problem.objective(&b);
    let mut halvings = 0;
    let mut step = 0;
    while step < steps {
        let grad = (&h * &b - &problem.target) * 2.0;
        let mut next = &b - grad * lr;
        next.fill_diagonal(0.0);
        let next_value = problem.objective(&next);
        if next_value > value {
            // rounding-level increases mean the iterate has settled
            if next_value - value <= 1e-12 * (1.0 + value.abs() + problem.constant.abs()) {
                break;
            }
            halvings += 1;
            if halvings > 10 {
                return Err(Error::Solver(format!("projected gradient diverged at step {step}")));
            }
            lr *= 0.5;
            continue;
        }
        b = next;
        value = next_value;
        step += 1;
    }
    Ok(b)
}

/// Recall and NDCG by full sort; `None` when `relevant` is empty. Items with
/// `-inf` score are treated as masked.
pub fn exhaustive_rank_metrics(scores: &[f64], relevant: &[usize], k: usize) -> Option<(f64, f64)> {
    if relevant.is_empty() {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .expect("oracle scores are not NaN")
            .then(a.cmp(&b))
    });
    let visible: Vec<usize> = order.into_iter().filter(|&i| scores[i] > f64::NEG_INFINITY).take(k).collect();
    let rel: HashSet<usize> = relevant.iter().copied().collect();
    let top: HashSet<usize> = visible.iter().copied().collect();
    let recall = top.intersection(&rel).count() as f64 / rel.len() as f64;
    let mut dcg = 0.0;
    for (p, i) in visible.iter().enumerate() {
        if rel.contains(i) {
            dcg += 1.0 / ((p + 2) as f64).log2();
        }
    }
    let mut idcg = 0.0;
    for p in 0..k.min(rel.len()) {
        idcg += 1.0 / ((p + 2) as f64).log2();
    }
    Some((recall, dcg / idcg))
}

/// Compares `eval` metrics against the exhaustive oracle on random score
/// vectors with ties and masked entries. Returns the number of mismatches.
pub fn metric_fuzz(cases: usize, seed: u64) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mismatches = 0;
    for _ in 0..cases {
        let n = rng.gen_range(1..=50);
        let scores: Vec<f64> = (0..n)
            .map(|_| {
                if rng.gen_bool(0.15) {
                    f64::NEG_INFINITY
                } else {
                    rng.gen_range(-8..8) as f64 * 0.25
                }
            })
            .collect();
        let mut relevant: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.2)).collect();
        if relevant.is_empty() {
            relevant.push(rng.gen_range(0..n));
        }
        let k = rng.gen_range(1..=n);
        let rel_u32: Vec<u32> = relevant.iter().map(|&i| i as u32).collect();
        let ranked = eval::topk(&scores, k);
        let got = (eval::recall_at_k(&ranked, &rel_u32, k), eval::ndcg_at_k(&ranked, &rel_u32, k));
        if exhaustive_rank_metrics(&scores, &relevant, k) != Some(got) {
            mismatches += 1;
        }
    }
    mismatches
}

/// Closed-form fits of each model next to their oracle solutions.
pub struct ModelPair {
    pub model: &'static str,
    pub closed: ItemWeightMatrix,
    pub oracle: DMatrix<f64>,
    /// Problem whose minimizer `oracle` is; `None` for blended models.
    pub problem: Option<KktProblem>,
}

impl ModelPair {
    pub fn max_diff(&self) -> f64 {
        (&self.closed.values - &self.oracle).amax()
    }
}

/// Fits every model on `inst` by closed form and by `kkt_solve`.
pub fn model_pairs(inst: &OracleInstance) -> Result<Vec<ModelPair>> {
    let hp = inst.hyperparams;
    let lambda = inst.hp("lambda", hp.lambda);
    let lambda_x = inst.hp("lambda_x", hp.lambda_x);
    let lambda_t = inst.hp("lambda_t", hp.lambda_t);
    let lambda_f = inst.hp("lambda_f", hp.lambda_f);
    let lambda_kd = inst.hp("lambda_kd", hp.lambda_kd);
    let alpha = inst.hp("alpha", hp.alpha);
    let beta = inst.hp("beta", hp.beta);
    let x = inst.interactions();
    let f = inst.features();

    let ease_p = KktProblem::ease(&inst.x, lambda);
    let ease_b = kkt_solve(&ease_p)?;

    let stacked = DMatrix::from_fn(inst.x.nrows() + inst.f.nrows(), inst.n(), |r, c| {
        if r < inst.x.nrows() {
            inst.x[(r, c)]
        } else {
            alpha.sqrt() * inst.f[(r - inst.x.nrows(), c)]
        }
    });
    let col_p = KktProblem::ease(&stacked, lambda);
    let col_b = kkt_solve(&col_p)?;

    let c = kkt_solve(&KktProblem::ease(&inst.x, lambda_x))?;
    let d = kkt_solve(&KktProblem::ease(&inst.f, lambda_t))?;
    let add_b = c * beta + d * (1.0 - beta);

    let sem_p = KktProblem::ease(&inst.f, lambda_f);
    let sem_b = kkt_solve(&sem_p)?;

    let s = fit_semantic_ease(&f, lambda_f)?;
    let l3_p = KktProblem::l3ae(&inst.x, &sem_b, lambda_x, lambda_kd);
    let l3_b = kkt_solve(&l3_p)?;

    Ok(vec![
        ModelPair { model: "ease", closed: fit_ease(&x, lambda)?, oracle: ease_b, problem: Some(ease_p) },
        ModelPair { model: "collective", closed: fit_collective(&x, &f, alpha, lambda)?, oracle: col_b, problem: Some(col_p) },
        ModelPair { model: "additive", closed: fit_additive(&x, &f, lambda_x, lambda_t, beta)?, oracle: add_b, problem: None },
        ModelPair { model: "semantic", closed: s.clone(), oracle: sem_b, problem: Some(sem_p) },
        ModelPair { model: "l3ae", closed: fit_l3ae(&x, &s, lambda_x, lambda_kd)?, oracle: l3_b, problem: Some(l3_p) },
    ])
}

#[derive(Debug, Clone, Serialize)]
pub struct AuditRow {
    pub check: String,
    pub cases: usize,
    pub worst: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct AuditReport {
    pub seed: u64,
    pub rows: Vec<AuditRow>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.passed)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("check\tcases\tworst\ttolerance\tstatus\n");
        for r in &self.rows {
            writeln!(
                out,
                "{}\t{}\t{:.3e}\t{:.0e}\t{}",
                r.check,
                r.cases,
                r.worst,
                r.tolerance,
                if r.passed { "pass" } else { "FAIL" }
            )
            .unwrap();
        }
        out
    }
}

/// Per-instance measurements gathered in parallel.
struct InstanceAudit {
    kkt: Vec<(&'static str, f64)>,
    diag: f64,
    stationarity: Vec<(&'static str, f64)>,
    pgd: Vec<(&'static str, f64)>,
    dominance: f64,
}

fn audit_instance(seed: u64, gradient_steps: usize) -> Result<InstanceAudit> {
    let inst = OracleInstance::random(seed);
    let pairs = model_pairs(&inst)?;
    let mut out = InstanceAudit {
        kkt: Vec::new(),
        diag: 0.0,
        stationarity: Vec::new(),
        pgd: Vec::new(),
        dominance: f64::NEG_INFINITY,
    };
    for pair in &pairs {
        out.kkt.push((pair.model, pair.max_diff()));
        out.diag = out.diag.max(pair.closed.max_abs_diag());
        if let Some(problem) = &pair.problem {
            if matches!(pair.model, "ease" | "l3ae") {
                out.stationarity.push((pair.model, problem.stationarity_residual(&pair.closed.values)));
            }
            let gap = problem.objective(&pair.closed.values) - problem.objective(&pair.oracle);
            out.dominance = out.dominance.max(gap);
            if gradient_steps > 0 && matches!(pair.model, "ease" | "l3ae") {
                let pg = projected_gradient(problem, gradient_steps, None)?;
                out.pgd.push((pair.model, (&pg - &pair.oracle).amax()));
            }
        }
    }
    Ok(out)
}

fn row(check: impl Into<String>, values: &[f64], tolerance: f64, strict_zero: bool) -> AuditRow {
    let worst = values.iter().copied().fold(0.0, f64::max);
    let passed = if strict_zero { worst == 0.0 } else { worst < tolerance };
    AuditRow { check: check.into(), cases: values.len(), worst, tolerance, passed }
}

/// Runs every oracle comparison on `instances` seeded problems plus the
/// metric fuzz and the 2×2 fixture.
pub fn run_audit(instances: usize, seed: u64, gradient_steps: usize) -> Result<AuditReport> {
    let results: Vec<InstanceAudit> = (0..instances as u64)
        .into_par_iter()
        .map(|i| audit_instance(seed.wrapping_add(i), gradient_steps))
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    for model in ["ease", "collective", "additive", "semantic", "l3ae"] {
        let v: Vec<f64> = results.iter().flat_map(|r| r.kkt.iter().filter(|(m, _)| *m == model).map(|(_, d)| *d)).collect();
        rows.push(row(format!("kkt/{model}"), &v, 1e-6, false));
    }
    let diag: Vec<f64> = results.iter().map(|r| r.diag).collect();
    rows.push(row("zero-diagonal", &diag, 0.0, true));
    for model in ["ease", "l3ae"] {
        let v: Vec<f64> =
            results.iter().flat_map(|r| r.stationarity.iter().filter(|(m, _)| *m == model).map(|(_, d)| *d)).collect();
        rows.push(row(format!("stationarity/{model}"), &v, 1e-6, false));
    }
    let dom: Vec<f64> = results.iter().map(|r| r.dominance).collect();
    rows.push(row("objective-gap", &dom, 1e-9, false));
    if gradient_steps > 0 {
        for model in ["ease", "l3ae"] {
            let v: Vec<f64> = results.iter().flat_map(|r| r.pgd.iter().filter(|(m, _)| *m == model).map(|(_, d)| *d)).collect();
            rows.push(row(format!("gradient/{model}"), &v, 1e-4, false));
        }
    }

    let fuzz_cases = 1000;
    let mismatches = metric_fuzz(fuzz_cases, seed);
    rows.push(AuditRow {
        check: "metrics/exhaustive".into(),
        cases: fuzz_cases,
        worst: mismatches as f64,
        tolerance: 0.0,
        passed: mismatches == 0,
    });

    let fixture = fixture_error()?;
    rows.push(row("fixture/2x2", &[fixture], 1e-12, false));
    Ok(AuditReport { seed, rows })
}

/// `XᵀX = [[2,1],[1,2]]`, `λ = 1` should give off-diagonals of exactly 1/3.
fn fixture_error() -> Result<f64> {
    let x = DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 1.0, 0.0, 0.0, 1.0]);
    let b = fit_ease(&InteractionMatrix::from_dense(&x), 1.0)?;
    let expected = DMatrix::from_row_slice(2, 2, &[0.0, 1.0 / 3.0, 1.0 / 3.0, 0.0]);
    Ok((&b.values - expected).amax())
}
