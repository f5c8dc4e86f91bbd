//! Scoring, top-k ranking over all unseen items, and Recall@k / NDCG@k with
//! head/tail popularity slices.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datasets::InteractionMatrix;
use crate::error::{Error, Result};
use crate::models::{Hyperparams, ItemWeightMatrix};

pub const DEFAULT_K: [usize; 2] = [10, 20];

/// Share of items (by training popularity) counted as head.
pub const HEAD_FRACTION: f64 = 0.2;

/// Row-access view of a weight matrix: column `i` of `bt` is row `i` of `B`.
pub struct Scorer {
    bt: DMatrix<f64>,
}

impl Scorer {
    pub fn new(weights: &ItemWeightMatrix) -> Self {
        Self { bt: weights.values.transpose() }
    }

    pub fn n_items(&self) -> usize {
        self.bt.nrows()
    }

    /// `s_u = X_u* · B`, with `mask` items set to `-inf`.
    pub fn score(&self, history: &[u32], mask: &[u32]) -> Vec<f64> {
        let n = self.n_items();
        let mut scores = vec![0.0; n];
        let data = self.bt.as_slice();
        for &i in history {
            let row = &data[i as usize * n..(i as usize + 1) * n];
            for (s, w) in scores.iter_mut().zip(row) {
                *s += w;
            }
        }
        for &i in mask {
            scores[i as usize] = f64::NEG_INFINITY;
        }
        scores
    }
}

/// Dense score rows for `users`, masking each user's training items.
pub fn score_users(
    train: &InteractionMatrix,
    weights: &ItemWeightMatrix,
    users: &[usize],
) -> Result<Vec<Vec<f64>>> {
    check_dims(train, weights)?;
    let scorer = Scorer::new(weights);
    users
        .iter()
        .map(|&u| {
            if u >= train.n_users() {
                return Err(Error::Dimension(format!("user {u} out of range for {} users", train.n_users())));
            }
            Ok(scorer.score(train.row(u), train.row(u)))
        })
        .collect()
}

fn check_dims(train: &InteractionMatrix, weights: &ItemWeightMatrix) -> Result<()> {
    if weights.n() != train.n_items() {
        return Err(Error::Dimension(format!(
            "weights cover {} items, interactions have {}",
            weights.n(),
            train.n_items()
        )));
    }
    Ok(())
}

/// Orders by descending score, then ascending item index.
fn rank_cmp(scores: &[f64], a: usize, b: usize) -> std::cmp::Ordering {
    scores[b].total_cmp(&scores[a]).then(a.cmp(&b))
}

/// The `k` best items by score; ties go to the lower index. Masked (`-inf`)
/// items are never returned, so the list may be shorter than `k`.
pub fn topk(scores: &[f64], k: usize) -> Vec<usize> {
    let mut candidates: Vec<usize> = (0..scores.len()).filter(|&i| scores[i] != f64::NEG_INFINITY).collect();
    let k = k.min(candidates.len());
    if k == 0 {
        return Vec::new();
    }
    if k < candidates.len() {
        candidates.select_nth_unstable_by(k - 1, |&a, &b| rank_cmp(scores, a, b));
        candidates.truncate(k);
    }
    candidates.sort_unstable_by(|&a, &b| rank_cmp(scores, a, b));
    candidates
}

fn is_relevant(relevant: &[u32], item: usize) -> bool {
    relevant.binary_search(&(item as u32)).is_ok()
}

/// `|top-k ∩ relevant| / |relevant|`; `relevant` must be sorted and nonempty.
pub fn recall_at_k(ranked: &[usize], relevant: &[u32], k: usize) -> f64 {
    let hits = ranked.iter().take(k).filter(|&&i| is_relevant(relevant, i)).count();
    hits as f64 / relevant.len() as f64
}

/// Binary-gain NDCG with the ideal list truncated at `min(k, |relevant|)`.
pub fn ndcg_at_k(ranked: &[usize], relevant: &[u32], k: usize) -> f64 {
    let mut dcg = 0.0;
    for (pos, &item) in ranked.iter().take(k).enumerate() {
        if is_relevant(relevant, item) {
            dcg += 1.0 / ((pos + 2) as f64).log2();
        }
    }
    let mut idcg = 0.0;
    for pos in 0..k.min(relevant.len()) {
        idcg += 1.0 / ((pos + 2) as f64).log2();
    }
    dcg / idcg
}

/// Number of head items for `n` items: `⌈fraction · n⌉`.
pub fn head_size(n: usize, fraction: f64) -> usize {
    ((fraction * n as f64) - 1e-9).ceil().max(0.0) as usize
}

/// Head membership: the `⌈0.2·n⌉` most popular training items, ties by index.
pub fn head_items(train: &InteractionMatrix, fraction: f64) -> Vec<bool> {
    let deg = train.item_degrees();
    let mut order: Vec<usize> = (0..deg.len()).collect();
    order.sort_by(|&a, &b| deg[b].cmp(&deg[a]).then(a.cmp(&b)));
    let mut head = vec![false; deg.len()];
    for &i in order.iter().take(head_size(deg.len(), fraction)) {
        head[i] = true;
    }
    head
}

/// Neumaier-compensated sum.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut c = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

/// Everything needed to rank and score one model on one target split.
pub struct RankingRequest<'a> {
    pub train: &'a InteractionMatrix,
    pub weights: &'a ItemWeightMatrix,
    pub k_values: Vec<usize>,
    /// Items excluded per user; defaults to the training matrix.
    pub mask: &'a InteractionMatrix,
}

impl<'a> RankingRequest<'a> {
    pub fn new(train: &'a InteractionMatrix, weights: &'a ItemWeightMatrix) -> Self {
        Self {
            train,
            weights,
            k_values: DEFAULT_K.to_vec(),
            mask: train,
        }
    }

    pub fn with_k(mut self, k_values: Vec<usize>) -> Self {
        self.k_values = k_values;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceMetrics {
    pub users: usize,
    pub recall_at: BTreeMap<usize, f64>,
    pub ndcg_at: BTreeMap<usize, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: String,
    pub hyperparams: Hyperparams,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub k_values: Vec<usize>,
    /// Users with a nonempty target set.
    pub users_evaluated: usize,
    /// Evaluated users with no training history; scored as all zeros.
    pub cold_users: usize,
    /// Users skipped because their target set is empty.
    pub skipped_users: usize,
    pub slices: BTreeMap<String, SliceMetrics>,
    pub head_item_ids: Vec<String>,
}

impl EvalReport {
    pub fn overall(&self) -> &SliceMetrics {
        &self.slices["overall"]
    }

    pub fn slice(&self, name: &str) -> Option<&SliceMetrics> {
        self.slices.get(name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One row per slice: users, then R@k and N@k for each cutoff.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("slice\tusers");
        for k in &self.k_values {
            write!(out, "\tR@{k}").unwrap();
        }
        for k in &self.k_values {
            write!(out, "\tN@{k}").unwrap();
        }
        out.push('\n');
        for name in SLICES {
            let s = &self.slices[name];
            write!(out, "{name}\t{}", s.users).unwrap();
            for k in &self.k_values {
                write!(out, "\t{:.6}", s.recall_at[k]).unwrap();
            }
            for k in &self.k_values {
                write!(out, "\t{:.6}", s.ndcg_at[k]).unwrap();
            }
            out.push('\n');
        }
        out
    }
}

const SLICES: [&str; 3] = ["overall", "head", "tail"];

/// Per-user metric vectors for each slice (`None` when the restricted target set is empty).
struct UserOutcome {
    cold: bool,
    slices: [Option<Vec<(f64, f64)>>; 3],
}

/// Average-over-all evaluation of `request` against the `target` split.
pub fn evaluate(request: &RankingRequest<'_>, target: &InteractionMatrix) -> Result<EvalReport> {
    let RankingRequest { train, weights, mask, .. } = request;
    check_dims(train, weights)?;
    let n = train.n_items();
    if target.n_items() != n || mask.n_items() != n {
        return Err(Error::Dimension("target or mask item space differs from training".into()));
    }
    if target.n_users() != train.n_users() || mask.n_users() != train.n_users() {
        return Err(Error::Dimension("target or mask user space differs from training".into()));
    }
    if target.item_ids() != train.item_ids() {
        return Err(Error::Data("target split uses a different item index".into()));
    }
    let k_values = request.k_values.clone();
    if k_values.is_empty() {
        return Err(Error::Param("no cutoffs requested".into()));
    }
    if let Some(&k) = k_values.iter().find(|&&k| k == 0 || k > n) {
        return Err(Error::Param(format!("cutoff k = {k} must lie in 1..={n}")));
    }
    let k_max = *k_values.iter().max().unwrap();
    let head = head_items(train, HEAD_FRACTION);
    let scorer = Scorer::new(weights);

    let users: Vec<usize> = (0..train.n_users()).filter(|&u| !target.row(u).is_empty()).collect();
    let outcomes: Vec<UserOutcome> = users
        .par_iter()
        .map(|&u| {
            let scores = scorer.score(train.row(u), mask.row(u));
            let ranked = topk(&scores, k_max);
            let relevant = target.row(u);
            let head_rel: Vec<u32> = relevant.iter().copied().filter(|&i| head[i as usize]).collect();
            let tail_rel: Vec<u32> = relevant.iter().copied().filter(|&i| !head[i as usize]).collect();
            let metrics = |rel: &[u32]| {
                (!rel.is_empty()).then(|| {
                    k_values
                        .iter()
                        .map(|&k| (recall_at_k(&ranked, rel, k), ndcg_at_k(&ranked, rel, k)))
                        .collect::<Vec<_>>()
                })
            };
            UserOutcome {
                cold: train.row(u).is_empty(),
                slices: [metrics(relevant), metrics(&head_rel), metrics(&tail_rel)],
            }
        })
        .collect();

    let mut slices = BTreeMap::new();
    for (s, name) in SLICES.iter().enumerate() {
        let rows: Vec<&Vec<(f64, f64)>> = outcomes.iter().filter_map(|o| o.slices[s].as_ref()).collect();
        let count = rows.len();
        let mean = |f: &dyn Fn(&Vec<(f64, f64)>) -> f64| {
            if count == 0 {
                0.0
            } else {
                compensated_sum(rows.iter().map(|r| f(r))) / count as f64
            }
        };
        let mut recall_at = BTreeMap::new();
        let mut ndcg_at = BTreeMap::new();
        for (ki, &k) in k_values.iter().enumerate() {
            recall_at.insert(k, mean(&|r| r[ki].0));
            ndcg_at.insert(k, mean(&|r| r[ki].1));
        }
        slices.insert(name.to_string(), SliceMetrics { users: count, recall_at, ndcg_at });
    }

    Ok(EvalReport {
        model: weights.model.clone(),
        hyperparams: weights.hyperparams,
        seed: None,
        k_values,
        users_evaluated: users.len(),
        cold_users: outcomes.iter().filter(|o| o.cold).count(),
        skipped_users: train.n_users() - users.len(),
        slices,
        head_item_ids: (0..n).filter(|&i| head[i]).map(|i| train.item_ids()[i].clone()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::sync::Arc;

    fn weights(values: DMatrix<f64>) -> ItemWeightMatrix {
        let n = values.nrows();
        ItemWeightMatrix {
            values,
            zero_diag: true,
            model: "test".into(),
            hyperparams: Hyperparams::default(),
            item_ids: (0..n).map(|i| format!("i{i}")).collect::<Arc<[String]>>(),
        }
    }

    fn matrix(n_items: usize, rows: Vec<Vec<u32>>) -> InteractionMatrix {
        let users: Arc<[String]> = (0..rows.len()).map(|u| format!("u{u}")).collect();
        let items: Arc<[String]> = (0..n_items).map(|i| format!("i{i}")).collect();
        InteractionMatrix::from_rows(users, items, rows).unwrap()
    }

    #[test]
    fn scoring_examples() {
        let third = 1.0 / 3.0;
        let b = weights(DMatrix::from_row_slice(2, 2, &[0.0, third, third, 0.0]));
        let train = matrix(2, vec![vec![0], vec![]]);
        let s = score_users(&train, &b, &[0, 1]).unwrap();
        assert_eq!(s[0], vec![f64::NEG_INFINITY, third]);
        assert_eq!(s[1], vec![0.0, 0.0]);

        let zero = weights(DMatrix::zeros(2, 2));
        let s = score_users(&matrix(2, vec![vec![1]]), &zero, &[0]).unwrap();
        assert_eq!(s[0], vec![0.0, f64::NEG_INFINITY]);
    }

    #[test]
    fn scoring_dimension_mismatch() {
        let b = weights(DMatrix::zeros(3, 3));
        assert!(matches!(score_users(&matrix(2, vec![vec![0]]), &b, &[0]), Err(Error::Dimension(_))));
    }

    #[test]
    fn topk_examples() {
        assert_eq!(topk(&[0.5, 0.9, 0.1], 2), vec![1, 0]);
        assert_eq!(topk(&[0.3, 0.3, 0.3], 2), vec![0, 1]);
        assert_eq!(topk(&[f64::NEG_INFINITY, -5.0, 0.0], 3), vec![2, 1]);
        assert!(topk(&[1.0], 0).is_empty());
    }

    #[test]
    fn recall_examples() {
        // a = 0, b = 1, x/y/z = 2/3/4
        assert_eq!(recall_at_k(&[0, 2, 1], &[0, 1], 3), 1.0);
        assert_eq!(recall_at_k(&[2, 3, 4], &[0, 1], 3), 0.0);
        assert_eq!(recall_at_k(&[1, 0], &[0, 1], 10), 1.0);
        assert_eq!(recall_at_k(&[0, 2, 1], &[0, 1], 1), 0.5);
    }

    #[test]
    fn ndcg_examples() {
        let expected = (1.0 + 1.0 / 4f64.log2()) / (1.0 + 1.0 / 3f64.log2());
        let got = ndcg_at_k(&[0, 2, 1], &[0, 1], 3);
        assert!((got - expected).abs() < 1e-15);
        assert!((got - 0.9197).abs() < 1e-4);
        assert_eq!(ndcg_at_k(&[1, 0, 2], &[0, 1], 3), 1.0);
        assert_eq!(ndcg_at_k(&[2, 3, 4], &[0, 1], 3), 0.0);
    }

    #[test]
    fn head_examples() {
        assert_eq!(head_size(10, 0.2), 2);
        assert_eq!(head_size(15, 0.2), 3);
        assert_eq!(head_size(11, 0.2), 3);
        // uniform popularity: the first ⌈0.2n⌉ indices
        let train = matrix(10, vec![(0..10).collect()]);
        let head = head_items(&train, 0.2);
        assert_eq!(head.iter().filter(|h| **h).count(), 2);
        assert!(head[0] && head[1]);
    }

    #[test]
    fn tail_only_user_excluded_from_head_slice() {
        // 10 items; items 0 and 1 are most popular (head)
        let train = matrix(
            10,
            vec![vec![0, 1, 2], vec![0, 1, 3], vec![0, 1, 4]],
        );
        let test = matrix(10, vec![vec![5], vec![6, 0], vec![]]);
        let b = weights(DMatrix::zeros(10, 10));
        let report = evaluate(&RankingRequest::new(&train, &b).with_k(vec![2, 5]), &test).unwrap();
        assert_eq!(report.users_evaluated, 2);
        assert_eq!(report.skipped_users, 1);
        assert_eq!(report.slice("head").unwrap().users, 1);
        assert_eq!(report.slice("tail").unwrap().users, 2);
        assert_eq!(report.head_item_ids, vec!["i0".to_string(), "i1".to_string()]);
        // user 0 masks 0,1,2 so zero scores rank 3,4,5,... : item 5 is 3rd
        let u0 = recall_at_k(&[3, 4, 5, 6, 7], &[5], 5);
        // user 1 masks 0,1,3 → ranks 2,4,5,6,7: hit 6 (tail), 0 is masked
        let u1 = recall_at_k(&[2, 4, 5, 6, 7], &[0, 6], 5);
        assert!((report.overall().recall_at[&5] - (u0 + u1) / 2.0).abs() < 1e-15);
        assert_eq!(report.slice("head").unwrap().recall_at[&5], 0.0);
        assert_eq!(report.slice("tail").unwrap().recall_at[&5], 1.0);
    }

    #[test]
    fn perfect_weights_give_full_recall() {
        // each user's history item maps straight to their held-out item
        let train = matrix(4, vec![vec![0], vec![2]]);
        let test = matrix(4, vec![vec![1], vec![3]]);
        let mut v = DMatrix::zeros(4, 4);
        v[(0, 1)] = 1.0;
        v[(2, 3)] = 1.0;
        let r = evaluate(&RankingRequest::new(&train, &weights(v)).with_k(vec![1]), &test).unwrap();
        assert_eq!(r.overall().recall_at[&1], 1.0);
        assert_eq!(r.overall().ndcg_at[&1], 1.0);
    }

    #[test]
    fn k_beyond_items_rejected() {
        let train = matrix(3, vec![vec![0]]);
        let test = matrix(3, vec![vec![1]]);
        let b = weights(DMatrix::zeros(3, 3));
        let err = evaluate(&RankingRequest::new(&train, &b).with_k(vec![4]), &test).unwrap_err();
        assert!(matches!(err, Error::Param(_)));
    }

    #[test]
    fn cold_users_counted() {
        let train = matrix(3, vec![vec![], vec![0]]);
        let test = matrix(3, vec![vec![1], vec![2]]);
        let b = weights(DMatrix::zeros(3, 3));
        let r = evaluate(&RankingRequest::new(&train, &b).with_k(vec![1]), &test).unwrap();
        assert_eq!(r.cold_users, 1);
        assert_eq!(r.users_evaluated, 2);
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let v = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(compensated_sum(v), 2.0);
    }

    #[test]
    fn tsv_has_header_and_slices() {
        let train = matrix(3, vec![vec![0]]);
        let test = matrix(3, vec![vec![1]]);
        let b = weights(DMatrix::zeros(3, 3));
        let r = evaluate(&RankingRequest::new(&train, &b).with_k(vec![1, 2]), &test).unwrap();
        let tsv = r.to_tsv();
        let lines: Vec<_> = tsv.lines().collect();
        assert_eq!(lines[0], "slice\tusers\tR@1\tR@2\tN@1\tN@2");
        assert_eq!(lines.len(), 4);
    }

    proptest! {
        #[test]
        fn metrics_bounded_and_recall_monotone(
            scores in proptest::collection::vec(-4i32..4, 1..40),
            rel_mask in proptest::collection::vec(any::<bool>(), 40),
        ) {
            let scores: Vec<f64> = scores.into_iter().map(|s| s as f64 / 4.0).collect();
            let n = scores.len();
            let relevant: Vec<u32> = (0..n as u32).filter(|&i| rel_mask[i as usize]).collect();
            prop_assume!(!relevant.is_empty());
            let ranked = topk(&scores, n);
            let mut prev = 0.0;
            for k in 1..=n {
                let r = recall_at_k(&ranked, &relevant, k);
                let g = ndcg_at_k(&ranked, &relevant, k);
                prop_assert!((0.0..=1.0).contains(&r));
                prop_assert!((0.0..=1.0 + 1e-12).contains(&g));
                prop_assert!(r >= prev);
                prev = r;
            }
        }

        #[test]
        fn shifting_scores_keeps_ranking(
            scores in proptest::collection::vec(-8i32..8, 1..40),
            shift in -16i32..16,
            k in 1usize..40,
        ) {
            let a: Vec<f64> = scores.iter().map(|&s| s as f64 * 0.125).collect();
            let b: Vec<f64> = a.iter().map(|s| s + shift as f64).collect();
            prop_assert_eq!(topk(&a, k), topk(&b, k));
        }
    }
}
