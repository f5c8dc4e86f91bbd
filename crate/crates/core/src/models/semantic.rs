use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::datasets::{FeatureKind, FeatureMatrix};
use crate::error::{Error, Result};
use crate::linalg::GramSource;

use super::{ease_from_gram, require_positive, Hyperparams, ItemWeightMatrix};

/// Semantic item correlation `S`: EASE fitted on the embedding matrix `F`.
pub fn fit_semantic_ease(features: &FeatureMatrix, lambda_f: f64) -> Result<ItemWeightMatrix> {
    if features.kind != FeatureKind::Semantic {
        return Err(Error::Param("semantic EASE expects semantic features, got tags".into()));
    }
    require_positive("lambda_f", lambda_f)?;
    ease_from_gram(
        &features.gram()?,
        lambda_f,
        "llm-ease",
        Hyperparams {
            lambda_f: Some(lambda_f),
            ..Default::default()
        },
        features.item_ids.clone(),
    )
}

/// Pairwise cosine similarity of item columns with a zeroed diagonal.
pub fn cosine_similarity_matrix(features: &FeatureMatrix) -> Result<ItemWeightMatrix> {
    let f = &features.values;
    let n = f.ncols();
    let sq_norms: Vec<f64> = (0..n).map(|j| dot(f.column(j).as_slice(), f.column(j).as_slice())).collect();
    let zero: Vec<&str> = (0..n)
        .filter(|&j| sq_norms[j] == 0.0)
        .map(|j| features.item_ids[j].as_str())
        .collect();
    if !zero.is_empty() {
        return Err(Error::Data(format!("items with zero-norm features: {zero:?}")));
    }
    let columns: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let fj = f.column(j);
            (0..n)
                .map(|i| {
                    if i == j {
                        0.0
                    } else {
                        // sqrt of the product keeps identical columns at exactly 1
                        dot(f.column(i).as_slice(), fj.as_slice()) / (sq_norms[i] * sq_norms[j]).sqrt()
                    }
                })
                .collect()
        })
        .collect();
    let values = DMatrix::from_iterator(n, n, columns.into_iter().flatten());
    Ok(ItemWeightMatrix {
        values,
        zero_diag: true,
        model: "cosine".to_string(),
        hyperparams: Hyperparams::default(),
        item_ids: features.item_ids.clone(),
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    fn feats(d: usize, n: usize, data: &[f64]) -> FeatureMatrix {
        let ids: Arc<[String]> = (0..n).map(|i| format!("i{i}")).collect();
        FeatureMatrix::semantic(DMatrix::from_row_slice(d, n, data), ids).unwrap()
    }

    #[test]
    fn orthogonal_columns_give_zero_s() {
        let f = feats(3, 3, &[2.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 5.0]);
        let s = fit_semantic_ease(&f, 1.0).unwrap();
        assert_eq!(s.values, DMatrix::zeros(3, 3));
    }

    #[test]
    fn two_by_two_closed_form() {
        // FᵀF = [[2,1],[1,2]] with columns (1,1) and (1,0)... use a Cholesky factor instead
        let r2 = 2f64.sqrt();
        let f = feats(2, 2, &[r2, 1.0 / r2, 0.0, (1.5f64).sqrt()]);
        let g = f.gram().unwrap();
        assert!((&g.values - DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0])).amax() < 1e-14);
        let s = fit_semantic_ease(&f, 1.0).unwrap();
        assert!((s.values[(0, 1)] - 1.0 / 3.0).abs() < 1e-12);
        assert!((s.values[(1, 0)] - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(s.max_abs_diag(), 0.0);
    }

    #[test]
    fn duplicated_columns_are_mutual_best_neighbors() {
        // columns 1 and 3 identical
        let f = feats(
            3,
            4,
            &[0.9, 0.2, -0.4, 0.2, 0.1, 0.8, 0.3, 0.8, -0.5, 0.1, 0.7, 0.1],
        );
        let s = fit_semantic_ease(&f, 0.5).unwrap();
        assert!((s.values[(1, 3)] - s.values[(3, 1)]).abs() < 1e-12);
        for other in [0, 2] {
            assert!(s.values[(1, 3)] > s.values[(1, other)]);
            assert!(s.values[(3, 1)] > s.values[(3, other)]);
        }
    }

    #[test]
    fn tags_rejected_for_semantic_ease() {
        let mut f = feats(1, 2, &[1.0, 0.0]);
        f.kind = FeatureKind::Tag;
        assert!(matches!(fit_semantic_ease(&f, 1.0), Err(Error::Param(_))));
    }

    #[test]
    fn cosine_examples() {
        let f = feats(2, 3, &[1.0, 1.0, 1.0, 0.0, 1.0, 0.0]);
        let w = cosine_similarity_matrix(&f).unwrap();
        // columns 0 and 2 are identical
        assert_eq!(w.values[(0, 2)], 1.0);
        assert!((w.values[(0, 1)] - 1.0 / 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(w.max_abs_diag(), 0.0);

        let f = feats(2, 2, &[1.0, 0.0, 0.0, 3.0]);
        assert_eq!(cosine_similarity_matrix(&f).unwrap().values, DMatrix::zeros(2, 2));
    }

    #[test]
    fn cosine_rejects_zero_column() {
        let f = feats(2, 2, &[1.0, 0.0, 1.0, 0.0]);
        match cosine_similarity_matrix(&f) {
            Err(Error::Data(msg)) => assert!(msg.contains("i1"), "{msg}"),
            other => panic!("expected data error, got {other:?}"),
        }
    }
}
