use std::sync::Arc;

use crate::datasets::InteractionMatrix;
use crate::error::Result;
use crate::linalg::{ridge_inverse, zero_diag_finish, GramMatrix, GramSource};

use super::{require_positive, Hyperparams, ItemWeightMatrix};

/// EASE on an arbitrary Gram matrix: `I − P · diagMat(1 ⊘ diag(P))`,
/// `P = (G + λI)⁻¹`.
pub fn ease_from_gram(
    gram: &GramMatrix,
    lambda: f64,
    model: &str,
    hyperparams: Hyperparams,
    item_ids: Arc<[String]>,
) -> Result<ItemWeightMatrix> {
    require_positive("lambda", lambda)?;
    let ws = ridge_inverse(gram, lambda)?;
    let values = zero_diag_finish(&ws.p)?;
    Ok(ItemWeightMatrix {
        values,
        zero_diag: true,
        model: model.to_string(),
        hyperparams,
        item_ids,
    })
}

/// Interaction-only EASE.
pub fn fit_ease(x: &InteractionMatrix, lambda: f64) -> Result<ItemWeightMatrix> {
    require_positive("lambda", lambda)?;
    let g = x.gram()?;
    ease_from_gram(
        &g,
        lambda,
        "ease",
        Hyperparams {
            lambda: Some(lambda),
            ..Default::default()
        },
        x.item_ids().clone(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use nalgebra::DMatrix;

    #[test]
    fn orthogonal_items_have_no_weights() {
        // two users, each with one distinct item: XᵀX = I
        let x = InteractionMatrix::from_dense(&DMatrix::identity(2, 2));
        let b = fit_ease(&x, 1.0).unwrap();
        assert_eq!(b.values, DMatrix::zeros(2, 2));
    }

    #[test]
    fn two_by_two_closed_form() {
        // rows (1,1), (1,0), (0,1) give XᵀX = [[2,1],[1,2]]
        let x = InteractionMatrix::from_dense(&DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 1.0, 0.0, 0.0, 1.0]));
        let b = fit_ease(&x, 1.0).unwrap();
        let third = 1.0 / 3.0;
        assert!((b.values[(0, 1)] - third).abs() < 1e-12);
        assert!((b.values[(1, 0)] - third).abs() < 1e-12);
        assert_eq!(b.max_abs_diag(), 0.0);
        assert_eq!(b.model, "ease");
        assert_eq!(b.hyperparams.lambda, Some(1.0));
    }

    #[test]
    fn huge_lambda_shrinks_to_zero() {
        let x = InteractionMatrix::from_dense(&DMatrix::from_fn(6, 4, |u, i| ((u + i) % 3 == 0) as u8 as f64));
        let g = x.gram().unwrap();
        let b = fit_ease(&x, 1e9).unwrap();
        assert!(b.values.amax() < 1e-6 * g.max_abs());
    }

    #[test]
    fn rejects_non_positive_lambda() {
        let x = InteractionMatrix::from_dense(&DMatrix::identity(2, 2));
        assert!(matches!(fit_ease(&x, 0.0), Err(Error::Param(_))));
    }
}
