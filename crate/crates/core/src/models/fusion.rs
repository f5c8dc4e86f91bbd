//! Collective and additive fusion of interactions with a feature source
//! (tags `T` or semantic embeddings `F`).

use crate::datasets::{FeatureKind, FeatureMatrix, InteractionMatrix};
use crate::error::{Error, Result};
use crate::linalg::GramSource;

use super::{ease_from_gram, fit_ease, require_non_negative, require_positive, Hyperparams, ItemWeightMatrix};

fn fused_name(base: &str, kind: FeatureKind) -> String {
    match kind {
        FeatureKind::Tag => base.to_string(),
        FeatureKind::Semantic => format!("llm-{base}"),
    }
}

/// One weight matrix reconstructing both `X` and `√α·M`.
///
/// Solved on `XᵀX + α·MᵀM`, which is the Gram of the stacked design matrix
/// without materializing it.
pub fn fit_collective(
    x: &InteractionMatrix,
    features: &FeatureMatrix,
    alpha: f64,
    lambda: f64,
) -> Result<ItemWeightMatrix> {
    features.check_aligned(x)?;
    require_non_negative("alpha", alpha)?;
    require_positive("lambda", lambda)?;
    let g = x.gram()?.add_scaled(&features.gram()?, alpha)?;
    ease_from_gram(
        &g,
        lambda,
        &fused_name("cease", features.kind),
        Hyperparams {
            lambda: Some(lambda),
            alpha: Some(alpha),
            ..Default::default()
        },
        x.item_ids().clone(),
    )
}

/// `β·C + (1−β)·D`. The endpoints return a parent unchanged.
pub fn blend(c: &ItemWeightMatrix, d: &ItemWeightMatrix, beta: f64) -> Result<ItemWeightMatrix> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::Param(format!("beta must lie in [0, 1], got {beta}")));
    }
    if c.n() != d.n() {
        return Err(Error::Dimension(format!("cannot blend {}x{} with {}x{}", c.n(), c.n(), d.n(), d.n())));
    }
    let values = if beta == 1.0 {
        c.values.clone()
    } else if beta == 0.0 {
        d.values.clone()
    } else {
        c.values.zip_map(&d.values, |a, b| beta * a + (1.0 - beta) * b)
    };
    Ok(ItemWeightMatrix {
        values,
        zero_diag: c.zero_diag && d.zero_diag,
        model: String::new(),
        hyperparams: Hyperparams::default(),
        item_ids: c.item_ids.clone(),
    })
}

/// Separate fits on interactions (`λ_X`) and features (`λ_T`), interpolated by `β`.
pub fn fit_additive(
    x: &InteractionMatrix,
    features: &FeatureMatrix,
    lambda_x: f64,
    lambda_t: f64,
    beta: f64,
) -> Result<ItemWeightMatrix> {
    features.check_aligned(x)?;
    require_positive("lambda_x", lambda_x)?;
    require_positive("lambda_t", lambda_t)?;
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::Param(format!("beta must lie in [0, 1], got {beta}")));
    }
    let c = fit_ease(x, lambda_x)?;
    let d = ease_from_gram(&features.gram()?, lambda_t, "feature-ease", Hyperparams::default(), x.item_ids().clone())?;
    let mut b = blend(&c, &d, beta)?;
    b.model = fused_name("add-ease", features.kind);
    b.hyperparams = Hyperparams {
        lambda_x: Some(lambda_x),
        lambda_t: Some(lambda_t),
        beta: Some(beta),
        ..Default::default()
    };
    Ok(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::build_tag_matrix;
    use crate::linalg::gram_dense;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_x(rng: &mut ChaCha8Rng, m: usize, n: usize) -> InteractionMatrix {
        InteractionMatrix::from_dense(&DMatrix::from_fn(m, n, |_, _| rng.gen_bool(0.3) as u8 as f64))
    }

    fn random_f(rng: &mut ChaCha8Rng, d: usize, x: &InteractionMatrix) -> FeatureMatrix {
        let values = DMatrix::from_fn(d, x.n_items(), |_, _| rng.gen_range(-1.0..1.0));
        FeatureMatrix::semantic(values, x.item_ids().clone()).unwrap()
    }

    #[test]
    fn alpha_zero_matches_ease() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random_x(&mut rng, 20, 6);
        let f = random_f(&mut rng, 4, &x);
        let col = fit_collective(&x, &f, 0.0, 2.0).unwrap();
        let ease = fit_ease(&x, 2.0).unwrap();
        assert!((&col.values - &ease.values).amax() < 1e-12);
        assert_eq!(col.model, "llm-cease");
    }

    #[test]
    fn stacked_gram_is_sum_of_grams() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = random_x(&mut rng, 15, 5);
        let f = random_f(&mut rng, 3, &x);
        let alpha: f64 = 2.5;
        let xd = x.to_dense();
        let stacked = DMatrix::from_fn(15 + 3, 5, |r, c| {
            if r < 15 { xd[(r, c)] } else { alpha.sqrt() * f.values[(r - 15, c)] }
        });
        let explicit = gram_dense(&stacked).unwrap();
        let additive = x.gram().unwrap().add_scaled(&f.gram().unwrap(), alpha).unwrap();
        assert!((&explicit.values - &additive.values).amax() < 1e-12);
    }

    #[test]
    fn no_interaction_signal_reduces_to_feature_ease() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = InteractionMatrix::from_dense(&DMatrix::zeros(4, 5));
        let f = random_f(&mut rng, 3, &x);
        let col = fit_collective(&x, &f, 1.0, 0.7).unwrap();
        let only_f = ease_from_gram(&f.gram().unwrap(), 0.7, "", Hyperparams::default(), x.item_ids().clone()).unwrap();
        assert!((&col.values - &only_f.values).amax() < 1e-12);
    }

    #[test]
    fn misaligned_features_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = random_x(&mut rng, 10, 4);
        let other = random_x(&mut rng, 10, 5);
        let f = random_f(&mut rng, 3, &other);
        assert!(matches!(fit_collective(&x, &f, 1.0, 1.0), Err(Error::Data(_))));
        assert!(matches!(fit_additive(&x, &f, 1.0, 1.0, 0.5), Err(Error::Data(_))));
    }

    #[test]
    fn additive_endpoints_and_midpoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = random_x(&mut rng, 30, 6);
        let tags: Vec<_> = x
            .item_ids()
            .iter()
            .enumerate()
            .flat_map(|(i, id)| {
                vec![(id.clone(), format!("t{}", i % 3)), (id.clone(), format!("g{}", i % 2))]
            })
            .collect();
        let t = build_tag_matrix(&tags, x.item_ids());
        let c = fit_ease(&x, 3.0).unwrap();
        let d = ease_from_gram(&t.gram().unwrap(), 1.5, "", Hyperparams::default(), x.item_ids().clone()).unwrap();

        let b1 = fit_additive(&x, &t, 3.0, 1.5, 1.0).unwrap();
        assert_eq!(b1.values, c.values);
        let b0 = fit_additive(&x, &t, 3.0, 1.5, 0.0).unwrap();
        assert_eq!(b0.values, d.values);
        let half = fit_additive(&x, &t, 3.0, 1.5, 0.5).unwrap();
        let avg = (&c.values + &d.values) * 0.5;
        assert!((&half.values - &avg).amax() < 1e-15);
        assert_eq!(half.max_abs_diag(), 0.0);
        assert_eq!(half.model, "add-ease");
    }

    #[test]
    fn beta_out_of_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = random_x(&mut rng, 10, 3);
        let f = random_f(&mut rng, 2, &x);
        assert!(matches!(fit_additive(&x, &f, 1.0, 1.0, 1.5), Err(Error::Param(_))));
    }
}
