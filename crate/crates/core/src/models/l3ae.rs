use nalgebra::DMatrix;

use crate::datasets::InteractionMatrix;
use crate::error::{Error, Result};
use crate::linalg::{ridge_inverse, GramMatrix, GramSource};

use super::{require_non_negative, require_positive, Hyperparams, ItemWeightMatrix};

/// Interaction fit pulled toward a precomputed semantic matrix `S`:
///
/// `min ‖X − XB‖² + λ_X‖B‖² + λ_KD‖B − S‖²  s.t. diag(B) = 0`
///
/// solved as `B = I + λ_KD·P·S − P·diagMat(μ)` with
/// `P = (XᵀX + (λ_KD + λ_X)I)⁻¹` and `μ = diag(1 + λ_KD·P·S) ⊘ diag(P)`.
pub fn fit_l3ae(
    x: &InteractionMatrix,
    s: &ItemWeightMatrix,
    lambda_x: f64,
    lambda_kd: f64,
) -> Result<ItemWeightMatrix> {
    if s.n() != x.n_items() {
        return Err(Error::Data(format!(
            "semantic matrix covers {} items, interactions have {}",
            s.n(),
            x.n_items()
        )));
    }
    let mut b = l3ae_from_gram(&x.gram()?, &s.values, lambda_x, lambda_kd)?;
    b.item_ids = x.item_ids().clone();
    b.hyperparams = Hyperparams {
        lambda_x: Some(lambda_x),
        lambda_kd: Some(lambda_kd),
        lambda_f: s.hyperparams.lambda_f,
        ..Default::default()
    };
    Ok(b)
}

/// Distillation solve on a ready Gram matrix. Item ids are left empty.
pub fn l3ae_from_gram(
    gram: &GramMatrix,
    s: &DMatrix<f64>,
    lambda_x: f64,
    lambda_kd: f64,
) -> Result<ItemWeightMatrix> {
    require_positive("lambda_x", lambda_x)?;
    require_non_negative("lambda_kd", lambda_kd)?;
    let n = gram.n();
    if s.nrows() != n || s.ncols() != n {
        return Err(Error::Data(format!("semantic matrix is {}x{}, expected {n}x{n}", s.nrows(), s.ncols())));
    }
    if let Some(j) = (0..n).find(|&j| s[(j, j)] != 0.0) {
        return Err(Error::Data(format!("semantic matrix has nonzero diagonal at {j}: {:e}", s[(j, j)])));
    }
    if s.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("semantic matrix has non-finite entries".into()));
    }

    let ws = ridge_inverse(gram, lambda_x + lambda_kd)?;
    let p = &ws.p;
    if let Some(j) = (0..n).find(|&j| !(p[(j, j)] > 0.0)) {
        return Err(Error::Solver(format!("non-positive diagonal P[{j}][{j}] = {:e}", p[(j, j)])));
    }
    // with λ_KD = 0 the distillation term vanishes and B is bitwise plain EASE
    let ps = if lambda_kd > 0.0 { Some(p * s) } else { None };

    let mut values = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let pjj = p[(j, j)];
        // μ_j · P_jj
        let numer = 1.0 + ps.as_ref().map_or(0.0, |ps| lambda_kd * ps[(j, j)]);
        for i in 0..n {
            let e = if i == j { 1.0 } else { 0.0 };
            let pull = ps.as_ref().map_or(0.0, |ps| lambda_kd * ps[(i, j)]);
            values[(i, j)] = (e + pull) - p[(i, j)] * numer / pjj;
        }
        values[(j, j)] = 0.0;
    }
    Ok(ItemWeightMatrix {
        values,
        zero_diag: true,
        model: "l3ae".to_string(),
        hyperparams: Hyperparams {
            lambda_x: Some(lambda_x),
            lambda_kd: Some(lambda_kd),
            ..Default::default()
        },
        item_ids: Vec::<String>::new().into(),
    })
}
