//! Dense symmetric linear algebra behind every closed-form fit.
//!
//! All solves run in `f64`. The ridge-regularized Gram matrix `G + λI` is
//! symmetric positive definite for `λ > 0`, so it is inverted through a
//! Cholesky factorization rather than a general LU.

use std::sync::atomic::{AtomicU64, Ordering};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Default ceiling for the dense solver working set (16 GiB).
pub const DEFAULT_MEMORY_CAP: u64 = 16 * 1024 * 1024 * 1024;

static MEMORY_CAP: AtomicU64 = AtomicU64::new(DEFAULT_MEMORY_CAP);

/// Process-wide cap on the dense solver working set, in bytes.
pub fn memory_cap() -> u64 {
    MEMORY_CAP.load(Ordering::Relaxed)
}

pub fn set_memory_cap(bytes: u64) {
    MEMORY_CAP.store(bytes, Ordering::Relaxed);
}

/// Refuses `n` when three dense `n x n` f64 matrices would exceed `cap`.
pub fn check_memory(n: usize, cap: u64) -> Result<()> {
    let needed = 3u128 * (n as u128) * (n as u128) * 8;
    if needed > cap as u128 {
        return Err(Error::MemoryCap { n, needed, cap });
    }
    Ok(())
}

/// `MᵀM` for some `rows x n` source matrix. Exactly symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    pub values: DMatrix<f64>,
    /// Row count of the matrix the Gram was built from.
    pub source_rank_hint: usize,
}

impl GramMatrix {
    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    /// `self + weight * other`, used for collective fusion (`XᵀX + α MᵀM`).
    pub fn add_scaled(&self, other: &GramMatrix, weight: f64) -> Result<GramMatrix> {
        if self.n() != other.n() {
            return Err(Error::Dimension(format!(
                "gram sizes differ: {} vs {}",
                self.n(),
                other.n()
            )));
        }
        let mut values = self.values.clone();
        values.zip_apply(&other.values, |a, b| *a += weight * b);
        Ok(GramMatrix {
            values,
            source_rank_hint: self.source_rank_hint + other.source_rank_hint,
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.values.amax()
    }
}

/// Anything that can produce its own Gram matrix `MᵀM` over columns.
pub trait GramSource {
    fn gram(&self) -> Result<GramMatrix>;
}

impl GramSource for DMatrix<f64> {
    fn gram(&self) -> Result<GramMatrix> {
        gram_dense(self)
    }
}

/// Computes `MᵀM` for a dense matrix, mirroring the upper triangle.
pub fn gram_dense(m: &DMatrix<f64>) -> Result<GramMatrix> {
    if m.ncols() == 0 {
        return Err(Error::Data("gram of a matrix with no columns".into()));
    }
    if let Some(pos) = m.iter().position(|v| !v.is_finite()) {
        return Err(Error::Data(format!(
            "non-finite entry at row {}, column {}",
            pos % m.nrows(),
            pos / m.nrows()
        )));
    }
    let mut values = m.tr_mul(m);
    mirror_upper(&mut values);
    Ok(GramMatrix {
        values,
        source_rank_hint: m.nrows(),
    })
}

/// Gram of a binary matrix given as sorted column-index rows.
pub fn gram_binary_rows<'a>(rows: impl Iterator<Item = &'a [u32]>, n: usize) -> Result<GramMatrix> {
    if n == 0 {
        return Err(Error::Data("gram of a matrix with no columns".into()));
    }
    let mut values = DMatrix::<f64>::zeros(n, n);
    let mut count = 0;
    for row in rows {
        count += 1;
        for (a, &i) in row.iter().enumerate() {
            // column-major: (i, j) with i <= j lives in column j
            for &j in &row[a..] {
                values[(i as usize, j as usize)] += 1.0;
            }
        }
    }
    mirror_upper(&mut values);
    Ok(GramMatrix {
        values,
        source_rank_hint: count,
    })
}

fn mirror_upper(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for j in 0..n {
        for i in (j + 1)..n {
            m[(i, j)] = m[(j, i)];
        }
    }
}

/// Regularized inverse `P = (G + λI)⁻¹` and, once a model has finished, its
/// Lagrange multipliers.
#[derive(Debug, Clone)]
pub struct ClosedFormWorkspace {
    pub p: DMatrix<f64>,
    pub mu: Option<DVector<f64>>,
    pub lambda_total: f64,
}

/// In-place lower Cholesky of a column-major SPD matrix.
///
/// Only the lower triangle is read and written.
fn cholesky_in_place(a: &mut DMatrix<f64>) -> Result<()> {
    let n = a.nrows();
    let data = a.as_mut_slice();
    let mut min_pivot = f64::INFINITY;
    for j in 0..n {
        let (done, rest) = data.split_at_mut(j * n);
        let col_j = &mut rest[..n];
        for k in 0..j {
            let col_k = &done[k * n..(k + 1) * n];
            let l_jk = col_k[j];
            if l_jk != 0.0 {
                for (dst, src) in col_j[j..].iter_mut().zip(&col_k[j..]) {
                    *dst -= l_jk * src;
                }
            }
        }
        let pivot = col_j[j];
        min_pivot = min_pivot.min(pivot);
        if !(pivot > 0.0) || !pivot.is_finite() {
            return Err(Error::Solver(format!(
                "Cholesky factorization failed at column {j}: pivot {pivot:e} (smallest pivot {min_pivot:e})"
            )));
        }
        let d = pivot.sqrt();
        col_j[j] = d;
        for v in &mut col_j[j + 1..] {
            *v /= d;
        }
    }
    Ok(())
}

/// Inverse of an SPD matrix from its lower Cholesky factor.
///
/// Computes `W = L⁻¹` column by column, then `P = WᵀW` on the upper triangle,
/// mirrored so that `P` is exactly symmetric.
fn inverse_from_cholesky(l: &DMatrix<f64>) -> DMatrix<f64> {
    let n = l.nrows();
    let ld = l.as_slice();
    let mut w = DMatrix::<f64>::zeros(n, n);
    {
        let wd = w.as_mut_slice();
        for (j, col) in wd.chunks_mut(n).enumerate() {
            col[j] = 1.0;
            for k in j..n {
                let l_col = &ld[k * n..(k + 1) * n];
                let y = col[k] / l_col[k];
                col[k] = y;
                if y != 0.0 {
                    for (dst, src) in col[k + 1..].iter_mut().zip(&l_col[k + 1..]) {
                        *dst -= y * src;
                    }
                }
            }
        }
    }
    let mut p = w.tr_mul(&w);
    mirror_upper(&mut p);
    p
}

/// `P = (G + λI)⁻¹` via Cholesky.
pub fn ridge_inverse(g: &GramMatrix, lambda_total: f64) -> Result<ClosedFormWorkspace> {
    if !(lambda_total > 0.0) || !lambda_total.is_finite() {
        return Err(Error::Param(format!(
            "ridge weight must be positive and finite, got {lambda_total}"
        )));
    }
    let n = g.n();
    check_memory(n, memory_cap())?;
    let mut a = g.values.clone();
    for i in 0..n {
        a[(i, i)] += lambda_total;
    }
    cholesky_in_place(&mut a)?;
    let p = inverse_from_cholesky(&a);
    Ok(ClosedFormWorkspace {
        p,
        mu: None,
        lambda_total,
    })
}

/// `B = I − P · diagMat(1 ⊘ diag(P))` with the diagonal written as literal zero.
pub fn zero_diag_finish(p: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = p.nrows();
    if p.ncols() != n {
        return Err(Error::Dimension(format!("P is {}x{}, expected square", n, p.ncols())));
    }
    if let Some(j) = (0..n).find(|&j| !(p[(j, j)] > 0.0)) {
        return Err(Error::Solver(format!(
            "non-positive diagonal P[{j}][{j}] = {:e}; ridge weight too small or broken input",
            p[(j, j)]
        )));
    }
    let mut b = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let pjj = p[(j, j)];
        for i in 0..n {
            let e = if i == j { 1.0 } else { 0.0 };
            b[(i, j)] = e - p[(i, j)] / pjj;
        }
        b[(j, j)] = 0.0;
    }
    Ok(b)
}

/// Singular values of `m` divided by the largest, sorted descending.
pub fn spectrum(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    if m.is_empty() || m.iter().all(|v| *v == 0.0) {
        return Err(Error::Data("spectrum of an all-zero matrix is undefined".into()));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("spectrum input has non-finite entries".into()));
    }
    let svd = if m.nrows() >= m.ncols() {
        m.clone().svd(false, false)
    } else {
        m.transpose().svd(false, false)
    };
    let mut values: Vec<f64> = svd.singular_values.iter().map(|v| v.max(0.0)).collect();
    values.sort_by(|a, b| b.total_cmp(a));
    let top = values[0];
    Ok(values.into_iter().map(|v| (v / top).clamp(0.0, 1.0)).collect())
}
