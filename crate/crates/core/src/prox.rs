//! Matrix-level proximal and projection operators used by the solver:
//! column-wise l2,1-norm shrinkage and the orthogonal Procrustes projection.

use ndarray::prelude::*;
use ndarray_linalg::SVD;
use thiserror::Error;

/// Errors raised by proximal and projection operators.
#[derive(Debug, Error)]
pub enum ProxError {
    #[error("procrustes input contains non-finite entries")]
    NonFiniteInput,
    #[error("procrustes input must be square, got {rows} × {cols}")]
    NotSquare { rows: usize, cols: usize },
}

/// Vertically stacked per-view error matrix `E ∈ (Σ dᵢ) × n` with
/// recoverable per-view row blocks.
#[derive(Debug, Clone)]
pub struct StackedError {
    e: Array2<f64>,
    /// Prefix sums of per-view row counts; `offsets[i]..offsets[i+1]` is
    /// block `i`. Always partitions the rows exactly.
    offsets: Vec<usize>,
}

impl StackedError {
    /// Wraps a stacked matrix whose row blocks have the given heights.
    /// Panics if the heights do not partition the rows exactly.
    pub fn new(e: Array2<f64>, row_counts: &[usize]) -> Self {
        let mut offsets = Vec::with_capacity(row_counts.len() + 1);
        let mut acc = 0;
        offsets.push(0);
        for &d in row_counts {
            acc += d;
            offsets.push(acc);
        }
        assert_eq!(
            acc,
            e.nrows(),
            "row counts {row_counts:?} do not partition {} rows",
            e.nrows()
        );
        Self { e, offsets }
    }

    /// All-zero stack for views of the given heights over `n` samples.
    pub fn zeros(row_counts: &[usize], n: usize) -> Self {
        let total = row_counts.iter().sum();
        Self::new(Array2::zeros((total, n)), row_counts)
    }

    pub fn num_views(&self) -> usize {
        self.offsets.len() - 1
    }

    /// The full stacked matrix.
    pub fn matrix(&self) -> &Array2<f64> {
        &self.e
    }

    /// Row block `i`, the error matrix of view `i`.
    pub fn block(&self, i: usize) -> ArrayView2<'_, f64> {
        self.e.slice(s![self.offsets[i]..self.offsets[i + 1], ..])
    }

    /// Sum of column l2 norms of the stacked matrix.
    pub fn l21_norm(&self) -> f64 {
        l21_norm(&self.e)
    }
}

/// Sum of column l2 norms.
pub fn l21_norm(m: &Array2<f64>) -> f64 {
    m.columns()
        .into_iter()
        .map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt())
        .sum()
}

/// Proximal operator of `tau·‖·‖_{2,1} + ½‖· − G‖²_F`: every column `g` with
/// `‖g‖₂ > tau` shrinks to `((‖g‖₂ − tau)/‖g‖₂)·g`, all others (including
/// the exact tie `‖g‖₂ = tau`) to zero. Panics unless `tau > 0`.
pub fn l21_prox(g: &Array2<f64>, tau: f64) -> Array2<f64> {
    assert!(tau > 0.0, "shrinkage parameter must be positive, got {tau}");
    let mut e = g.clone();
    for mut col in e.columns_mut() {
        let norm = col.iter().map(|x| x * x).sum::<f64>().sqrt();
        let scale = if norm > tau { (norm - tau) / norm } else { 0.0 };
        col.mapv_inplace(|x| x * scale);
    }
    e
}

/// Nearest orthogonal matrix to `M`: `P = U·Vᵀ` from the SVD `M = U·Σ·Vᵀ`.
/// Rank-deficient inputs are fine; the backend always completes `U` and `V`
/// to full orthogonal bases.
pub fn procrustes(m: &Array2<f64>) -> Result<Array2<f64>, ProxError> {
    if !m.is_square() {
        return Err(ProxError::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(ProxError::NonFiniteInput);
    }
    let (u, _, vt) = m
        .svd(true, true)
        .expect("SVD of a finite square matrix cannot fail");
    Ok(u.expect("U requested").dot(&vt.expect("Vᵀ requested")))
}
