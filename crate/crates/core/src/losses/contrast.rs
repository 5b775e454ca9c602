//! Cosine-similarity softmax contrast with its analytic gradient.
//!
//! For anchors `a_k` and others `o_k` (k = 0..n) the loss is
//! `Σ_k [ logsumexp_k' (cos(a_k, o_k') / τ) - cos(a_k, o_k) / τ ]`.
//! Rows are processed in blocks so the n x n similarity matrix is never held
//! in full.

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rayon::prelude::*;

const BLOCK_ROWS: usize = 256;

#[derive(Debug, Clone)]
pub struct ContrastOutput {
    pub loss: f64,
    pub grad_anchor: Option<Array2<f64>>,
    pub grad_other: Option<Array2<f64>>,
    /// Zero-norm rows across both inputs; their similarities are taken as 0.
    pub degenerate_rows: usize,
}

pub(crate) fn normalize_rows(x: ArrayView2<'_, f64>) -> (Array2<f64>, Array1<f64>) {
    let mut unit = x.to_owned();
    let mut norms = Array1::zeros(x.nrows());
    for (mut row, n) in unit.rows_mut().into_iter().zip(norms.iter_mut()) {
        let norm = row.dot(&row).sqrt();
        *n = norm;
        if norm > 0.0 {
            row.mapv_inplace(|v| v / norm);
        }
    }
    (unit, norms)
}

/// Chain rule through `x ↦ x / |x|`: `(g - (g·x̂) x̂) / |x|`; zero rows get 0.
fn unnormalize_grad(mut g: Array2<f64>, unit: &Array2<f64>, norms: &Array1<f64>) -> Array2<f64> {
    for ((mut gr, ur), &n) in g.rows_mut().into_iter().zip(unit.rows()).zip(norms.iter()) {
        if n > 0.0 {
            let proj = gr.dot(&ur);
            gr.zip_mut_with(&ur, |gv, &uv| *gv = (*gv - proj * uv) / n);
        } else {
            gr.fill(0.0);
        }
    }
    g
}

struct BlockResult {
    loss: f64,
    grad_anchor: Option<Array2<f64>>,
    grad_other: Option<Array2<f64>>,
}

fn contrast_block(a_unit: &Array2<f64>, o_unit: &Array2<f64>, start: usize, end: usize, tau: f64, with_grad: bool) -> BlockResult {
    let a_block = a_unit.slice(s![start..end, ..]);
    let mut sim = a_block.dot(&o_unit.t());
    let mut loss = 0.0;
    for (r, mut row) in sim.axis_iter_mut(Axis(0)).enumerate() {
        row.mapv_inplace(|x| x.clamp(-1.0, 1.0) / tau);
        let max = row.fold(f64::NEG_INFINITY, |m, &x| m.max(x));
        let diag = start + r;
        let positive = row[diag];
        row.mapv_inplace(|x| (x - max).exp());
        let sum: f64 = row.iter().sum();
        loss += max + sum.ln() - positive;
        if with_grad {
            // Softmax row scaled by 1/τ, minus 1/τ at the positive.
            let scale = 1.0 / (sum * tau);
            row.mapv_inplace(|x| x * scale);
            row[diag] -= 1.0 / tau;
        }
    }
    if !with_grad {
        return BlockResult { loss, grad_anchor: None, grad_other: None };
    }
    BlockResult {
        loss,
        grad_anchor: Some(sim.dot(o_unit)),
        grad_other: Some(sim.t().dot(&a_block)),
    }
}

/// Evaluates the contrast loss and, when `with_grad`, its gradients with
/// respect to the raw (unnormalized) anchor and other rows.
pub fn cosine_contrast(anchor: ArrayView2<'_, f64>, other: ArrayView2<'_, f64>, tau: f64, with_grad: bool) -> ContrastOutput {
    assert_eq!(anchor.dim(), other.dim(), "contrast views must have equal shape");
    let n = anchor.nrows();
    let (a_unit, a_norm) = normalize_rows(anchor);
    let (o_unit, o_norm) = normalize_rows(other);
    let degenerate_rows = a_norm.iter().chain(o_norm.iter()).filter(|&&x| x == 0.0).count();
    let starts: Vec<usize> = (0..n).step_by(BLOCK_ROWS).collect();
    let blocks: Vec<BlockResult> = starts
        .par_iter()
        .map(|&start| contrast_block(&a_unit, &o_unit, start, (start + BLOCK_ROWS).min(n), tau, with_grad))
        .collect();
    let loss = blocks.iter().map(|b| b.loss).sum();
    if !with_grad {
        return ContrastOutput { loss, grad_anchor: None, grad_other: None, degenerate_rows };
    }
    let mut g_a_unit = Array2::zeros(anchor.dim());
    let mut g_o_unit = Array2::zeros(other.dim());
    for (block, &start) in blocks.into_iter().zip(&starts) {
        let ga = block.grad_anchor.expect("gradient requested");
        g_a_unit.slice_mut(s![start..start + ga.nrows(), ..]).assign(&ga);
        g_o_unit += &block.grad_other.expect("gradient requested");
    }
    ContrastOutput {
        loss,
        grad_anchor: Some(unnormalize_grad(g_a_unit, &a_unit, &a_norm)),
        grad_other: Some(unnormalize_grad(g_o_unit, &o_unit, &o_norm)),
        degenerate_rows,
    }
}
