//! Objective terms: bilateral per-layer InfoNCE, the dispersing
//! self-contrast, BPR, L2 regularization and the KL-to-uniform alternative.

mod contrast;

use ndarray::{Array2, ArrayView2, Axis};

pub use contrast::{cosine_contrast, ContrastOutput};

use crate::error::{Error, Result};
use crate::propagation::{BranchStack, ModelParams, Side, SideStack};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub lambda_c: f64,
    pub lambda_d: f64,
    pub lambda_r: f64,
    pub tau_c: f64,
    pub tau_d: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { lambda_c: 0.1, lambda_d: 1.0, lambda_r: 1e-2, tau_c: 0.1, tau_d: 1.0 }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, t) in [("tau_c", self.tau_c), ("tau_d", self.tau_d)] {
            if !(t > 0.0) || !t.is_finite() {
                return Err(Error::Config { key: name.into(), message: format!("temperature must be > 0, got {t}") });
            }
        }
        for (name, w) in [("lambda_c", self.lambda_c), ("lambda_d", self.lambda_d), ("lambda_r", self.lambda_r)] {
            if !(w >= 0.0) || !w.is_finite() {
                return Err(Error::Config { key: name.into(), message: format!("weight must be >= 0, got {w}") });
            }
        }
        Ok(())
    }
}

/// Unweighted values of each objective term.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossParts {
    pub rec: f64,
    pub cl_user: f64,
    pub cl_item: f64,
    pub disp: f64,
    pub reg: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossBreakdown {
    pub rec: f64,
    pub cl_user: f64,
    pub cl_item: f64,
    pub disp: f64,
    pub reg: f64,
    pub total: f64,
}

/// `rec + λ_c (cl_user + cl_item) + λ_d disp + λ_r reg`.
pub fn total_loss(parts: LossParts, weights: &LossWeights) -> LossBreakdown {
    let total = parts.rec
        + weights.lambda_c * (parts.cl_user + parts.cl_item)
        + weights.lambda_d * parts.disp
        + weights.lambda_r * parts.reg;
    LossBreakdown {
        rec: parts.rec,
        cl_user: parts.cl_user,
        cl_item: parts.cl_item,
        disp: parts.disp,
        reg: parts.reg,
        total,
    }
}

pub(crate) fn gather_rows(m: &Array2<f64>, rows: &[usize]) -> Array2<f64> {
    m.select(Axis(0), rows)
}

fn check_nodes(nodes: &[usize], len: usize, what: &'static str) -> Result<()> {
    if nodes.is_empty() {
        return Err(Error::InvalidArgument(format!("{what} node set is empty")));
    }
    if let Some(&bad) = nodes.iter().find(|&&k| k >= len) {
        return Err(Error::IndexOutOfRange { what, index: bad, len });
    }
    Ok(())
}

fn check_tau(tau: f64) -> Result<()> {
    if !(tau > 0.0) {
        return Err(Error::InvalidArgument(format!("temperature must be > 0, got {tau}")));
    }
    Ok(())
}

/// Layer-wise InfoNCE between two side stacks, summed over layers `1..=L`
/// and over `nodes`; negatives for each node are the other view's rows of
/// the same node set.
pub fn infonce_side(anchor: &SideStack, other: &SideStack, nodes: &[usize], tau: f64) -> Result<f64> {
    check_tau(tau)?;
    if anchor.num_layers() != other.num_layers() {
        return Err(Error::InvalidArgument(format!(
            "contrast views have {} and {} layers",
            anchor.num_layers(),
            other.num_layers()
        )));
    }
    let rows = anchor.readouts[0].nrows();
    check_nodes(nodes, rows, "contrast nodes")?;
    if other.readouts[0].nrows() != rows {
        return Err(Error::shape("contrast views", anchor.readouts[0].dim(), other.readouts[0].dim()));
    }
    Ok(anchor
        .layers
        .iter()
        .zip(&other.layers)
        .map(|(a, o)| cosine_contrast(gather_rows(a, nodes).view(), gather_rows(o, nodes).view(), tau, false).loss)
        .sum())
}

/// Contrast of one side of `anchor_stack` (the plain GCN view) against the
/// same side of `other_stack`.
pub fn infonce_bilateral(
    anchor_stack: &BranchStack,
    other_stack: &BranchStack,
    side: Side,
    node_set: &[usize],
    tau_c: f64,
) -> Result<f64> {
    infonce_side(anchor_stack.side(side), other_stack.side(side), node_set, tau_c)
}

/// Self-contrast of the rows of `readout`: every row is its own positive and
/// all rows are negatives.
pub fn dispersing_loss(readout: ArrayView2<'_, f64>, tau_d: f64) -> Result<f64> {
    check_tau(tau_d)?;
    if readout.nrows() == 0 {
        return Err(Error::InvalidArgument("dispersing loss needs at least one row".into()));
    }
    Ok(cosine_contrast(readout, readout, tau_d, false).loss)
}

/// Stacks the chosen user rows above the chosen item rows.
pub fn stack_readout(user: &Array2<f64>, item: &Array2<f64>, users: &[usize], items: &[usize]) -> Array2<f64> {
    let mut out = gather_rows(user, users);
    out.append(Axis(0), gather_rows(item, items).view()).expect("equal widths");
    out
}

/// `log(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `Σ -log σ(pos - neg)`.
pub fn bpr_loss(pos_scores: &[f64], neg_scores: &[f64]) -> Result<f64> {
    if pos_scores.len() != neg_scores.len() || pos_scores.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "bpr needs equal non-empty score lists, got {} and {}",
            pos_scores.len(),
            neg_scores.len()
        )));
    }
    Ok(pos_scores.iter().zip(neg_scores).map(|(p, n)| softplus(-(p - n))).sum())
}

/// Squared Frobenius norm over all trainable tensors.
pub fn l2_regularization(params: &ModelParams) -> f64 {
    params.tensors().iter().map(|t| t.iter().map(|x| x * x).sum::<f64>()).sum()
}

/// Mean over columns of `KL(softmax(column) ‖ uniform)`, plus the gradient
/// with respect to `readout`.
pub(crate) fn kl_uniform_with_grad(readout: ArrayView2<'_, f64>, with_grad: bool) -> (f64, Option<Array2<f64>>) {
    let (n, d) = readout.dim();
    let ln_n = (n as f64).ln();
    let mut total = 0.0;
    let mut grad = with_grad.then(|| Array2::zeros((n, d)));
    for (c, col) in readout.columns().into_iter().enumerate() {
        let max = col.fold(f64::NEG_INFINITY, |m, &x| m.max(x));
        let lse = max + col.iter().map(|&x| (x - max).exp()).sum::<f64>().ln();
        let log_p: Vec<f64> = col.iter().map(|&x| x - lse).collect();
        let neg_entropy: f64 = log_p.iter().map(|&lp| lp.exp() * lp).sum();
        total += neg_entropy + ln_n;
        if let Some(g) = grad.as_mut() {
            for (r, &lp) in log_p.iter().enumerate() {
                g[[r, c]] = lp.exp() * (lp - neg_entropy) / d as f64;
            }
        }
    }
    (total / d as f64, grad)
}

/// Distance of the per-dimension node distribution from uniform; a drop-in
/// alternative to the dispersing loss.
pub fn kl_uniform_loss(readout: ArrayView2<'_, f64>) -> Result<f64> {
    if readout.nrows() < 2 || readout.ncols() == 0 {
        return Err(Error::InvalidArgument(format!("KL loss needs >= 2 rows and >= 1 column, got {:?}", readout.dim())));
    }
    Ok(kl_uniform_with_grad(readout, false).0)
}
