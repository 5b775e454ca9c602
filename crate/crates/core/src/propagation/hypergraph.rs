//! Low-rank hypergraph branch.
//!
//! At layer `l` a side's hyperedge incidence is `Ĥ = X W` with `X` the GCN
//! readout after layer `l - 1`, and the layer output is
//! `LeakyReLU(Ĥ (Ĥᵀ X))`. The product is evaluated as two H-wide matrix
//! products so the n x n matrix `Ĥ Ĥᵀ` is never formed.

use ndarray::Array2;

use super::stack::SideStack;
use crate::error::{Error, Result};

pub fn leaky_relu(x: f64, slope: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        slope * x
    }
}

/// Derivative of [`leaky_relu`]; the subgradient at 0 is `slope`.
pub fn leaky_relu_grad(x: f64, slope: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        slope
    }
}

pub(crate) struct HyperLayer {
    pub incidence: Array2<f64>,
    pub hub: Array2<f64>,
    pub pre: Array2<f64>,
}

pub(crate) fn hyper_layer(x: &Array2<f64>, w: &Array2<f64>) -> HyperLayer {
    let incidence = x.dot(w);
    let hub = incidence.t().dot(x);
    let pre = incidence.dot(&hub);
    HyperLayer { incidence, hub, pre }
}

fn check(w: &Array2<f64>, gcn_side: &SideStack, layers: usize) -> Result<()> {
    if gcn_side.num_layers() < layers {
        return Err(Error::InvalidArgument(format!(
            "hypergraph branch needs {layers} layers of GCN readouts, stack has {}",
            gcn_side.num_layers()
        )));
    }
    let dim = gcn_side.readouts[0].ncols();
    if w.nrows() != dim {
        return Err(Error::shape("hyperedge matrix", (dim, w.ncols()), w.dim()));
    }
    Ok(())
}

/// Hypergraph stack for one side. The readouts start from the GCN side's
/// base embeddings and accumulate the hypergraph layer outputs.
pub fn hypergraph_side(w: &Array2<f64>, gcn_side: &SideStack, layers: usize, slope: f64) -> Result<SideStack> {
    check(w, gcn_side, layers)?;
    let mut out = SideStack::from_base(gcn_side.readouts[0].clone());
    for l in 1..=layers {
        let pre = hyper_layer(&gcn_side.readouts[l - 1], w).pre;
        out.push(pre.mapv(|x| leaky_relu(x, slope)));
    }
    Ok(out)
}

/// Adjoint of [`hypergraph_side`] given gradients on the layer outputs.
/// Returns the gradient on `w` and on GCN readouts `0..layers`.
pub(crate) fn hypergraph_side_backward(
    w: &Array2<f64>,
    gcn_side: &SideStack,
    slope: f64,
    grad_layers: &[Option<Array2<f64>>],
) -> (Array2<f64>, Vec<Option<Array2<f64>>>) {
    let mut grad_w = Array2::zeros(w.dim());
    let mut grad_inputs = Vec::with_capacity(grad_layers.len());
    for (idx, g) in grad_layers.iter().enumerate() {
        let Some(g) = g else {
            grad_inputs.push(None);
            continue;
        };
        let x = &gcn_side.readouts[idx];
        let HyperLayer { incidence, hub, pre } = hyper_layer(x, w);
        let mut g_pre = g.clone();
        g_pre.zip_mut_with(&pre, |gp, &p| *gp *= leaky_relu_grad(p, slope));
        let mut g_incidence = g_pre.dot(&hub.t());
        let g_hub = incidence.t().dot(&g_pre);
        g_incidence += &x.dot(&g_hub.t());
        let mut g_x = incidence.dot(&g_hub);
        g_x += &g_incidence.dot(&w.t());
        grad_w += &x.t().dot(&g_incidence);
        grad_inputs.push(Some(g_x));
    }
    (grad_w, grad_inputs)
}
