//! Forward branches over the bipartite graph: plain GCN with residual
//! readout, the noise-perturbed GCN, and the low-rank hypergraph GCN.

pub(crate) mod backward;
mod hypergraph;
pub(crate) mod linear;
mod params;
mod stack;

use rand::RngCore;

pub use hypergraph::{hypergraph_side, leaky_relu, leaky_relu_grad};
pub(crate) use hypergraph::{hyper_layer, hypergraph_side_backward};
pub use linear::PerturbationNoise;
pub use params::{ModelParams, PARAM_NAMES};
pub use stack::{predict_scores, BranchStack, BranchTag, Side, SideStack};

use crate::dataset::NormalizedBipartiteGraph;
use crate::error::{Error, Result};
use linear::{propagate, Noise};

pub fn forward_gcn(params: &ModelParams, graph: &NormalizedBipartiteGraph, layers: usize) -> Result<BranchStack> {
    params.check_graph(graph.num_users(), graph.num_items())?;
    let matrices = vec![&graph.adjacency; layers];
    propagate(BranchTag::Gcn, &params.e_user, &params.e_item, &matrices, Noise::None)
}

/// GCN pass with fresh sign-aligned noise of norm `radius` added to every
/// node's output at every layer. Returns the stack and the noise it used.
pub fn forward_perturbed_recorded(
    params: &ModelParams,
    graph: &NormalizedBipartiteGraph,
    layers: usize,
    radius: f64,
    rng: &mut dyn RngCore,
) -> Result<(BranchStack, PerturbationNoise)> {
    if !(radius >= 0.0) || !radius.is_finite() {
        return Err(Error::InvalidArgument(format!("noise radius must be finite and >= 0, got {radius}")));
    }
    params.check_graph(graph.num_users(), graph.num_items())?;
    let matrices = vec![&graph.adjacency; layers];
    let mut record = PerturbationNoise::default();
    let stack = propagate(
        BranchTag::Perturbed,
        &params.e_user,
        &params.e_item,
        &matrices,
        Noise::Draw { radius, rng, record: &mut record },
    )?;
    Ok((stack, record))
}

pub fn forward_perturbed(
    params: &ModelParams,
    graph: &NormalizedBipartiteGraph,
    layers: usize,
    radius: f64,
    rng: &mut dyn RngCore,
) -> Result<BranchStack> {
    forward_perturbed_recorded(params, graph, layers, radius, rng).map(|(stack, _)| stack)
}

/// Perturbed pass reusing previously drawn noise.
pub fn forward_perturbed_replay(
    params: &ModelParams,
    graph: &NormalizedBipartiteGraph,
    layers: usize,
    noise: &PerturbationNoise,
) -> Result<BranchStack> {
    params.check_graph(graph.num_users(), graph.num_items())?;
    let matrices = vec![&graph.adjacency; layers];
    propagate(BranchTag::Perturbed, &params.e_user, &params.e_item, &matrices, Noise::Replay(noise))
}

/// Hypergraph branch for both sides, driven by the GCN branch's readouts.
pub fn forward_hypergraph(params: &ModelParams, gcn_stack: &BranchStack, layers: usize, slope: f64) -> Result<BranchStack> {
    if gcn_stack.tag != BranchTag::Gcn {
        return Err(Error::InvalidArgument(format!("hypergraph branch needs a GCN stack, got {:?}", gcn_stack.tag)));
    }
    Ok(BranchStack {
        tag: BranchTag::Hypergraph,
        user: hypergraph_side(&params.w_user, &gcn_stack.user, layers, slope)?,
        item: hypergraph_side(&params.w_item, &gcn_stack.item, layers, slope)?,
    })
}

#[cfg(test)]
mod tests;
