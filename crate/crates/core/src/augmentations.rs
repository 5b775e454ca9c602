//! Dropout-style graph views usable in place of the hypergraph or perturbed
//! branch: node dropout, edge dropout, and per-layer edge dropout (random
//! walk).

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{BiAdjacency, NormalizedBipartiteGraph};
use crate::error::{Error, Result};
use crate::propagation::linear::{propagate, Noise};
use crate::propagation::{BranchStack, BranchTag, ModelParams};
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AugmentVariant {
    NodeDrop,
    EdgeDrop,
    RandomWalk,
}

impl AugmentVariant {
    pub fn name(self) -> &'static str {
        match self {
            AugmentVariant::NodeDrop => "node_drop",
            AugmentVariant::EdgeDrop => "edge_drop",
            AugmentVariant::RandomWalk => "random_walk",
        }
    }

    pub fn tag(self) -> BranchTag {
        match self {
            AugmentVariant::NodeDrop => BranchTag::NodeDrop,
            AugmentVariant::EdgeDrop => BranchTag::EdgeDrop,
            AugmentVariant::RandomWalk => BranchTag::RandomWalk,
        }
    }
}

impl fmt::Display for AugmentVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AugmentVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "node_drop" => Ok(AugmentVariant::NodeDrop),
            "edge_drop" => Ok(AugmentVariant::EdgeDrop),
            "random_walk" => Ok(AugmentVariant::RandomWalk),
            other => Err(Error::InvalidArgument(format!(
                "unknown augmentation `{other}` (expected node_drop, edge_drop, random_walk)"
            ))),
        }
    }
}

/// Masked copies of the normalized adjacency. Node and edge dropout hold one
/// matrix shared by every layer; random walk holds one per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedGraph {
    pub variant: AugmentVariant,
    pub rho: f64,
    pub seed: u64,
    pub renormalized: bool,
    pub matrices: Vec<BiAdjacency>,
}

impl AugmentedGraph {
    pub fn layer_matrices(&self, layers: usize) -> Result<Vec<&BiAdjacency>> {
        match self.variant {
            AugmentVariant::RandomWalk => {
                if self.matrices.len() < layers {
                    return Err(Error::InvalidArgument(format!(
                        "random walk view has {} layer masks, {layers} requested",
                        self.matrices.len()
                    )));
                }
                Ok(self.matrices[..layers].iter().collect())
            }
            _ => Ok(vec![&self.matrices[0]; layers]),
        }
    }
}

fn renormalize(m: CsrMatrix) -> CsrMatrix {
    let mut user_deg = vec![0usize; m.rows()];
    let mut item_deg = vec![0usize; m.cols()];
    for (u, v, _) in m.iter() {
        user_deg[u] += 1;
        item_deg[v] += 1;
    }
    m.map_values(|u, v, _| 1.0 / ((user_deg[u] * item_deg[v]) as f64).sqrt())
}

fn edge_drop(source: &CsrMatrix, rho: f64, rng: &mut ChaCha8Rng) -> CsrMatrix {
    source.filter(|_, _, _| rng.gen::<f64>() >= rho)
}

/// Samples the masks of `variant` with drop probability `rho`. Retained
/// entries keep their normalized weights unless `renormalize` is set.
pub fn augment_graph_with(
    graph: &NormalizedBipartiteGraph,
    variant: AugmentVariant,
    rho: f64,
    layers: usize,
    seed: u64,
    renorm: bool,
) -> Result<AugmentedGraph> {
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::InvalidArgument(format!("drop ratio must lie in [0, 1), got {rho}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let source = graph.adjacency.matrix();
    let masks: Vec<CsrMatrix> = match variant {
        AugmentVariant::NodeDrop => {
            let keep_user: Vec<bool> = (0..source.rows()).map(|_| rng.gen::<f64>() >= rho).collect();
            let keep_item: Vec<bool> = (0..source.cols()).map(|_| rng.gen::<f64>() >= rho).collect();
            vec![source.filter(|u, v, _| keep_user[u] && keep_item[v])]
        }
        AugmentVariant::EdgeDrop => vec![edge_drop(source, rho, &mut rng)],
        AugmentVariant::RandomWalk => (0..layers).map(|_| edge_drop(source, rho, &mut rng)).collect(),
    };
    let matrices = masks
        .into_iter()
        .map(|m| BiAdjacency::new(if renorm { renormalize(m) } else { m }))
        .collect();
    Ok(AugmentedGraph { variant, rho, seed, renormalized: renorm, matrices })
}

pub fn augment_graph(
    graph: &NormalizedBipartiteGraph,
    variant: AugmentVariant,
    rho: f64,
    layers: usize,
    seed: u64,
) -> Result<AugmentedGraph> {
    augment_graph_with(graph, variant, rho, layers, seed, false)
}

/// GCN recurrence over the augmented matrices.
pub fn forward_augmented(params: &ModelParams, aug: &AugmentedGraph, layers: usize) -> Result<BranchStack> {
    let matrices = aug.layer_matrices(layers)?;
    propagate(aug.variant.tag(), &params.e_user, &params.e_item, &matrices, Noise::None)
}
