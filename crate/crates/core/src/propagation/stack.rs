use ndarray::Array2;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    User,
    Item,
}

impl Side {
    pub fn name(self) -> &'static str {
        match self {
            Side::User => "user",
            Side::Item => "item",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BranchTag {
    Gcn,
    Perturbed,
    Hypergraph,
    NodeDrop,
    EdgeDrop,
    RandomWalk,
}

/// Per-layer outputs of one side of a branch.
///
/// `layers[l - 1]` is the output of layer `l`; `readouts[l]` is the
/// cumulative readout after layer `l`, with `readouts[0]` the base embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct SideStack {
    pub layers: Vec<Array2<f64>>,
    pub readouts: Vec<Array2<f64>>,
}

impl SideStack {
    pub(crate) fn from_base(base: Array2<f64>) -> Self {
        Self { layers: Vec::new(), readouts: vec![base] }
    }

    pub(crate) fn push(&mut self, layer: Array2<f64>) {
        let next = self.readouts.last().expect("base readout") + &layer;
        self.layers.push(layer);
        self.readouts.push(next);
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn final_readout(&self) -> &Array2<f64> {
        self.readouts.last().expect("base readout")
    }
}

/// Both sides of one propagation branch.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchStack {
    pub tag: BranchTag,
    pub user: SideStack,
    pub item: SideStack,
}

impl BranchStack {
    pub fn num_layers(&self) -> usize {
        self.user.num_layers()
    }

    pub fn side(&self, side: Side) -> &SideStack {
        match side {
            Side::User => &self.user,
            Side::Item => &self.item,
        }
    }

    /// Scores `candidate_items` for `user` by dot product of final readouts.
    pub fn predict_scores(&self, user: usize, candidate_items: &[usize]) -> Result<Vec<f64>> {
        predict_scores(self, user, candidate_items)
    }
}

pub fn predict_scores(stack: &BranchStack, user: usize, candidate_items: &[usize]) -> Result<Vec<f64>> {
    let users = stack.user.final_readout();
    let items = stack.item.final_readout();
    if user >= users.nrows() {
        return Err(Error::IndexOutOfRange { what: "users", index: user, len: users.nrows() });
    }
    let u = users.row(user);
    candidate_items
        .iter()
        .map(|&v| {
            if v >= items.nrows() {
                Err(Error::IndexOutOfRange { what: "items", index: v, len: items.nrows() })
            } else {
                Ok(u.dot(&items.row(v)))
            }
        })
        .collect()
}
