use ndarray::{Array2, ArrayView2};

use super::SplitDataset;
use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// A user-by-item propagation matrix stored in both orientations so that
/// either side can be aggregated with a row-parallel product.
#[derive(Debug, Clone, PartialEq)]
pub struct BiAdjacency {
    user_rows: CsrMatrix,
    item_rows: CsrMatrix,
}

impl BiAdjacency {
    pub fn new(user_rows: CsrMatrix) -> Self {
        let item_rows = user_rows.transpose();
        Self { user_rows, item_rows }
    }

    pub fn num_users(&self) -> usize {
        self.user_rows.rows()
    }

    pub fn num_items(&self) -> usize {
        self.user_rows.cols()
    }

    /// The I x J matrix.
    pub fn matrix(&self) -> &CsrMatrix {
        &self.user_rows
    }

    /// The J x I transpose.
    pub fn transposed(&self) -> &CsrMatrix {
        &self.item_rows
    }

    /// `A · item_emb`: aggregate item rows into users.
    pub fn gather_items(&self, item_emb: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.user_rows.spmm(item_emb)
    }

    /// `Aᵀ · user_emb`: aggregate user rows into items.
    pub fn gather_users(&self, user_emb: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.item_rows.spmm(user_emb)
    }
}

/// Symmetric-normalized interaction matrix `D_u^{-1/2} A D_v^{-1/2}` with
/// degrees counted on the training split.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedBipartiteGraph {
    pub adjacency: BiAdjacency,
    pub user_degrees: Vec<usize>,
    pub item_degrees: Vec<usize>,
}

impl NormalizedBipartiteGraph {
    pub fn from_pairs(num_users: usize, num_items: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut user_degrees = vec![0usize; num_users];
        let mut item_degrees = vec![0usize; num_items];
        for &(u, v) in pairs {
            if u >= num_users {
                return Err(Error::IndexOutOfRange { what: "users", index: u, len: num_users });
            }
            if v >= num_items {
                return Err(Error::IndexOutOfRange { what: "items", index: v, len: num_items });
            }
            user_degrees[u] += 1;
            item_degrees[v] += 1;
        }
        let entries = pairs
            .iter()
            .map(|&(u, v)| (u, v, 1.0 / ((user_degrees[u] * item_degrees[v]) as f64).sqrt()))
            .collect();
        let user_rows = CsrMatrix::from_triplets(num_users, num_items, entries)?;
        Ok(Self { adjacency: BiAdjacency::new(user_rows), user_degrees, item_degrees })
    }

    pub fn num_users(&self) -> usize {
        self.user_degrees.len()
    }

    pub fn num_items(&self) -> usize {
        self.item_degrees.len()
    }

    pub fn nnz(&self) -> usize {
        self.adjacency.matrix().nnz()
    }

    /// Fails if any user or item has no training edge. Isolated nodes are
    /// valid for propagation (their rows stay empty) but cannot be normalized.
    pub fn require_connected(&self) -> Result<()> {
        if let Some(i) = self.user_degrees.iter().position(|&d| d == 0) {
            return Err(Error::ZeroDegree { side: "user", index: i });
        }
        if let Some(j) = self.item_degrees.iter().position(|&d| d == 0) {
            return Err(Error::ZeroDegree { side: "item", index: j });
        }
        Ok(())
    }
}

/// Normalized adjacency of the training split. Users or items without any
/// training interaction keep an empty row/column.
pub fn build_normalized_adjacency(split: &SplitDataset) -> Result<NormalizedBipartiteGraph> {
    NormalizedBipartiteGraph::from_pairs(split.num_users, split.num_items, &split.train_pairs())
}
