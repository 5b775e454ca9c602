use ndarray::Array2;
use rand::Rng;

use crate::error::{Error, Result};

/// Trainable tensors: base user/item embeddings and the user/item hyperedge
/// projections.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub e_user: Array2<f64>,
    pub e_item: Array2<f64>,
    pub w_user: Array2<f64>,
    pub w_item: Array2<f64>,
}

pub const PARAM_NAMES: [&str; 4] = ["e_user", "e_item", "w_user", "w_item"];

impl ModelParams {
    /// Glorot-uniform initialization: entries in `[-a, a]` with
    /// `a = sqrt(6 / (rows + cols))` per tensor.
    pub fn init<R: Rng + ?Sized>(num_users: usize, num_items: usize, dim: usize, hyperedges: usize, rng: &mut R) -> Self {
        Self {
            e_user: glorot(num_users, dim, rng),
            e_item: glorot(num_items, dim, rng),
            w_user: glorot(dim, hyperedges, rng),
            w_item: glorot(dim, hyperedges, rng),
        }
    }

    pub fn zeros(num_users: usize, num_items: usize, dim: usize, hyperedges: usize) -> Self {
        Self {
            e_user: Array2::zeros((num_users, dim)),
            e_item: Array2::zeros((num_items, dim)),
            w_user: Array2::zeros((dim, hyperedges)),
            w_item: Array2::zeros((dim, hyperedges)),
        }
    }

    pub fn num_users(&self) -> usize {
        self.e_user.nrows()
    }

    pub fn num_items(&self) -> usize {
        self.e_item.nrows()
    }

    pub fn dim(&self) -> usize {
        self.e_user.ncols()
    }

    pub fn hyperedges(&self) -> usize {
        self.w_user.ncols()
    }

    pub fn tensors(&self) -> [&Array2<f64>; 4] {
        [&self.e_user, &self.e_item, &self.w_user, &self.w_item]
    }

    pub fn tensors_mut(&mut self) -> [&mut Array2<f64>; 4] {
        [&mut self.e_user, &mut self.e_item, &mut self.w_user, &mut self.w_item]
    }

    pub fn from_tensors([e_user, e_item, w_user, w_item]: [Array2<f64>; 4]) -> Result<Self> {
        let p = Self { e_user, e_item, w_user, w_item };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let (d, h) = (self.dim(), self.hyperedges());
        if self.e_item.ncols() != d {
            return Err(Error::shape("e_item", (self.num_items(), d), self.e_item.dim()));
        }
        for (name, w) in [("w_user", &self.w_user), ("w_item", &self.w_item)] {
            if w.dim() != (d, h) {
                return Err(Error::DimensionMismatch {
                    context: "hyperedge matrix",
                    expected: format!("{d}x{h}"),
                    found: format!("{name} {}x{}", w.nrows(), w.ncols()),
                });
            }
        }
        for (name, t) in PARAM_NAMES.iter().zip(self.tensors()) {
            if t.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite((*name).to_string()));
            }
        }
        Ok(())
    }

    pub(crate) fn check_graph(&self, num_users: usize, num_items: usize) -> Result<()> {
        if self.num_users() != num_users || self.num_items() != num_items {
            return Err(Error::DimensionMismatch {
                context: "params vs graph",
                expected: format!("{num_users} users, {num_items} items"),
                found: format!("{} users, {} items", self.num_users(), self.num_items()),
            });
        }
        Ok(())
    }
}

fn glorot<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Array2<f64> {
    let a = (6.0 / (rows + cols).max(1) as f64).sqrt();
    Array2::from_shape_simple_fn((rows, cols), || rng.gen_range(-a..=a))
}
