//! Linear (LightGCN-style) propagation shared by the plain, perturbed and
//! augmented branches, with its adjoint.

use ndarray::Array2;
use rand::{Rng, RngCore};

use super::backward::SideGrads;
use super::stack::{BranchStack, BranchTag, SideStack};
use crate::dataset::BiAdjacency;
use crate::error::{Error, Result};

/// Additive per-layer noise applied by the perturbed branch.
/// `user[l - 1]` and `item[l - 1]` hold the vectors added at layer `l`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PerturbationNoise {
    pub user: Vec<Array2<f64>>,
    pub item: Vec<Array2<f64>>,
}

pub(crate) enum Noise<'a> {
    None,
    Draw {
        radius: f64,
        rng: &'a mut dyn RngCore,
        record: &'a mut PerturbationNoise,
    },
    Replay(&'a PerturbationNoise),
}

/// Runs the residual recurrence with `matrices[l - 1]` at layer `l`:
/// user output `M · item_readout`, item output `Mᵀ · user_readout`.
pub(crate) fn propagate(
    tag: BranchTag,
    base_user: &Array2<f64>,
    base_item: &Array2<f64>,
    matrices: &[&BiAdjacency],
    mut noise: Noise<'_>,
) -> Result<BranchStack> {
    if base_user.ncols() != base_item.ncols() {
        return Err(Error::shape("embedding width", (base_user.nrows(), base_user.ncols()), base_item.dim()));
    }
    for m in matrices {
        if m.num_users() != base_user.nrows() || m.num_items() != base_item.nrows() {
            return Err(Error::shape(
                "propagation matrix",
                (base_user.nrows(), base_item.nrows()),
                (m.num_users(), m.num_items()),
            ));
        }
    }
    if let Noise::Replay(rec) = &noise {
        if rec.user.len() < matrices.len() || rec.item.len() < matrices.len() {
            return Err(Error::InvalidArgument(format!(
                "recorded noise covers {} layers, {} requested",
                rec.user.len().min(rec.item.len()),
                matrices.len()
            )));
        }
    }
    let mut user = SideStack::from_base(base_user.clone());
    let mut item = SideStack::from_base(base_item.clone());
    for (l, m) in matrices.iter().enumerate() {
        let mut out_user = m.gather_items(item.readouts[l].view())?;
        let mut out_item = m.gather_users(user.readouts[l].view())?;
        match &mut noise {
            Noise::None => {}
            Noise::Draw { radius, rng, record } => {
                if *radius > 0.0 {
                    let du = sign_aligned_noise(&out_user, *radius, &mut **rng);
                    let di = sign_aligned_noise(&out_item, *radius, &mut **rng);
                    out_user += &du;
                    out_item += &di;
                    record.user.push(du);
                    record.item.push(di);
                } else {
                    record.user.push(Array2::zeros(out_user.dim()));
                    record.item.push(Array2::zeros(out_item.dim()));
                }
            }
            Noise::Replay(rec) => {
                if rec.user[l].dim() != out_user.dim() || rec.item[l].dim() != out_item.dim() {
                    return Err(Error::shape("recorded noise", out_user.dim(), rec.user[l].dim()));
                }
                out_user += &rec.user[l];
                out_item += &rec.item[l];
            }
        }
        user.push(out_user);
        item.push(out_item);
    }
    Ok(BranchStack { tag, user, item })
}

/// One noise row per node: uniform `[0, 1)` draws multiplied by the sign of
/// the node's embedding, rescaled to L2 norm `radius`. A node whose
/// embedding is identically zero receives no noise.
pub(crate) fn sign_aligned_noise<R: Rng + ?Sized>(emb: &Array2<f64>, radius: f64, rng: &mut R) -> Array2<f64> {
    let mut out = Array2::zeros(emb.dim());
    for (src, mut dst) in emb.rows().into_iter().zip(out.rows_mut()) {
        for (e, d) in src.iter().zip(dst.iter_mut()) {
            let u: f64 = rng.gen();
            *d = if *e > 0.0 {
                u
            } else if *e < 0.0 {
                -u
            } else {
                0.0
            };
        }
        let norm = dst.dot(&dst).sqrt();
        if norm > 0.0 {
            dst.mapv_inplace(|x| x * radius / norm);
        }
    }
    out
}

/// Adjoint of [`propagate`] with noise held constant. Consumes the upstream
/// gradients on layer outputs and readouts and returns the gradients on the
/// base user and item embeddings.
pub(crate) fn propagate_backward(
    matrices: &[&BiAdjacency],
    mut user: SideGrads,
    mut item: SideGrads,
) -> Result<(Array2<f64>, Array2<f64>)> {
    for l in (1..=matrices.len()).rev() {
        let m = matrices[l - 1];
        let g_user_out = user.take_total(l);
        let g_item_out = item.take_total(l);
        if let Some(g) = &g_user_out {
            item.add_readout(l - 1, &m.gather_users(g.view())?);
        }
        if let Some(g) = &g_item_out {
            user.add_readout(l - 1, &m.gather_items(g.view())?);
        }
        if let Some(g) = user.take_readout(l) {
            user.add_readout(l - 1, &g);
        }
        if let Some(g) = item.take_readout(l) {
            item.add_readout(l - 1, &g);
        }
    }
    Ok((user.into_base(), item.into_base()))
}
