//! The full training objective and its reverse-mode gradient.

use std::borrow::Cow;

use ndarray::{Array2, ArrayView2};
use rand::Rng;

use super::hyperparams::{DispMode, Hyperparams, ViewKind};
use crate::augmentations::{augment_graph_with, forward_augmented, AugmentVariant, AugmentedGraph};
use crate::dataset::{BiAdjacency, NormalizedBipartiteGraph, TripletBatch};
use crate::error::{Error, Result};
use crate::losses::{
    cosine_contrast, gather_rows, kl_uniform_with_grad, l2_regularization, sigmoid, softplus, stack_readout, total_loss,
    LossBreakdown, LossParts,
};
use crate::propagation::backward::SideGrads;
use crate::propagation::linear::propagate_backward;
use crate::propagation::{
    forward_gcn, forward_perturbed_recorded, forward_perturbed_replay, hypergraph_side, hypergraph_side_backward,
    BranchStack, ModelParams, PerturbationNoise, Side, SideStack, PARAM_NAMES,
};
use crate::rng::RunRng;

/// One gradient tensor per parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet {
    pub e_user: Array2<f64>,
    pub e_item: Array2<f64>,
    pub w_user: Array2<f64>,
    pub w_item: Array2<f64>,
}

impl GradientSet {
    pub fn zeros_like(params: &ModelParams) -> Self {
        Self {
            e_user: Array2::zeros(params.e_user.dim()),
            e_item: Array2::zeros(params.e_item.dim()),
            w_user: Array2::zeros(params.w_user.dim()),
            w_item: Array2::zeros(params.w_item.dim()),
        }
    }

    pub fn tensors(&self) -> [&Array2<f64>; 4] {
        [&self.e_user, &self.e_item, &self.w_user, &self.w_item]
    }

    pub fn tensors_mut(&mut self) -> [&mut Array2<f64>; 4] {
        [&mut self.e_user, &mut self.e_item, &mut self.w_user, &mut self.w_item]
    }

    fn check_finite(&self) -> Result<()> {
        for (name, t) in PARAM_NAMES.iter().zip(self.tensors()) {
            if t.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite(format!("gradient of {name}")));
            }
        }
        Ok(())
    }
}

/// Random quantities of one optimization step, drawn once and replayed so
/// that the loss and its gradient see identical views.
#[derive(Debug, Clone, Default)]
pub struct StepDraws {
    pub noise: Option<PerturbationNoise>,
    pub masks: Vec<AugmentedGraph>,
}

impl StepDraws {
    pub fn sample(
        params: &ModelParams,
        graph: &NormalizedBipartiteGraph,
        hp: &Hyperparams,
        noise_rng: &mut RunRng,
        mask_rng: &mut RunRng,
    ) -> Result<Self> {
        let views = [hp.user_view, hp.item_view];
        let noise = if views.contains(&ViewKind::Perturb) {
            Some(forward_perturbed_recorded(params, graph, hp.layers, hp.radius, noise_rng)?.1)
        } else {
            None
        };
        let mut masks: Vec<AugmentedGraph> = Vec::new();
        for variant in views.iter().filter_map(|v| v.augmentation()) {
            if masks.iter().all(|m| m.variant != variant) {
                let seed = mask_rng.gen::<u64>();
                masks.push(augment_graph_with(graph, variant, hp.drop_ratio, hp.layers, seed, hp.renormalize_drops)?);
            }
        }
        Ok(Self { noise, masks })
    }

    fn mask(&self, variant: AugmentVariant) -> Result<&AugmentedGraph> {
        self.masks
            .iter()
            .find(|m| m.variant == variant)
            .ok_or_else(|| Error::InvalidArgument(format!("no {variant} mask drawn for this step")))
    }
}

/// Which terms contribute to the gradient. Loss values are always reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Terms {
    pub rec: bool,
    pub contrast: bool,
    pub disperse: bool,
    pub reg: bool,
}

impl Terms {
    pub const ALL: Terms = Terms { rec: true, contrast: true, disperse: true, reg: true };
    pub const NONE: Terms = Terms { rec: false, contrast: false, disperse: false, reg: false };
}

enum View<'a> {
    Linear { stack: BranchStack, matrices: Vec<&'a BiAdjacency> },
    Hyper(SideStack),
}

impl View<'_> {
    fn side(&self, side: Side) -> &SideStack {
        match self {
            View::Linear { stack, .. } => stack.side(side),
            View::Hyper(s) => s,
        }
    }
}

fn build_view<'a>(
    kind: ViewKind,
    side: Side,
    params: &ModelParams,
    graph: &'a NormalizedBipartiteGraph,
    gcn: &BranchStack,
    hp: &Hyperparams,
    draws: &'a StepDraws,
) -> Result<View<'a>> {
    let layers = hp.layers;
    Ok(match kind {
        ViewKind::Perturb => {
            let noise = draws
                .noise
                .as_ref()
                .ok_or_else(|| Error::InvalidArgument("perturbed view needs recorded noise".into()))?;
            View::Linear {
                stack: forward_perturbed_replay(params, graph, layers, noise)?,
                matrices: vec![&graph.adjacency; layers],
            }
        }
        ViewKind::Hypergraph => {
            let w = match side {
                Side::User => &params.w_user,
                Side::Item => &params.w_item,
            };
            View::Hyper(hypergraph_side(w, gcn.side(side), layers, hp.leaky_slope)?)
        }
        other => {
            let aug = draws.mask(other.augmentation().expect("drop view"))?;
            View::Linear {
                stack: forward_augmented(params, aug, layers)?,
                matrices: aug.layer_matrices(layers)?,
            }
        }
    })
}

fn scatter_rows(target: &mut Array2<f64>, rows: &[usize], g: ArrayView2<'_, f64>, scale: f64) {
    for (k, &r) in rows.iter().enumerate() {
        target.row_mut(r).scaled_add(scale, &g.row(k));
    }
}

/// Node sets for the contrast and dispersing terms: the batch's users and
/// items, or every node when `full_denominator` is set.
fn contrast_nodes<'a>(batch: &'a TripletBatch, hp: &Hyperparams, num_users: usize, num_items: usize) -> [Cow<'a, [usize]>; 2] {
    if hp.full_denominator {
        [Cow::Owned((0..num_users).collect()), Cow::Owned((0..num_items).collect())]
    } else {
        [Cow::Borrowed(&batch.users), Cow::Borrowed(&batch.items)]
    }
}

struct SideContrast {
    loss: f64,
    /// Per layer: gradient on the gathered anchor rows and on the view rows.
    grads: Vec<(Array2<f64>, Array2<f64>)>,
}

fn side_contrast(gcn: &SideStack, view: &SideStack, nodes: &[usize], tau: f64, with_grad: bool) -> SideContrast {
    let mut loss = 0.0;
    let mut grads = Vec::new();
    for (a, o) in gcn.layers.iter().zip(&view.layers) {
        let out = cosine_contrast(gather_rows(a, nodes).view(), gather_rows(o, nodes).view(), tau, with_grad);
        loss += out.loss;
        if with_grad {
            grads.push((out.grad_anchor.expect("requested"), out.grad_other.expect("requested")));
        }
    }
    SideContrast { loss, grads }
}

fn run(
    params: &ModelParams,
    graph: &NormalizedBipartiteGraph,
    batch: &TripletBatch,
    hp: &Hyperparams,
    draws: &StepDraws,
    terms: Terms,
    with_grad: bool,
) -> Result<(LossBreakdown, Option<GradientSet>)> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("empty triplet batch".into()));
    }
    let layers = hp.layers;
    let w = &hp.weights;
    let gcn = forward_gcn(params, graph, layers)?;
    let (num_users, num_items, dim) = (params.num_users(), params.num_items(), params.dim());
    for &(u, p, n) in &batch.triples {
        if u >= num_users || p >= num_items || n >= num_items {
            return Err(Error::IndexOutOfRange { what: "batch triple", index: u.max(p).max(n), len: num_users.max(num_items) });
        }
    }

    let sides = [Side::User, Side::Item];
    let nodes = contrast_nodes(batch, hp, num_users, num_items);
    let views = [
        build_view(hp.user_view, Side::User, params, graph, &gcn, hp, draws)?,
        build_view(hp.item_view, Side::Item, params, graph, &gcn, hp, draws)?,
    ];
    let contrast_grad = with_grad && terms.contrast;
    let contrasts: Vec<SideContrast> = sides
        .iter()
        .zip(&views)
        .zip(&nodes)
        .map(|((&s, v), n)| side_contrast(gcn.side(s), v.side(s), n, w.tau_c, contrast_grad))
        .collect();

    let final_user = gcn.user.final_readout();
    let final_item = gcn.item.final_readout();
    let disp_grad = with_grad && terms.disperse;
    let (disp, g_disp) = match hp.disp_mode {
        DispMode::None => (0.0, None),
        DispMode::Dispersing => {
            let r = stack_readout(final_user, final_item, &nodes[0], &nodes[1]);
            let out = cosine_contrast(r.view(), r.view(), w.tau_d, disp_grad);
            let g = out.grad_anchor.zip(out.grad_other).map(|(a, o)| a + o);
            (out.loss, g)
        }
        DispMode::Kl => {
            let r = stack_readout(final_user, final_item, &nodes[0], &nodes[1]);
            if r.nrows() < 2 {
                (0.0, None)
            } else {
                kl_uniform_with_grad(r.view(), disp_grad)
            }
        }
    };

    let mut rec = 0.0;
    let mut margins = Vec::with_capacity(batch.len());
    for &(u, p, n) in &batch.triples {
        let ru = final_user.row(u);
        let x = ru.dot(&final_item.row(p)) - ru.dot(&final_item.row(n));
        rec += softplus(-x);
        margins.push(x);
    }
    let reg = l2_regularization(params);
    let parts = LossParts { rec, cl_user: contrasts[0].loss, cl_item: contrasts[1].loss, disp, reg };
    let breakdown = total_loss(parts, w);
    if !with_grad {
        return Ok((breakdown, None));
    }

    let mut grads = GradientSet::zeros_like(params);
    let mut gcn_grads = [SideGrads::new(num_users, dim, layers), SideGrads::new(num_items, dim, layers)];

    if terms.contrast {
        for (k, &s) in sides.iter().enumerate() {
            let side_nodes: &[usize] = &nodes[k];
            let rows = if s == Side::User { num_users } else { num_items };
            let mut view_layers: Vec<Option<Array2<f64>>> = vec![None; layers];
            for (l, (ga, go)) in contrasts[k].grads.iter().enumerate() {
                scatter_rows(gcn_grads[k].layer_mut(l + 1), side_nodes, ga.view(), w.lambda_c);
                let mut full = Array2::zeros((rows, dim));
                scatter_rows(&mut full, side_nodes, go.view(), w.lambda_c);
                view_layers[l] = Some(full);
            }
            match &views[k] {
                View::Hyper(_) => {
                    let w_side = match s {
                        Side::User => &params.w_user,
                        Side::Item => &params.w_item,
                    };
                    let (g_w, g_inputs) = hypergraph_side_backward(w_side, gcn.side(s), hp.leaky_slope, &view_layers);
                    match s {
                        Side::User => grads.w_user += &g_w,
                        Side::Item => grads.w_item += &g_w,
                    }
                    for (idx, g) in g_inputs.into_iter().enumerate() {
                        if let Some(g) = g {
                            gcn_grads[k].add_readout(idx, &g);
                        }
                    }
                }
                View::Linear { matrices, .. } => {
                    let mut view_grads = [SideGrads::new(num_users, dim, layers), SideGrads::new(num_items, dim, layers)];
                    for (l, g) in view_layers.iter().enumerate() {
                        if let Some(g) = g {
                            view_grads[k].add_layer(l + 1, g);
                        }
                    }
                    let [vu, vi] = view_grads;
                    let (gu, gi) = propagate_backward(matrices, vu, vi)?;
                    grads.e_user += &gu;
                    grads.e_item += &gi;
                }
            }
        }
    }

    if let (true, Some(g)) = (terms.disperse, g_disp) {
        let nu = nodes[0].len();
        scatter_rows(gcn_grads[0].readout_mut(layers), &nodes[0], g.slice(ndarray::s![..nu, ..]), w.lambda_d);
        scatter_rows(gcn_grads[1].readout_mut(layers), &nodes[1], g.slice(ndarray::s![nu.., ..]), w.lambda_d);
    }

    if terms.rec {
        let [gu_side, gi_side] = &mut gcn_grads;
        let g_user = gu_side.readout_mut(layers);
        let g_item = gi_side.readout_mut(layers);
        for (&(u, p, n), &x) in batch.triples.iter().zip(&margins) {
            let c = -sigmoid(-x);
            let ru = final_user.row(u);
            let diff = &final_item.row(p) - &final_item.row(n);
            g_user.row_mut(u).scaled_add(c, &diff);
            g_item.row_mut(p).scaled_add(c, &ru);
            g_item.row_mut(n).scaled_add(-c, &ru);
        }
    }

    let [gu, gi] = gcn_grads;
    let (g_eu, g_ei) = propagate_backward(&vec![&graph.adjacency; layers], gu, gi)?;
    grads.e_user += &g_eu;
    grads.e_item += &g_ei;

    if terms.reg {
        for (g, p) in grads.tensors_mut().into_iter().zip(params.tensors()) {
            g.scaled_add(2.0 * w.lambda_r, p);
        }
    }
    grads.check_finite()?;
    Ok((breakdown, Some(grads)))
}

/// Loss breakdown and exact gradient of the weighted total. Noise and masks
/// in `draws` are held constant.
pub fn compute_gradients(
    params: &ModelParams,
    graph: &NormalizedBipartiteGraph,
    batch: &TripletBatch,
    hp: &Hyperparams,
    draws: &StepDraws,
) -> Result<(LossBreakdown, GradientSet)> {
    compute_gradients_for(params, graph, batch, hp, draws, Terms::ALL)
}

/// Like [`compute_gradients`] but only the selected terms contribute to the
/// gradient.
pub fn compute_gradients_for(
    params: &ModelParams,
    graph: &NormalizedBipartiteGraph,
    batch: &TripletBatch,
    hp: &Hyperparams,
    draws: &StepDraws,
    terms: Terms,
) -> Result<(LossBreakdown, GradientSet)> {
    let (loss, grads) = run(params, graph, batch, hp, draws, terms, true)?;
    Ok((loss, grads.expect("gradient requested")))
}

/// Forward-only evaluation of the same objective.
pub fn compute_loss(
    params: &ModelParams,
    graph: &NormalizedBipartiteGraph,
    batch: &TripletBatch,
    hp: &Hyperparams,
    draws: &StepDraws,
) -> Result<LossBreakdown> {
    Ok(run(params, graph, batch, hp, draws, Terms::NONE, false)?.0)
}
