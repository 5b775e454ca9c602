//! Central finite-difference check of the analytic gradients on small
//! random instances.

use std::fmt::Write as _;

use rand::Rng;

use super::hyperparams::{DispMode, Hyperparams, ViewKind};
use super::objective::{compute_gradients_for, compute_loss, StepDraws, Terms};
use crate::dataset::{BprSampler, NormalizedBipartiteGraph, SplitDataset, TripletBatch};
use crate::error::{Error, Result};
use crate::losses::LossBreakdown;
use crate::propagation::{forward_gcn, hyper_layer, ModelParams, PARAM_NAMES};
use crate::rng::{stream, Purpose, RunRng};

pub const CHECK_USERS: usize = 5;
pub const CHECK_ITEMS: usize = 7;
pub const CHECK_DIM: usize = 4;
pub const CHECK_LAYERS: usize = 2;
pub const CHECK_HYPEREDGES: usize = 3;
pub const STEP: f64 = 1e-4;
const BATCH: usize = 8;
/// Hypergraph pre-activations closer than this to 0 are redrawn so the
/// finite-difference stencil never crosses the LeakyReLU kink.
const KINK_MARGIN: f64 = 1e-2;
/// Entries are compared against at least this fraction of the term's largest
/// gradient entry, so near-zero entries are not judged on truncation noise.
const SCALE_FLOOR: f64 = 1e-3;
const ABS_FLOOR: f64 = 1e-8;
const MAX_REDRAWS: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct TermError {
    pub term: &'static str,
    pub max_rel_error: f64,
    /// Tensor holding the worst entry.
    pub tensor: &'static str,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub trials: usize,
    pub tolerance: f64,
    pub seed: u64,
    pub terms: Vec<TermError>,
}

impl GradCheckReport {
    pub fn max_error(&self) -> f64 {
        self.terms.iter().map(|t| t.max_rel_error).fold(0.0, f64::max)
    }

    /// True when every term's error is strictly below the tolerance.
    pub fn passed(&self) -> bool {
        self.terms.iter().all(|t| t.max_rel_error < self.tolerance)
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{:<12} {:>14}  {:<8} status", "term", "max rel err", "tensor").unwrap();
        for t in &self.terms {
            let status = if t.max_rel_error < self.tolerance { "ok" } else { "FAIL" };
            writeln!(out, "{:<12} {:>14.3e}  {:<8} {status}", t.term, t.max_rel_error, t.tensor).unwrap();
        }
        write!(out, "trials {}, seed {}, tolerance {:e}", self.trials, self.seed, self.tolerance).unwrap();
        out
    }
}

/// `|a - n| / max(|a|, |n|, floor)`.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

struct Instance {
    graph: NormalizedBipartiteGraph,
    params: ModelParams,
    batch: TripletBatch,
    draws: StepDraws,
}

fn random_split(rng: &mut RunRng) -> SplitDataset {
    let mut train = Vec::with_capacity(CHECK_USERS);
    for _ in 0..CHECK_USERS {
        let mut items: Vec<usize> = (0..CHECK_ITEMS).filter(|_| rng.gen_bool(0.4)).collect();
        if items.is_empty() {
            items.push(rng.gen_range(0..CHECK_ITEMS));
        }
        if items.len() == CHECK_ITEMS {
            items.remove(rng.gen_range(0..CHECK_ITEMS));
        }
        train.push(items);
    }
    SplitDataset {
        num_users: CHECK_USERS,
        num_items: CHECK_ITEMS,
        train,
        validation: vec![Vec::new(); CHECK_USERS],
        test: vec![Vec::new(); CHECK_USERS],
        seed: 0,
    }
}

fn clear_of_kink(params: &ModelParams, graph: &NormalizedBipartiteGraph, hp: &Hyperparams) -> Result<bool> {
    if ![hp.user_view, hp.item_view].contains(&ViewKind::Hypergraph) {
        return Ok(true);
    }
    let gcn = forward_gcn(params, graph, hp.layers)?;
    for (side, w) in [(&gcn.user, &params.w_user), (&gcn.item, &params.w_item)] {
        for l in 0..hp.layers {
            if hyper_layer(&side.readouts[l], w).pre.iter().any(|x| x.abs() < KINK_MARGIN) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

fn instance(hp: &Hyperparams, rng: &mut RunRng) -> Result<Instance> {
    let split = random_split(rng);
    let graph = NormalizedBipartiteGraph::from_pairs(CHECK_USERS, CHECK_ITEMS, &split.train_pairs())?;
    let mut params = None;
    for _ in 0..MAX_REDRAWS {
        let candidate = ModelParams::init(CHECK_USERS, CHECK_ITEMS, CHECK_DIM, CHECK_HYPEREDGES, rng);
        if clear_of_kink(&candidate, &graph, hp)? {
            params = Some(candidate);
            break;
        }
    }
    let params = params.ok_or_else(|| Error::InvalidArgument("could not draw parameters away from the LeakyReLU kink".into()))?;
    let batch = BprSampler::new(&split)?.sample(BATCH, rng)?;
    let mut noise_rng = stream(rng.gen(), Purpose::Noise);
    let mut mask_rng = stream(rng.gen(), Purpose::Masks);
    let draws = StepDraws::sample(&params, &graph, hp, &mut noise_rng, &mut mask_rng)?;
    Ok(Instance { graph, params, batch, draws })
}

struct Term {
    name: &'static str,
    mask: Terms,
    value: fn(&LossBreakdown, &Hyperparams) -> f64,
}

fn terms_for(hp: &Hyperparams) -> Vec<Term> {
    let mut terms = vec![
        Term { name: "bpr", mask: Terms { rec: true, ..Terms::NONE }, value: |b, _| b.rec },
        Term {
            name: "contrast",
            mask: Terms { contrast: true, ..Terms::NONE },
            value: |b, hp| hp.weights.lambda_c * (b.cl_user + b.cl_item),
        },
    ];
    if hp.disp_mode != DispMode::None {
        terms.push(Term {
            name: hp.disp_mode.name(),
            mask: Terms { disperse: true, ..Terms::NONE },
            value: |b, hp| hp.weights.lambda_d * b.disp,
        });
    }
    terms.push(Term { name: "l2", mask: Terms { reg: true, ..Terms::NONE }, value: |b, hp| hp.weights.lambda_r * b.reg });
    terms.push(Term { name: "total", mask: Terms::ALL, value: |b, _| b.total });
    terms
}

/// Compares analytic and central-difference gradients for every loss term
/// over `trials` random instances of fixed small size. The model shape in
/// `hp` is replaced by the check sizes; views, weights and modes are kept.
pub fn grad_check(hp: &Hyperparams, trials: usize, tolerance: f64, seed: u64) -> Result<GradCheckReport> {
    let mut hp = hp.clone();
    hp.dim = CHECK_DIM;
    hp.layers = CHECK_LAYERS;
    hp.hyperedges = CHECK_HYPEREDGES;
    hp.weights.validate()?;
    let terms = terms_for(&hp);
    let mut worst: Vec<(f64, &'static str)> = vec![(0.0, PARAM_NAMES[0]); terms.len()];
    let mut rng = stream(seed, Purpose::GradCheck);
    for _ in 0..trials {
        let inst = instance(&hp, &mut rng)?;
        let analytic: Vec<_> = terms
            .iter()
            .map(|t| compute_gradients_for(&inst.params, &inst.graph, &inst.batch, &hp, &inst.draws, t.mask).map(|(_, g)| g))
            .collect::<Result<_>>()?;
        let floors: Vec<f64> = analytic
            .iter()
            .map(|g| {
                let scale = g.tensors().iter().flat_map(|t| t.iter()).fold(0.0f64, |m, x| m.max(x.abs()));
                (SCALE_FLOOR * scale).max(ABS_FLOOR)
            })
            .collect();
        for k in 0..4 {
            let len = inst.params.tensors()[k].len();
            for idx in 0..len {
                let eval = |delta: f64| -> Result<LossBreakdown> {
                    let mut p = inst.params.clone();
                    let t = &mut p.tensors_mut()[k];
                    let slot = t.as_slice_mut().expect("standard layout");
                    slot[idx] += delta;
                    compute_loss(&p, &inst.graph, &inst.batch, &hp, &inst.draws)
                };
                let plus = eval(STEP)?;
                let minus = eval(-STEP)?;
                for (j, term) in terms.iter().enumerate() {
                    let numeric = ((term.value)(&plus, &hp) - (term.value)(&minus, &hp)) / (2.0 * STEP);
                    let a = analytic[j].tensors()[k].as_slice().expect("standard layout")[idx];
                    let err = relative_error(a, numeric, floors[j]);
                    if err > worst[j].0 || err.is_nan() {
                        worst[j] = (err, PARAM_NAMES[k]);
                    }
                }
            }
        }
    }
    Ok(GradCheckReport {
        trials,
        tolerance,
        seed,
        terms: terms.iter().zip(worst).map(|(t, (e, name))| TermError { term: t.name, max_rel_error: e, tensor: name }).collect(),
    })
}
