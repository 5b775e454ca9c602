use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::adam::{adam_step, decay_learning_rate, OptimizerState};
use super::checkpoint::save_checkpoint;
use super::hyperparams::Hyperparams;
use super::objective::{compute_gradients, StepDraws};
use crate::dataset::{build_normalized_adjacency, BprSampler, NormalizedBipartiteGraph, Part, SplitDataset};
use crate::error::{Error, Result};
use crate::evaluation::{evaluate_part, MetricsReport};
use crate::losses::LossBreakdown;
use crate::propagation::ModelParams;
use crate::rng::{stream, Purpose};

pub const HISTORY_HEADER: &str = "epoch,lr,rec,cl_user,cl_item,disp,reg,total,val_recall@20,val_ndcg@20";
pub const HISTORY_FILE: &str = "history.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.bin";

#[derive(Debug, Clone, PartialEq)]
pub struct HistoryRow {
    pub epoch: usize,
    /// Learning rate used during the epoch.
    pub learning_rate: f64,
    /// Per-batch mean of each term.
    pub loss: LossBreakdown,
    /// Validation `(recall@20, ndcg@20)` on evaluation epochs.
    pub validation: Option<(f64, f64)>,
}

impl HistoryRow {
    pub fn csv_line(&self) -> String {
        let l = &self.loss;
        let (r, n) = match self.validation {
            Some((r, n)) => (r.to_string(), n.to_string()),
            None => (String::new(), String::new()),
        };
        format!(
            "{},{},{},{},{},{},{},{},{r},{n}",
            self.epoch, self.learning_rate, l.rec, l.cl_user, l.cl_item, l.disp, l.reg, l.total
        )
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub final_params: ModelParams,
    /// Parameters of the best validation epoch, or the final ones when no
    /// validation ran.
    pub best_params: ModelParams,
    pub best_epoch: Option<usize>,
    pub best_validation: Option<MetricsReport>,
    pub history: Vec<HistoryRow>,
    pub graph: NormalizedBipartiteGraph,
}

pub fn train(split: &SplitDataset, hp: &Hyperparams, output_dir: Option<&Path>) -> Result<TrainOutcome> {
    train_with_progress(split, hp, output_dir, &mut |_| {})
}

fn mean_breakdown(sum: LossBreakdown, batches: usize) -> LossBreakdown {
    if batches == 0 {
        return sum;
    }
    let k = batches as f64;
    LossBreakdown {
        rec: sum.rec / k,
        cl_user: sum.cl_user / k,
        cl_item: sum.cl_item / k,
        disp: sum.disp / k,
        reg: sum.reg / k,
        total: sum.total / k,
    }
}

fn add_breakdown(acc: &mut LossBreakdown, x: &LossBreakdown) {
    acc.rec += x.rec;
    acc.cl_user += x.cl_user;
    acc.cl_item += x.cl_item;
    acc.disp += x.disp;
    acc.reg += x.reg;
    acc.total += x.total;
}

/// Runs the epoch loop. `progress` sees every history row as it is produced.
/// With an output directory, `history.csv` is written as training proceeds
/// and `checkpoint.bin` holds the best parameters at the end.
pub fn train_with_progress(
    split: &SplitDataset,
    hp: &Hyperparams,
    output_dir: Option<&Path>,
    progress: &mut dyn FnMut(&HistoryRow),
) -> Result<TrainOutcome> {
    hp.validate()?;
    let graph = build_normalized_adjacency(split)?;
    let mut params = ModelParams::init(split.num_users, split.num_items, hp.dim, hp.hyperedges, &mut stream(hp.seed, Purpose::Init));
    let sampler = BprSampler::new(split)?;
    let mut negative_rng = stream(hp.seed, Purpose::Negatives);
    let mut noise_rng = stream(hp.seed, Purpose::Noise);
    let mut mask_rng = stream(hp.seed, Purpose::Masks);
    let mut state = OptimizerState::new(&params, hp.learning_rate);
    let batches = sampler.num_interactions().div_ceil(hp.batch_size);

    let mut history_file = match output_dir {
        Some(dir) => {
            let path = dir.join(HISTORY_FILE);
            let mut w = BufWriter::new(File::create(&path).map_err(|e| Error::io(&path, e))?);
            writeln!(w, "{HISTORY_HEADER}").map_err(|e| Error::io(&path, e))?;
            w.flush().map_err(|e| Error::io(&path, e))?;
            Some((path, w))
        }
        None => None,
    };

    let mut history = Vec::with_capacity(hp.epochs);
    let mut best: Option<(usize, MetricsReport, ModelParams)> = None;
    for epoch in 1..=hp.epochs {
        let learning_rate = state.learning_rate;
        let mut sum = LossBreakdown::default();
        for b in 0..batches {
            let batch = sampler.sample(hp.batch_size, &mut negative_rng)?;
            let draws = StepDraws::sample(&params, &graph, hp, &mut noise_rng, &mut mask_rng)?;
            let (loss, grads) = compute_gradients(&params, &graph, &batch, hp, &draws)?;
            if !loss.total.is_finite() {
                return Err(Error::NonFinite(format!("loss at epoch {epoch}, batch {}", b + 1)));
            }
            add_breakdown(&mut sum, &loss);
            adam_step(&mut params, &grads, &mut state)?;
        }
        let mut validation = None;
        if hp.eval_every > 0 && (epoch % hp.eval_every == 0 || epoch == hp.epochs) {
            let report = evaluate_part(&params, &graph, split, Part::Validation, &[20], hp.layers)?;
            if report.users > 0 {
                let recall = report.recall[0];
                validation = Some((recall, report.ndcg[0]));
                if best.as_ref().is_none_or(|(_, r, _)| recall > r.recall[0]) {
                    best = Some((epoch, report, params.clone()));
                }
            }
        }
        let row = HistoryRow { epoch, learning_rate, loss: mean_breakdown(sum, batches), validation };
        if let Some((path, w)) = history_file.as_mut() {
            writeln!(w, "{}", row.csv_line()).and_then(|_| w.flush()).map_err(|e| Error::io(path.as_path(), e))?;
        }
        progress(&row);
        history.push(row);
        decay_learning_rate(&mut state, hp.decay_ratio);
    }

    let (best_epoch, best_validation, best_params) = match best {
        Some((e, r, p)) => (Some(e), Some(r), p),
        None => (None, None, params.clone()),
    };
    if let Some(dir) = output_dir {
        save_checkpoint(&dir.join(CHECKPOINT_FILE), &best_params, hp)?;
    }
    Ok(TrainOutcome { final_params: params, best_params, best_epoch, best_validation, history, graph })
}
