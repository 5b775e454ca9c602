//! All-ranking Recall@N / NDCG@N and a 2-D embedding projection.

mod pca;

use std::fmt::Write as _;

use ndarray::{s, Array2};
use rayon::prelude::*;

pub use pca::{pca_project, Projection};

use crate::dataset::{NormalizedBipartiteGraph, Part, SplitDataset};
use crate::error::{Error, Result};
use crate::propagation::{forward_gcn, ModelParams};

pub const DEFAULT_CUTOFFS: [usize; 2] = [20, 40];

const USER_BLOCK: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    /// Cutoffs, ascending.
    pub cutoffs: Vec<usize>,
    pub recall: Vec<f64>,
    pub ndcg: Vec<f64>,
    /// Users with a non-empty target set.
    pub users: usize,
    /// Users skipped because their target set is empty.
    pub excluded_users: usize,
    pub seed: u64,
    pub hp_hash: String,
}

impl MetricsReport {
    fn index(&self, n: usize) -> Option<usize> {
        self.cutoffs.iter().position(|&c| c == n)
    }

    pub fn recall_at(&self, n: usize) -> Option<f64> {
        self.index(n).map(|i| self.recall[i])
    }

    pub fn ndcg_at(&self, n: usize) -> Option<f64> {
        self.index(n).map(|i| self.ndcg[i])
    }

    /// Single-line JSON: `{"recall": {"20": x, ...}, "ndcg": {...}, "users": n, "seed": s}`.
    pub fn to_json(&self) -> String {
        let block = |values: &[f64]| {
            let body: Vec<String> = self.cutoffs.iter().zip(values).map(|(n, v)| format!("\"{n}\": {}", json_number(*v))).collect();
            format!("{{{}}}", body.join(", "))
        };
        format!(
            "{{\"recall\": {}, \"ndcg\": {}, \"users\": {}, \"seed\": {}}}",
            block(&self.recall),
            block(&self.ndcg),
            self.users,
            self.seed
        )
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{:>6}  {:>10}  {:>10}", "N", "Recall@N", "NDCG@N").unwrap();
        for (i, n) in self.cutoffs.iter().enumerate() {
            writeln!(out, "{:>6}  {:>10.6}  {:>10.6}", n, self.recall[i], self.ndcg[i]).unwrap();
        }
        write!(out, "users evaluated: {} (excluded {}), seed {}", self.users, self.excluded_users, self.seed).unwrap();
        if !self.hp_hash.is_empty() {
            write!(out, ", config {}", self.hp_hash).unwrap();
        }
        out
    }
}

/// Formats a float the way JSON expects: integral values keep a `.0`.
fn json_number(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{x:.1}")
    } else {
        format!("{x}")
    }
}

/// Ranks candidate items by descending score, ties by ascending index, and
/// returns the first `n`. Items in `exclude` (sorted) are never returned.
pub fn top_n(scores: &[f64], exclude: &[usize], n: usize) -> Vec<usize> {
    let mut candidates: Vec<(f64, usize)> = scores
        .iter()
        .enumerate()
        .filter(|(i, _)| exclude.binary_search(i).is_err())
        .map(|(i, &s)| (s, i))
        .collect();
    let order = |a: &(f64, usize), b: &(f64, usize)| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1));
    if n == 0 {
        return Vec::new();
    }
    if candidates.len() > n {
        candidates.select_nth_unstable_by(n - 1, order);
        candidates.truncate(n);
    }
    candidates.sort_unstable_by(order);
    candidates.into_iter().map(|(_, i)| i).collect()
}

fn discount(rank: usize) -> f64 {
    1.0 / ((rank + 1) as f64).log2()
}

/// Recall and NDCG of a ranked list (best first) against sorted `targets`,
/// for every cutoff.
pub fn ranking_metrics(ranked: &[usize], targets: &[usize], cutoffs: &[usize]) -> (Vec<f64>, Vec<f64>) {
    let mut recall = Vec::with_capacity(cutoffs.len());
    let mut ndcg = Vec::with_capacity(cutoffs.len());
    for &n in cutoffs {
        let mut hits = 0usize;
        let mut dcg = 0.0;
        for (pos, item) in ranked.iter().take(n).enumerate() {
            if targets.binary_search(item).is_ok() {
                hits += 1;
                dcg += discount(pos + 1);
            }
        }
        let ideal: f64 = (1..=n.min(targets.len())).map(discount).sum();
        recall.push(hits as f64 / targets.len() as f64);
        ndcg.push(if ideal > 0.0 { dcg / ideal } else { 0.0 });
    }
    (recall, ndcg)
}

fn normalize_cutoffs(cutoffs: &[usize]) -> Result<Vec<usize>> {
    let mut c = cutoffs.to_vec();
    c.sort_unstable();
    c.dedup();
    if c.is_empty() || c[0] == 0 {
        return Err(Error::InvalidArgument(format!("cutoffs must be non-empty and positive, got {cutoffs:?}")));
    }
    Ok(c)
}

/// Scores every item for every user with a target set in `part`, masking the
/// user's training items, and averages the per-user metrics in user order.
pub fn evaluate_embeddings(
    user_emb: &Array2<f64>,
    item_emb: &Array2<f64>,
    split: &SplitDataset,
    part: Part,
    cutoffs: &[usize],
) -> Result<MetricsReport> {
    let cutoffs = normalize_cutoffs(cutoffs)?;
    if user_emb.nrows() != split.num_users || item_emb.nrows() != split.num_items {
        return Err(Error::DimensionMismatch {
            context: "embeddings vs split",
            expected: format!("{} users, {} items", split.num_users, split.num_items),
            found: format!("{} users, {} items", user_emb.nrows(), item_emb.nrows()),
        });
    }
    let targets = split.part(part);
    let max_n = *cutoffs.last().expect("non-empty");
    let users: Vec<usize> = (0..split.num_users).filter(|&u| !targets[u].is_empty()).collect();
    let per_user: Vec<(Vec<f64>, Vec<f64>)> = users
        .par_chunks(USER_BLOCK)
        .flat_map_iter(|block| {
            let rows = user_emb.select(ndarray::Axis(0), block);
            let scores = rows.dot(&item_emb.t()).as_standard_layout().into_owned();
            block
                .iter()
                .enumerate()
                .map(|(r, &u)| {
                    let row = scores.slice(s![r, ..]);
                    let row = row.as_slice().expect("contiguous row");
                    let ranked = top_n(row, &split.train[u], max_n);
                    ranking_metrics(&ranked, &targets[u], &cutoffs)
                })
                .collect::<Vec<_>>()
        })
        .collect();
    let mut recall = vec![0.0; cutoffs.len()];
    let mut ndcg = vec![0.0; cutoffs.len()];
    for (r, n) in &per_user {
        for i in 0..cutoffs.len() {
            recall[i] += r[i];
            ndcg[i] += n[i];
        }
    }
    let count = users.len().max(1) as f64;
    recall.iter_mut().for_each(|x| *x /= count);
    ndcg.iter_mut().for_each(|x| *x /= count);
    Ok(MetricsReport {
        cutoffs,
        recall,
        ndcg,
        users: users.len(),
        excluded_users: split.num_users - users.len(),
        seed: split.seed,
        hp_hash: String::new(),
    })
}

/// Test-set evaluation from the final GCN readouts.
pub fn evaluate(
    params: &ModelParams,
    graph: &NormalizedBipartiteGraph,
    split: &SplitDataset,
    cutoffs: &[usize],
    layers: usize,
) -> Result<MetricsReport> {
    evaluate_part(params, graph, split, Part::Test, cutoffs, layers)
}

pub fn evaluate_part(
    params: &ModelParams,
    graph: &NormalizedBipartiteGraph,
    split: &SplitDataset,
    part: Part,
    cutoffs: &[usize],
    layers: usize,
) -> Result<MetricsReport> {
    let stack = forward_gcn(params, graph, layers)?;
    evaluate_embeddings(stack.user.final_readout(), stack.item.final_readout(), split, part, cutoffs)
}
