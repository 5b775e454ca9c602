//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Criteria 3, 4 and 6 need the HetRec Last.FM `user_artists.dat`, found via
//! `BUSGCL_LASTFM` or `data/lastfm/user_artists.dat` under the workspace root.
//! Without it they report FAIL (dataset unavailable); the process exit code
//! only reflects those lines when `BUSGCL_ACCEPTANCE_STRICT=1`.
//! `BUSGCL_ACCEPTANCE_EPOCHS` overrides the training length (default 60).
//! `BUSGCL_ACCEPTANCE_LAYERS=lastfm` runs the layer sweep on Last.FM instead of
//! the synthetic clustered set.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use busgcl::dataset::{load_interactions, split_dataset, InteractionDataset, NormalizedBipartiteGraph, Part, SplitDataset};
use busgcl::evaluation::{evaluate, evaluate_embeddings, MetricsReport};
use busgcl::losses::{dispersing_loss, infonce_side, kl_uniform_loss};
use busgcl::propagation::{forward_gcn, hypergraph_side, ModelParams, SideStack};
use busgcl::training::{grad_check, train, DispMode, Hyperparams, SubviewMode};
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const DEFAULT_EPOCHS: usize = 60;
const ORACLE_TOL: f64 = 1e-8;
const NORMALIZATION_TOL: f64 = 1e-12;
const INSTANCES: usize = 20;

#[derive(PartialEq)]
enum Status {
    Pass,
    Fail,
    Unavailable,
    Report,
}

struct Line {
    id: usize,
    name: &'static str,
    status: Status,
    detail: String,
}

impl Line {
    fn print(&self) {
        let tag = match self.status {
            Status::Pass => "PASS".to_string(),
            Status::Fail => "FAIL".to_string(),
            Status::Unavailable => "FAIL (dataset unavailable)".to_string(),
            Status::Report => "REPORT".to_string(),
        };
        println!("criterion {} {}: {} - {}", self.id, self.name, tag, self.detail);
    }
}

fn gate(ok: bool) -> Status {
    if ok {
        Status::Pass
    } else {
        Status::Fail
    }
}

// ---------- criterion 1 ----------

fn gradient_correctness() -> Line {
    let start = Instant::now();
    let outcome = grad_check(&Hyperparams::default(), 10, 1e-4, 2024);
    let elapsed = start.elapsed();
    let (status, detail) = match outcome {
        Ok(report) => (
            gate(report.passed() && elapsed < Duration::from_secs(10)),
            format!("max rel error {:.3e} (< 1e-4) over {} trials in {:.2}s (< 10s)", report.max_error(), report.trials, elapsed.as_secs_f64()),
        ),
        Err(e) => (Status::Fail, format!("grad check errored: {e}")),
    };
    Line { id: 1, name: "gradient correctness", status, detail }
}

// ---------- criterion 2 ----------

fn uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.gen_range(-1.0..1.0))
}

fn random_pairs(rng: &mut ChaCha8Rng, users: usize, items: usize, p: f64) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for u in 0..users {
        for v in 0..items {
            if v == u % items || rng.gen_bool(p) {
                pairs.push((u, v));
            }
        }
    }
    pairs
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

fn row(m: &Array2<f64>, r: usize) -> Vec<f64> {
    m.row(r).to_vec()
}

/// `Σ_k [ log Σ_k' exp(cos(a_k, o_k')/τ) - cos(a_k, o_k)/τ ]` by direct loops.
fn contrast_oracle(a: &[Vec<f64>], o: &[Vec<f64>], tau: f64) -> f64 {
    let mut total = 0.0;
    for (k, ak) in a.iter().enumerate() {
        let denom: f64 = o.iter().map(|oj| (cosine(ak, oj) / tau).exp()).sum();
        total += denom.ln() - cosine(ak, &o[k]) / tau;
    }
    total
}

fn random_side(rng: &mut ChaCha8Rng, rows: usize, dim: usize, layers: usize) -> SideStack {
    let base = uniform(rng, rows, dim);
    let mut side = SideStack { layers: Vec::new(), readouts: vec![base] };
    for _ in 0..layers {
        let layer = uniform(rng, rows, dim);
        let next = side.readouts.last().unwrap() + &layer;
        side.layers.push(layer);
        side.readouts.push(next);
    }
    side
}

fn leaky(x: f64, slope: f64) -> f64 {
    if x >= 0.0 {
        x
    } else {
        slope * x
    }
}

struct OracleCheck {
    name: &'static str,
    worst: f64,
    tolerance: f64,
    instances: usize,
}

fn check_normalization(rng: &mut ChaCha8Rng) -> OracleCheck {
    let mut worst: f64 = 0.0;
    for _ in 0..INSTANCES {
        let (users, items) = (rng.gen_range(1..9), rng.gen_range(1..9));
        let pairs = random_pairs(rng, users, items, 0.35);
        let graph = NormalizedBipartiteGraph::from_pairs(users, items, &pairs).unwrap();
        let mut r = vec![vec![0.0; items]; users];
        for &(u, v) in &pairs {
            r[u][v] = 1.0;
        }
        let dense = graph.adjacency.matrix().to_dense();
        for u in 0..users {
            for v in 0..items {
                let du: f64 = r[u].iter().sum();
                let dv: f64 = (0..users).map(|x| r[x][v]).sum();
                let expect = if r[u][v] > 0.0 { 1.0 / (du.sqrt() * dv.sqrt()) } else { 0.0 };
                worst = worst.max((dense[[u, v]] - expect).abs());
            }
        }
    }
    OracleCheck { name: "normalization", worst, tolerance: NORMALIZATION_TOL, instances: INSTANCES }
}

fn check_infonce(rng: &mut ChaCha8Rng) -> OracleCheck {
    let mut worst: f64 = 0.0;
    for _ in 0..INSTANCES {
        let (rows, dim, layers) = (rng.gen_range(2..12), rng.gen_range(1..6), rng.gen_range(1..4));
        let tau = rng.gen_range(0.05..2.0);
        let anchor = random_side(rng, rows, dim, layers);
        let other = random_side(rng, rows, dim, layers);
        let mut nodes: Vec<usize> = (0..rows).collect();
        nodes.shuffle(rng);
        nodes.truncate(rng.gen_range(1..=rows));
        let got = infonce_side(&anchor, &other, &nodes, tau).unwrap();
        let expect: f64 = (0..layers)
            .map(|l| {
                let a: Vec<_> = nodes.iter().map(|&k| row(&anchor.layers[l], k)).collect();
                let o: Vec<_> = nodes.iter().map(|&k| row(&other.layers[l], k)).collect();
                contrast_oracle(&a, &o, tau)
            })
            .sum();
        worst = worst.max((got - expect).abs());
    }
    OracleCheck { name: "infonce", worst, tolerance: ORACLE_TOL, instances: INSTANCES }
}

fn check_dispersing(rng: &mut ChaCha8Rng) -> OracleCheck {
    let mut worst: f64 = 0.0;
    for _ in 0..INSTANCES {
        let (rows, dim) = (rng.gen_range(1..15), rng.gen_range(1..6));
        let tau = rng.gen_range(0.1..3.0);
        let m = uniform(rng, rows, dim);
        let rs: Vec<_> = (0..rows).map(|k| row(&m, k)).collect();
        let got = dispersing_loss(m.view(), tau).unwrap();
        worst = worst.max((got - contrast_oracle(&rs, &rs, tau)).abs());
    }
    OracleCheck { name: "dispersing", worst, tolerance: ORACLE_TOL, instances: INSTANCES }
}

fn check_kl(rng: &mut ChaCha8Rng) -> OracleCheck {
    let mut worst: f64 = 0.0;
    for _ in 0..INSTANCES {
        let (rows, dim) = (rng.gen_range(2..15), rng.gen_range(1..6));
        let m = uniform(rng, rows, dim) * 3.0;
        let mut expect = 0.0;
        for c in 0..dim {
            let z: f64 = (0..rows).map(|r| m[[r, c]].exp()).sum();
            for r in 0..rows {
                let p = m[[r, c]].exp() / z;
                expect += p * (p * rows as f64).ln();
            }
        }
        expect /= dim as f64;
        worst = worst.max((kl_uniform_loss(m.view()).unwrap() - expect).abs());
    }
    OracleCheck { name: "kl", worst, tolerance: ORACLE_TOL, instances: INSTANCES }
}

fn check_hypergraph(rng: &mut ChaCha8Rng) -> OracleCheck {
    let mut worst: f64 = 0.0;
    for _ in 0..INSTANCES {
        let (users, items) = (rng.gen_range(2..8), rng.gen_range(2..8));
        let (dim, hyper, layers) = (rng.gen_range(1..5), rng.gen_range(1..5), rng.gen_range(1..4));
        let slope = rng.gen_range(0.0..1.0);
        let graph = NormalizedBipartiteGraph::from_pairs(users, items, &random_pairs(rng, users, items, 0.4)).unwrap();
        let params = ModelParams {
            e_user: uniform(rng, users, dim),
            e_item: uniform(rng, items, dim),
            w_user: uniform(rng, dim, hyper),
            w_item: uniform(rng, dim, hyper),
        };
        let gcn = forward_gcn(&params, &graph, layers).unwrap();
        for (w, side) in [(&params.w_user, &gcn.user), (&params.w_item, &gcn.item)] {
            let got = hypergraph_side(w, side, layers, slope).unwrap();
            for l in 0..layers {
                // Dense incidence, then the n x n hyperedge product.
                let x = &side.readouts[l];
                let h = x.dot(w);
                let adjacency = h.dot(&h.t());
                let dense = adjacency.dot(x).mapv(|v| leaky(v, slope));
                for (a, b) in got.layers[l].iter().zip(dense.iter()) {
                    worst = worst.max((a - b).abs());
                }
            }
        }
    }
    OracleCheck { name: "hypergraph", worst, tolerance: ORACLE_TOL, instances: INSTANCES }
}

fn check_ranking(rng: &mut ChaCha8Rng) -> OracleCheck {
    let cutoffs = [1usize, 3, 5, 10];
    let mut worst: f64 = 0.0;
    for _ in 0..INSTANCES {
        let (users, items, dim) = (rng.gen_range(2..10), rng.gen_range(5..25), rng.gen_range(1..4));
        let mut train = vec![Vec::new(); users];
        let mut test = vec![Vec::new(); users];
        for u in 0..users {
            for v in 0..items {
                match rng.gen_range(0..10) {
                    0 | 1 => train[u].push(v),
                    2 => test[u].push(v),
                    _ => {}
                }
            }
        }
        let split = SplitDataset { num_users: users, num_items: items, train, validation: vec![Vec::new(); users], test, seed: 0 };
        // Coarse scores so ties occur.
        let ue = uniform(rng, users, dim).mapv(|x| (x * 2.0).round());
        let ie = uniform(rng, items, dim).mapv(|x| (x * 2.0).round());
        let report = evaluate_embeddings(&ue, &ie, &split, Part::Test, &cutoffs).unwrap();
        let mut recall = [0.0; 4];
        let mut ndcg = [0.0; 4];
        let mut counted = 0;
        for u in 0..users {
            if split.test[u].is_empty() {
                continue;
            }
            counted += 1;
            let mut order: Vec<(f64, usize)> = (0..items)
                .filter(|v| !split.train[u].contains(v))
                .map(|v| ((0..dim).map(|k| ue[[u, k]] * ie[[v, k]]).sum(), v))
                .collect();
            order.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
            for (c, &n) in cutoffs.iter().enumerate() {
                let top: Vec<usize> = order.iter().take(n).map(|x| x.1).collect();
                let hits = top.iter().filter(|v| split.test[u].contains(v)).count();
                recall[c] += hits as f64 / split.test[u].len() as f64;
                let dcg: f64 = top
                    .iter()
                    .enumerate()
                    .filter(|(_, v)| split.test[u].contains(v))
                    .map(|(i, _)| 1.0 / ((i + 2) as f64).log2())
                    .sum();
                let idcg: f64 = (0..n.min(split.test[u].len())).map(|i| 1.0 / ((i + 2) as f64).log2()).sum();
                ndcg[c] += dcg / idcg;
            }
        }
        if counted == 0 {
            continue;
        }
        for c in 0..cutoffs.len() {
            worst = worst.max((report.recall[c] - recall[c] / counted as f64).abs());
            worst = worst.max((report.ndcg[c] - ndcg[c] / counted as f64).abs());
        }
    }
    OracleCheck { name: "ranking", worst, tolerance: ORACLE_TOL, instances: INSTANCES }
}

fn oracle_equivalence() -> Line {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let checks = [
        check_normalization(&mut rng),
        check_infonce(&mut rng),
        check_dispersing(&mut rng),
        check_kl(&mut rng),
        check_hypergraph(&mut rng),
        check_ranking(&mut rng),
    ];
    let elapsed = start.elapsed();
    let ok = checks.iter().all(|c| c.worst <= c.tolerance && c.instances >= INSTANCES) && elapsed < Duration::from_secs(30);
    let parts: Vec<String> = checks.iter().map(|c| format!("{} {:.1e}/{:.0e}", c.name, c.worst, c.tolerance)).collect();
    Line {
        id: 2,
        name: "oracle equivalence",
        status: gate(ok),
        detail: format!("{} over {} instances each in {:.2}s (< 30s)", parts.join(", "), INSTANCES, elapsed.as_secs_f64()),
    }
}

// ---------- Last.FM criteria ----------

fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("..").join("..")
}

fn lastfm_path() -> Option<PathBuf> {
    let candidate = match std::env::var_os("BUSGCL_LASTFM") {
        Some(p) => PathBuf::from(p),
        None => workspace_root().join("data").join("lastfm").join("user_artists.dat"),
    };
    candidate.is_file().then_some(candidate)
}

/// The distributed file starts with a `userID artistID weight` line.
fn has_header(path: &Path) -> bool {
    let text = std::fs::read_to_string(path).unwrap_or_default();
    let first = text.lines().next().unwrap_or_default();
    first.split_whitespace().next().map_or(false, |tok| tok.parse::<u64>().is_err())
}

fn epochs() -> usize {
    std::env::var("BUSGCL_ACCEPTANCE_EPOCHS").ok().and_then(|v| v.parse().ok()).unwrap_or(DEFAULT_EPOCHS)
}

fn lastfm_hp() -> Hyperparams {
    let mut hp = Hyperparams::default();
    hp.epochs = epochs();
    hp
}

fn sequential<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(1).build().expect("thread pool").install(f)
}

struct RunResult {
    report: MetricsReport,
    best_epoch: Option<usize>,
    elapsed: Duration,
}

fn train_and_test(split: &SplitDataset, hp: &Hyperparams) -> Result<RunResult, busgcl::Error> {
    let start = Instant::now();
    let outcome = sequential(|| train(split, hp, None))?;
    let report = evaluate(&outcome.best_params, &outcome.graph, split, &[20], hp.layers)?;
    Ok(RunResult { report, best_epoch: outcome.best_epoch, elapsed: start.elapsed() })
}

fn recall20(r: &RunResult) -> f64 {
    r.report.recall_at(20).expect("cutoff 20")
}

fn ndcg20(r: &RunResult) -> f64 {
    r.report.ndcg_at(20).expect("cutoff 20")
}

fn unavailable(id: usize, name: &'static str, why: &str) -> Line {
    Line { id, name, status: Status::Unavailable, detail: why.to_string() }
}

fn errored(id: usize, name: &'static str, e: &busgcl::Error) -> Line {
    Line { id, name, status: Status::Fail, detail: format!("run errored: {e}") }
}

fn lastfm_criteria(lines: &mut Vec<Line>) -> Option<(InteractionDataset, SplitDataset)> {
    let Some(path) = lastfm_path() else {
        let why = "set BUSGCL_LASTFM or place user_artists.dat under data/lastfm/";
        lines.push(unavailable(3, "lastfm reproduction", why));
        lines.push(unavailable(4, "ablation ordering", why));
        lines.push(unavailable(6, "determinism", why));
        return None;
    };
    let hp = lastfm_hp();
    let ds = match load_interactions(&path, has_header(&path)) {
        Ok(ds) => ds,
        Err(e) => {
            for (id, name) in [(3, "lastfm reproduction"), (4, "ablation ordering"), (6, "determinism")] {
                lines.push(errored(id, name, &e));
            }
            return None;
        }
    };
    let split = split_dataset(&ds, hp.train_frac, hp.valid_frac, hp.seed).expect("default split fractions");
    eprintln!(
        "lastfm: {} users, {} items, {} pairs; {} epochs per run",
        ds.num_users,
        ds.num_items,
        ds.pairs.len(),
        hp.epochs
    );

    let full = match train_and_test(&split, &hp) {
        Ok(r) => r,
        Err(e) => {
            for (id, name) in [(3, "lastfm reproduction"), (4, "ablation ordering"), (6, "determinism")] {
                lines.push(errored(id, name, &e));
            }
            return None;
        }
    };
    let (r, n) = (recall20(&full), ndcg20(&full));
    lines.push(Line {
        id: 3,
        name: "lastfm reproduction",
        status: gate(r >= 0.22 && n >= 0.16),
        detail: format!(
            "recall@20 {r:.4} (>= 0.22), ndcg@20 {n:.4} (>= 0.16), best epoch {:?}, {:.0}s (target <= 3600s)",
            full.best_epoch,
            full.elapsed.as_secs_f64()
        ),
    });

    let mut per_nodisp = hp.clone();
    per_nodisp.set_subview_mode(SubviewMode::PerBoth);
    per_nodisp.disp_mode = DispMode::None;
    let mut per_disp = per_nodisp.clone();
    per_disp.disp_mode = DispMode::Dispersing;
    match (train_and_test(&split, &per_disp), train_and_test(&split, &per_nodisp)) {
        (Ok(pd), Ok(pn)) => {
            let (full_r, pd_r, pn_r) = (r, recall20(&pd), recall20(&pn));
            lines.push(Line {
                id: 4,
                name: "ablation ordering",
                status: gate(full_r > pd_r && pd_r >= 0.99 * pn_r),
                detail: format!(
                    "busgcl {full_r:.4} > busgcl_per {pd_r:.4}; busgcl_per {pd_r:.4} >= 0.99 x per without dispersing {pn_r:.4}"
                ),
            });
        }
        (Err(e), _) | (_, Err(e)) => lines.push(errored(4, "ablation ordering", &e)),
    }

    match train_and_test(&split, &hp) {
        Ok(again) => {
            let (a, b) = (full.report.to_json(), again.report.to_json());
            lines.push(Line {
                id: 6,
                name: "determinism",
                status: gate(a == b),
                detail: if a == b { format!("identical metrics json {a}") } else { format!("{a} != {b}") },
            });
        }
        Err(e) => lines.push(errored(6, "determinism", &e)),
    }
    Some((ds, split))
}

// ---------- criterion 5 ----------

/// Users and items fall into latent groups; most interactions stay inside
/// the user's group.
fn clustered_dataset(seed: u64) -> InteractionDataset {
    let (users, items, groups) = (240usize, 300usize, 6usize);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::new();
    for u in 0..users {
        let g = u % groups;
        for v in 0..items {
            let p = if v % groups == g { 0.18 } else { 0.01 };
            if v == u % items || rng.gen_bool(p) {
                pairs.push((u, v));
            }
        }
    }
    InteractionDataset::from_index_pairs(users, items, &pairs).expect("every index covered")
}

fn layer_sweep(lastfm: Option<&SplitDataset>) -> Line {
    let use_lastfm = std::env::var("BUSGCL_ACCEPTANCE_LAYERS").map_or(false, |v| v == "lastfm");
    let mut hp = Hyperparams::default();
    let (split, label) = match lastfm.filter(|_| use_lastfm) {
        Some(s) => {
            hp.epochs = epochs();
            (s.clone(), "lastfm")
        }
        None => {
            hp.epochs = 30;
            hp.batch_size = 512;
            hp.hyperedges = 32;
            hp.learning_rate = 5e-3;
            let ds = clustered_dataset(hp.seed);
            (split_dataset(&ds, hp.train_frac, hp.valid_frac, hp.seed).expect("split"), "synthetic clustered set")
        }
    };
    let mut cells = Vec::new();
    println!("layers,recall@20,ndcg@20");
    for layers in 1..=5 {
        hp.layers = layers;
        match train_and_test(&split, &hp) {
            Ok(r) => {
                println!("{layers},{:.6},{:.6}", recall20(&r), ndcg20(&r));
                cells.push(format!("L={layers} {:.4}", recall20(&r)));
            }
            Err(e) => return errored(5, "layer sweep", &e),
        }
    }
    Line { id: 5, name: "layer sweep", status: Status::Report, detail: format!("{label}, recall@20: {}", cells.join(", ")) }
}

fn main() {
    let mut lines = vec![gradient_correctness(), oracle_equivalence()];
    let lastfm = lastfm_criteria(&mut lines);
    lines.push(layer_sweep(lastfm.as_ref().map(|(_, s)| s)));
    lines.sort_by_key(|l| l.id);
    for line in &lines {
        line.print();
    }
    let strict = std::env::var("BUSGCL_ACCEPTANCE_STRICT").map_or(false, |v| v == "1");
    let failed = lines.iter().any(|l| l.status == Status::Fail || (strict && l.status == Status::Unavailable));
    if failed {
        std::process::exit(1);
    }
}
