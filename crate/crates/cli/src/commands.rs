use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use busgcl::dataset::{build_normalized_adjacency, load_interactions, split_dataset, InteractionDataset, SplitDataset};
use busgcl::evaluation::{evaluate, pca_project, MetricsReport};
use busgcl::propagation::{forward_gcn, ModelParams};
use busgcl::training::{grad_check, load_checkpoint, train_with_progress, Hyperparams, CHECKPOINT_FILE};
use ndarray::{concatenate, Array2, Axis};

use crate::ablation::grid_spec;
use crate::args::{AblateArgs, EvaluateArgs, ExportArgs, GradCheckArgs, TrainArgs};
use crate::config::{parse_cutoffs, RunConfig, CONFIG_FILE};
use crate::error::{CliError, CliResult};

pub const METRICS_FILE: &str = "metrics.json";
pub const USER_IDS_FILE: &str = "user_ids.tsv";
pub const ITEM_IDS_FILE: &str = "item_ids.tsv";
pub const EMBEDDINGS_FILE: &str = "embeddings.tsv";
pub const PROJECTION_FILE: &str = "projection.tsv";

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| busgcl::Error::io(dir, e))?;
    Ok(())
}

fn write_file(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| busgcl::Error::io(path, e))?;
    Ok(())
}

/// Loads the interaction file and applies the configured split.
pub fn load_split(cfg: &RunConfig) -> CliResult<(InteractionDataset, SplitDataset)> {
    let ds = load_interactions(cfg.data_path()?, cfg.header)?;
    let split = split_dataset(&ds, cfg.hp.train_frac, cfg.hp.valid_frac, cfg.hp.seed).map_err(CliError::from_config)?;
    Ok((ds, split))
}

/// Trains one configuration into `out`, writing the resolved config, id
/// maps, history, checkpoint and test metrics. Returns the test report and
/// the best validation epoch.
pub fn train_into(
    cfg: &RunConfig,
    ds: &InteractionDataset,
    split: &SplitDataset,
    out: &Path,
    quiet: bool,
) -> CliResult<(MetricsReport, Option<usize>)> {
    cfg.validate()?;
    create_dir(out)?;
    cfg.save(out)?;
    ds.write_id_maps(&out.join(USER_IDS_FILE), &out.join(ITEM_IDS_FILE))?;
    let hp = &cfg.hp;
    let mut progress = |row: &busgcl::training::HistoryRow| {
        if quiet {
            return;
        }
        let mut line = format!("epoch {:>4}  lr {:.3e}  loss {:.6}", row.epoch, row.learning_rate, row.loss.total);
        if let Some((r, n)) = row.validation {
            write!(line, "  val recall@20 {r:.4}  ndcg@20 {n:.4}").unwrap();
        }
        eprintln!("{line}");
    };
    let outcome = train_with_progress(split, hp, Some(out), &mut progress)?;
    let mut report = evaluate(&outcome.best_params, &outcome.graph, split, &cfg.cutoffs, hp.layers)?;
    report.hp_hash = hp.hash();
    write_file(&out.join(METRICS_FILE), &format!("{}\n", report.to_json()))?;
    Ok((report, outcome.best_epoch))
}

pub fn cmd_train(args: &TrainArgs) -> CliResult<()> {
    let mut cfg = args.hp.resolve()?;
    if let Some(at) = &args.at {
        cfg.cutoffs = parse_cutoffs(at)?;
    }
    cfg.validate()?;
    let (ds, split) = load_split(&cfg)?;
    let (report, _) = train_into(&cfg, &ds, &split, &args.out, args.quiet)?;
    println!("{}", report.to_table());
    println!("{}", report.to_json());
    Ok(())
}

/// Loads a run directory's config and checkpoint and checks they agree with
/// each other and with the dataset.
fn load_run(run: &Path, data: Option<&Path>) -> CliResult<(RunConfig, ModelParams)> {
    let mut cfg = RunConfig::load(&run.join(CONFIG_FILE))?;
    if let Some(d) = data {
        cfg.data = Some(d.to_path_buf());
    }
    let (params, stored) = load_checkpoint(&run.join(CHECKPOINT_FILE))?;
    if stored != cfg.hp {
        return Err(CliError::Failed(format!(
            "checkpoint hyperparameters ({}) differ from {} ({})",
            stored.hash(),
            CONFIG_FILE,
            cfg.hp.hash()
        )));
    }
    Ok((cfg, params))
}

fn check_shape(params: &ModelParams, split: &SplitDataset) -> CliResult<()> {
    if params.num_users() != split.num_users || params.num_items() != split.num_items {
        return Err(CliError::Failed(format!(
            "checkpoint holds {} users x {} items but the dataset has {} x {}",
            params.num_users(),
            params.num_items(),
            split.num_users,
            split.num_items
        )));
    }
    Ok(())
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> CliResult<()> {
    let (mut cfg, params) = load_run(&args.run, args.data.as_deref())?;
    if let Some(at) = &args.at {
        cfg.cutoffs = parse_cutoffs(at)?;
    }
    let (_, split) = load_split(&cfg)?;
    check_shape(&params, &split)?;
    let graph = build_normalized_adjacency(&split)?;
    let mut report = evaluate(&params, &graph, &split, &cfg.cutoffs, cfg.hp.layers)?;
    report.hp_hash = cfg.hp.hash();
    println!("{}", report.to_table());
    println!("{}", report.to_json());
    Ok(())
}

pub fn cmd_ablate(args: &AblateArgs) -> CliResult<()> {
    let base = args.hp.resolve()?;
    base.validate()?;
    let spec = grid_spec(args.grid);
    let valid: Vec<&str> = spec.variants.iter().map(|v| v.label.as_str()).collect();
    for name in &args.only {
        if !valid.contains(&name.as_str()) {
            return Err(CliError::Usage(format!("unknown variant `{name}` for grid {} (valid: {})", spec.name, valid.join(", "))));
        }
    }
    let chosen: Vec<_> = spec.variants.iter().filter(|v| args.only.is_empty() || args.only.contains(&v.label)).collect();
    // Resolve every variant up front so a bad override fails before any training.
    let mut configs = Vec::with_capacity(chosen.len());
    for v in &chosen {
        let mut cfg = base.clone();
        for (k, value) in &v.overrides {
            cfg.set(k, value)?;
        }
        cfg.validate()?;
        configs.push(cfg);
    }
    create_dir(&args.out)?;
    base.save(&args.out)?;
    let (ds, split) = load_split(&base)?;

    let mut header: Vec<String> = spec.columns.iter().map(|c| c.to_string()).collect();
    for n in &base.cutoffs {
        header.push(format!("recall@{n}"));
        header.push(format!("ndcg@{n}"));
    }
    header.push("best_epoch".into());
    let mut csv = format!("{}\n", header.join(","));
    let csv_path = args.out.join(format!("ablation_{}.csv", spec.name));
    for (v, cfg) in chosen.iter().zip(&configs) {
        if !args.quiet {
            eprintln!("== {} ==", v.label);
        }
        let (report, best_epoch) = train_into(cfg, &ds, &split, &args.out.join(&v.label), args.quiet)?;
        let mut cells = v.cells.clone();
        for i in 0..report.cutoffs.len() {
            cells.push(report.recall[i].to_string());
            cells.push(report.ndcg[i].to_string());
        }
        cells.push(best_epoch.map(|e| e.to_string()).unwrap_or_default());
        writeln!(csv, "{}", cells.join(",")).unwrap();
        write_file(&csv_path, &csv)?;
    }
    write_file(&csv_path, &csv)?;
    print!("{csv}");
    Ok(())
}

fn embedding_rows(kind: &str, m: &Array2<f64>, out: &mut String) {
    for (i, row) in m.rows().into_iter().enumerate() {
        let cells: Vec<String> = row.iter().map(|x| x.to_string()).collect();
        writeln!(out, "{kind}\t{i}\t{}", cells.join("\t")).unwrap();
    }
}

pub fn cmd_export(args: &ExportArgs) -> CliResult<()> {
    let (cfg, params) = load_run(&args.run, args.data.as_deref())?;
    let (user, item) = if args.raw {
        (params.e_user.clone(), params.e_item.clone())
    } else {
        let (_, split) = load_split(&cfg)?;
        check_shape(&params, &split)?;
        let graph = build_normalized_adjacency(&split)?;
        let stack = forward_gcn(&params, &graph, cfg.hp.layers)?;
        (stack.user.final_readout().clone(), stack.item.final_readout().clone())
    };
    let out_dir = args.out.as_deref().unwrap_or(&args.run);
    create_dir(out_dir)?;

    let dims: Vec<String> = (0..params.dim()).map(|k| format!("e{k}")).collect();
    let mut text = format!("node_type\tindex\t{}\n", dims.join("\t"));
    embedding_rows("user", &user, &mut text);
    embedding_rows("item", &item, &mut text);
    write_file(&out_dir.join(EMBEDDINGS_FILE), &text)?;

    let stacked = concatenate(Axis(0), &[user.view(), item.view()]).expect("equal widths");
    let projection = pca_project(&stacked, 2).map_err(CliError::from_config)?;
    if projection.degenerate {
        eprintln!("warning: embeddings have no variance; projection is all zeros");
    }
    let mut text = String::from("node_type\tindex\tx\ty\n");
    for (r, row) in projection.coords.rows().into_iter().enumerate() {
        let (kind, index) = if r < user.nrows() { ("user", r) } else { ("item", r - user.nrows()) };
        writeln!(text, "{kind}\t{index}\t{}\t{}", row[0], row[1]).unwrap();
    }
    write_file(&out_dir.join(PROJECTION_FILE), &text)?;
    eprintln!("wrote {} rows to {}", user.nrows() + item.nrows(), out_dir.display());
    Ok(())
}

pub fn cmd_grad_check(args: &GradCheckArgs) -> CliResult<()> {
    if args.trials == 0 {
        return Err(CliError::Usage("--trials must be at least 1".into()));
    }
    if !(args.tolerance >= 0.0) {
        return Err(CliError::Usage(format!("--tolerance must be >= 0, got {}", args.tolerance)));
    }
    let mut hp = match &args.config {
        Some(path) => RunConfig::load(path)?.hp,
        None => Hyperparams::default(),
    };
    if let Some(m) = &args.subview_mode {
        hp.set("subview_mode", m).map_err(CliError::from_config)?;
    }
    if let Some(m) = &args.disp_mode {
        hp.set("disp_mode", m).map_err(CliError::from_config)?;
    }
    for pair in &args.sets {
        let (k, v) = pair.split_once('=').ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got `{pair}`")))?;
        hp.set(k.trim(), v.trim()).map_err(CliError::from_config)?;
    }
    let report = grad_check(&hp, args.trials, args.tolerance, args.seed).map_err(CliError::from_config)?;
    println!("{}", report.to_table());
    if report.passed() {
        Ok(())
    } else {
        Err(CliError::Failed(format!("gradient check failed: max relative error {:e} >= tolerance {:e}", report.max_error(), args.tolerance)))
    }
}
